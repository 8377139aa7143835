#include "rem/worldgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "rem/error.hpp"
#include "rem/numerics.hpp"
#include "rem/rng.hpp"

namespace rem {

std::string to_string(Role role) {
  switch (role) {
    case Role::Real: return "real";
    case Role::NearReal: return "near_real";
    case Role::Fake: return "fake";
  }
  return "real";
}

Role parse_role(const std::string& text) {
  if (text == "real") return Role::Real;
  if (text == "near_real") return Role::NearReal;
  if (text == "fake") return Role::Fake;
  throw Error(ErrorKind::Parse, "unknown role '" + text + "' (expected real, near_real, fake)");
}

std::string to_string(PayloadMode mode) { return mode == PayloadMode::Image ? "image" : "vector"; }

PayloadMode parse_mode(const std::string& text) {
  if (text == "image") return PayloadMode::Image;
  if (text == "vector") return PayloadMode::Vector;
  throw Error(ErrorKind::InvalidArgument, "unknown mode '" + text + "' (expected image, vector)");
}

namespace worldgen {

namespace {

// Radial frequency (cycles/pixel) of every DFT bin.
Eigen::MatrixXd radial_frequency(int h, int w) {
  Eigen::MatrixXd r(h, w);
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) r(u, v) = std::hypot(bin_frequency(u, h), bin_frequency(v, w));
  return r;
}

Eigen::MatrixXd lowpass_field(SeededRng& rng, int size, double cutoff, double stddev) {
  Eigen::MatrixXd white(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) white(i, j) = rng.gaussian();
  ComplexMatrix spectrum = dft2(white);
  const Eigen::MatrixXd r = radial_frequency(size, size);
  spectrum.array() *= (-(r.array() / cutoff).square()).exp().cast<std::complex<double>>();
  Eigen::MatrixXd field = idft2_real(spectrum);
  const double mean = field.mean();
  const double sd = std::sqrt((field.array() - mean).square().mean());
  return field * (stddev / std::max(sd, 1e-12));
}

Eigen::MatrixXd blocky(const Eigen::MatrixXd& img) {
  Eigen::MatrixXd out(img.rows(), img.cols());
  for (long y = 0; y < img.rows(); y += 2) {
    for (long x = 0; x < img.cols(); x += 2) {
      const long y1 = std::min(y + 1, img.rows() - 1);
      const long x1 = std::min(x + 1, img.cols() - 1);
      const double avg = 0.25 * (img(y, x) + img(y, x1) + img(y1, x) + img(y1, x1));
      out(y, x) = avg;
      out(y, x1) = avg;
      out(y1, x) = avg;
      out(y1, x1) = avg;
    }
  }
  return out;
}

Eigen::MatrixXd notch(const Eigen::MatrixXd& img, double lo, double hi) {
  ComplexMatrix spectrum = dft2(img);
  const Eigen::MatrixXd r = radial_frequency(static_cast<int>(img.rows()), static_cast<int>(img.cols()));
  for (long u = 0; u < r.rows(); ++u)
    for (long v = 0; v < r.cols(); ++v)
      if (r(u, v) >= lo && r(u, v) < hi) spectrum(u, v) = 0.0;
  return idft2_real(spectrum);
}

Eigen::MatrixXd quantize(const Eigen::MatrixXd& img, int levels) {
  const double steps = levels - 1;
  return (img.array().max(0.0).min(1.0) * steps).round() / steps;
}

void check_family(const std::string& family) {
  if (std::find(kFamilies.begin(), kFamilies.end(), family) == kFamilies.end()) {
    throw Error(ErrorKind::InvalidArgument,
                "unknown family '" + family + "' (valid families: checker, notch, quant)");
  }
}

std::string sample_id(const std::string& prefix, std::uint64_t seed, int index) {
  std::ostringstream os;
  os << prefix << "-s" << seed << "-" << index;
  return os.str();
}

Eigen::VectorXd vector_artifact(const std::string& family, const Eigen::VectorXd& y,
                                const WorldParams& params) {
  Eigen::VectorXd out = y;
  if (family == "checker") {
    for (long i = 0; i < out.size(); ++i) out(i) += (i % 2 == 0) ? 0.05 : -0.05;
  } else if (family == "notch") {
    const Eigen::MatrixXd row = y.transpose();
    ComplexMatrix spectrum = dft2(row);
    const int n = static_cast<int>(y.size());
    for (int v = 0; v < n; ++v) {
      const double f = std::abs(bin_frequency(v, n));
      if (f >= params.notch_low && f < params.notch_high) spectrum(0, v) = 0.0;
    }
    out = idft2_real(spectrum).row(0).transpose();
  } else {
    const double steps = params.quant_levels - 1;
    out = ((((y.array() + 2.0) / 4.0).max(0.0).min(1.0) * steps).round() / steps) * 4.0 - 2.0;
  }
  return out;
}

}  // namespace

Embedding::Embedding(const WorldParams& params) {
  SeededRng rng(kEmbeddingSeed);
  const int m = params.latent_dim;
  const int h = params.embed_hidden;
  const int d = params.ambient_dim;
  w1_.resize(h, m);
  b1_.resize(h);
  w2_.resize(d, h);
  b2_.resize(d);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < m; ++j) w1_(i, j) = rng.gaussian() * 1.5 / std::sqrt(static_cast<double>(m));
  for (int i = 0; i < h; ++i) b1_(i) = 0.3 * rng.gaussian();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < h; ++j) w2_(i, j) = rng.gaussian() / std::sqrt(static_cast<double>(h));
  for (int i = 0; i < d; ++i) b2_(i) = 0.1 * rng.gaussian();
}

Eigen::VectorXd Embedding::operator()(const Eigen::Ref<const Eigen::VectorXd>& latent) const {
  require_dims(latent.size(), w1_.cols(), "Embedding");
  return w2_ * (w1_ * latent + b1_).array().tanh().matrix() + b2_;
}

Image real_image(std::uint64_t sample_seed, const WorldParams& params) {
  SeededRng rng(sample_seed);
  const int n = params.image_size;
  Eigen::MatrixXd img = Eigen::MatrixXd::Constant(
      n, n, 0.5 + rng.uniform(-params.offset_range, params.offset_range));
  img += lowpass_field(rng, n, params.field_cutoff, params.field_std);

  const long shapes = rng.uniform_int(params.min_shapes, params.max_shapes);
  for (long s = 0; s < shapes; ++s) {
    const double value = rng.uniform(0.2, 0.8);
    const double cx = rng.uniform(4.0, n - 4.0);
    const double cy = rng.uniform(4.0, n - 4.0);
    const double radius = rng.uniform(params.shape_radius_min, params.shape_radius_max);
    const bool disc = rng.uniform() < 0.5;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        const double d = disc ? std::hypot(dx, dy) : std::max(std::abs(dx), std::abs(dy));
        const double m = params.shape_blend / (1.0 + std::exp((d - radius) / params.shape_softness));
        img(y, x) = img(y, x) * (1.0 - m) + value * m;
      }
    }
  }

  const double sigma = rng.uniform(params.noise_min, params.noise_max);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) img(y, x) += sigma * rng.gaussian();

  Image out;
  for (int c = 0; c < params.channels; ++c) {
    const double gain = params.channels == 1 ? 1.0 : rng.uniform(0.9, 1.1);
    out.planes.emplace_back(((img.array() - 0.5) * gain + 0.5).cast<float>());
  }
  quantize8(out);
  return out;
}

Image apply_family(const std::string& family, const Image& real, const WorldParams& params) {
  check_family(family);
  Image out;
  for (const auto& plane : real.planes) {
    const Eigen::MatrixXd p = plane.matrix().cast<double>();
    Eigen::MatrixXd q;
    if (family == "checker") q = blocky(p);
    else if (family == "notch") q = notch(p, params.notch_low, params.notch_high);
    else q = quantize(p, params.quant_levels);
    out.planes.emplace_back(q.array().cast<float>());
  }
  quantize8(out);
  return out;
}

Eigen::VectorXd real_vector(std::uint64_t sample_seed, const WorldParams& params,
                            double noise_scale) {
  static thread_local std::optional<std::pair<std::string, Embedding>> cache;
  std::ostringstream key;
  key << params.latent_dim << ',' << params.ambient_dim << ',' << params.embed_hidden;
  if (!cache || cache->first != key.str()) cache.emplace(key.str(), Embedding(params));
  const Embedding& psi = cache->second;

  SeededRng rng(sample_seed);
  Eigen::VectorXd u(params.latent_dim);
  for (auto& v : u) v = rng.uniform(-1.0, 1.0);
  Eigen::VectorXd y = psi(u);
  for (auto& v : y) v += noise_scale * rng.gaussian();
  return y;
}

std::vector<Sample> gen_real(std::uint64_t seed, int n, PayloadMode mode,
                             const WorldParams& params) {
  require(n >= 1, ErrorKind::InvalidArgument, "gen_real: n must be >= 1");
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.id = sample_id("real", seed, i);
    s.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    s.role = Role::Real;
    if (mode == PayloadMode::Image) s.payload = real_image(s.seed, params);
    else s.payload = Eigen::VectorXf(real_vector(s.seed, params, params.vector_noise).cast<float>());
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> gen_fake(const std::string& family, std::uint64_t seed, int n,
                             PayloadMode mode, const WorldParams& params) {
  check_family(family);
  require(n >= 1, ErrorKind::InvalidArgument, "gen_fake: n must be >= 1");
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.id = sample_id(family, seed, i);
    s.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    s.role = Role::Fake;
    s.family = family;
    if (mode == PayloadMode::Image) {
      s.payload = apply_family(family, real_image(s.seed, params), params);
    } else {
      const Eigen::VectorXd y = real_vector(s.seed, params, params.vector_noise);
      s.payload = Eigen::VectorXf(vector_artifact(family, y, params).cast<float>());
    }
    out.push_back(std::move(s));
  }
  return out;
}

double high_frequency_ratio(const Image& image) {
  const Eigen::MatrixXd mag = dft2_magnitude(luminance(image));
  const Eigen::MatrixXd r = radial_frequency(image.height(), image.width());
  const double r_max = r.maxCoeff();
  double outer = 0.0;
  double total = 0.0;
  for (long u = 0; u < r.rows(); ++u) {
    for (long v = 0; v < r.cols(); ++v) {
      if (u == 0 && v == 0) continue;
      const double e = mag(u, v) * mag(u, v);
      total += e;
      if (r(u, v) >= 0.5 * r_max) outer += e;
    }
  }
  return total > 0.0 ? outer / total : 0.0;
}

}  // namespace worldgen

namespace {

std::string field_or_dash(const std::string& s) { return s.empty() ? "-" : s; }
std::string dash_to_empty(const std::string& s) { return s == "-" ? std::string() : s; }

void write_le64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_le64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

CorpusManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::MissingFile, "missing file: " + path.string());
  CorpusManifest manifest;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    require(fields.size() == 6, ErrorKind::Parse,
            path.string() + ":" + std::to_string(line_no) + ": expected 6 tab-separated fields");
    ManifestEntry e;
    e.id = fields[0];
    e.role = parse_role(fields[1]);
    if (fields[2] != "-") e.family = fields[2];
    e.seed = std::stoull(fields[3]);
    e.chain = dash_to_empty(fields[4]);
    e.path = fields[5];
    require(ids.insert(e.id).second, ErrorKind::Parse,
            path.string() + ":" + std::to_string(line_no) + ": duplicate id " + e.id);
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  for (const auto& e : manifest.entries) {
    out << e.id << '\t' << to_string(e.role) << '\t' << e.family.value_or("-") << '\t' << e.seed
        << '\t' << field_or_dash(e.chain) << '\t' << e.path << '\n';
  }
}

void write_vector(const Eigen::VectorXf& values, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  write_le64(out, static_cast<std::uint64_t>(values.size()));
  for (float v : values) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &v, 4);
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
  }
}

Eigen::VectorXf read_vector(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::MissingFile, "missing file: " + path.string());
  const std::uint64_t n = read_le64(in);
  require(static_cast<bool>(in) && n < (1ULL << 32), ErrorKind::Parse,
          path.string() + ": bad vector header");
  Eigen::VectorXf v(static_cast<long>(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require(static_cast<bool>(in), ErrorKind::Parse, path.string() + ": truncated vector");
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(b[k]) << (8 * k);
    float f = 0.0f;
    std::memcpy(&f, &bits, 4);
    v(static_cast<long>(i)) = f;
  }
  return v;
}

std::filesystem::path write_corpus(const std::vector<Sample>& samples,
                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "payloads");
  CorpusManifest manifest;
  std::set<std::string> ids;
  for (const auto& s : samples) {
    require(ids.insert(s.id).second, ErrorKind::InvalidArgument, "duplicate sample id " + s.id);
    ManifestEntry e{s.id, s.role, s.family, s.seed, s.chain, {}};
    if (s.is_image()) {
      e.path = "payloads/" + s.id + (s.image().channels() == 1 ? ".pgm" : ".ppm");
      write_pnm(s.image(), dir / e.path);
    } else {
      e.path = "payloads/" + s.id + ".vec";
      write_vector(s.vector(), dir / e.path);
    }
    manifest.entries.push_back(std::move(e));
  }
  const auto manifest_path = dir / "manifest.tsv";
  write_manifest(manifest, manifest_path);
  return manifest_path;
}

std::vector<Sample> read_corpus(const std::filesystem::path& manifest_path) {
  const CorpusManifest manifest = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  std::vector<Sample> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    Sample s;
    s.id = e.id;
    s.role = e.role;
    s.family = e.family;
    s.seed = e.seed;
    s.chain = e.chain;
    const auto payload_path = base / e.path;
    require(std::filesystem::exists(payload_path), ErrorKind::MissingFile,
            "missing file: " + payload_path.string());
    if (payload_path.extension() == ".vec") s.payload = read_vector(payload_path);
    else s.payload = read_pnm(payload_path);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace rem
