#include "rem/chainsim.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>

#include "rem/error.hpp"

namespace rem::chainsim {

namespace {

struct Range {
  double lo;
  double hi;
};

struct KindInfo {
  OpKind kind;
  const char* name;
  std::vector<std::string> keys;
  std::vector<Range> ranges;
};

const std::vector<KindInfo>& kind_table() {
  static const std::vector<KindInfo> table = {
      {OpKind::Jpeg, "jpeg", {"q"}, {{10, 100}}},
      {OpKind::Resize, "resize", {"scale"}, {{0.25, 2.0}}},
      {OpKind::Blur, "blur", {"sigma"}, {{0.3, 3.0}}},
      {OpKind::Noise, "noise", {"sigma"}, {{0.0, 16.0}}},
      {OpKind::Color, "color", {"gain", "bias"}, {{0.5, 1.5}, {-0.25, 0.25}}},
      {OpKind::CropAspect, "crop_aspect", {"h", "w"}, {{0.5, 1.0}, {0.5, 1.0}}},
      {OpKind::Sticker, "sticker", {"area", "value"}, {{0.0, 0.1}, {0.0, 1.0}}},
      {OpKind::Screenshot, "screenshot", {"scale", "q", "border"}, {{0.8, 1.2}, {70, 90}, {0, 1}}},
  };
  return table;
}

const KindInfo& info(OpKind kind) {
  for (const auto& k : kind_table())
    if (k.kind == kind) return k;
  throw Error(ErrorKind::InvalidArgument, "unknown op kind");
}

constexpr std::array<int, 64> kLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

Eigen::Matrix<double, 8, 8> dct_matrix() {
  Eigen::Matrix<double, 8, 8> c;
  for (int k = 0; k < 8; ++k)
    for (int n = 0; n < 8; ++n)
      c(k, n) = (k == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8)) *
                std::cos((2 * n + 1) * k * std::numbers::pi / 16.0);
  return c;
}

Eigen::Matrix<double, 8, 8> quant_table(double quality) {
  const double scale = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
  Eigen::Matrix<double, 8, 8> t;
  for (int i = 0; i < 64; ++i)
    t(i / 8, i % 8) = std::clamp(std::floor((kLuminanceTable[static_cast<std::size_t>(i)] * scale + 50) / 100), 1.0, 255.0);
  return t;
}

void finish(Image& image) { quantize8(image); }

int reflect(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

Image pad_border(const Image& image, float value) {
  Image out(image.height() + 2, image.width() + 2, image.channels(), value);
  for (int c = 0; c < image.channels(); ++c)
    out.planes[c].block(1, 1, image.height(), image.width()) = image.planes[c];
  return out;
}

double draw_int(SeededRng& rng, double lo, double hi) {
  return static_cast<double>(rng.uniform_int(static_cast<long>(lo), static_cast<long>(hi)));
}

ChainOp make(OpKind kind, std::map<std::string, double> params, SeededRng& rng) {
  return ChainOp{kind, std::move(params), rng.next_u64()};
}

void push_propagation(std::vector<ChainOp>& ops, int slots, bool mobile, SeededRng& rng,
                      const ChainPresets& p) {
  if (mobile && slots >= 2) {
    ops.push_back(make(OpKind::Resize, {{"scale", rng.uniform(p.mobile_scale_min, p.mobile_scale_max)}}, rng));
    ops.push_back(make(OpKind::Jpeg, {{"q", draw_int(rng, p.mobile_q_min, p.mobile_q_max)}}, rng));
  } else if (mobile) {
    ops.push_back(make(OpKind::Jpeg, {{"q", draw_int(rng, p.mobile_q_min, p.mobile_q_max)}}, rng));
  } else {
    ops.push_back(make(OpKind::Jpeg, {{"q", draw_int(rng, p.pc_q_min, p.pc_q_max)}}, rng));
  }
}

void push_postprocess(std::vector<ChainOp>& ops, std::uint64_t which, SeededRng& rng,
                      const ChainPresets& p) {
  switch (which) {
    case 0: {
      const auto filter = rng.below(3);
      if (filter == 0)
        ops.push_back(make(OpKind::Color,
                           {{"gain", rng.uniform(p.gain_min, p.gain_max)},
                            {"bias", rng.uniform(p.bias_min, p.bias_max)}},
                           rng));
      else if (filter == 1)
        ops.push_back(make(OpKind::Blur, {{"sigma", rng.uniform(p.blur_min, p.blur_max)}}, rng));
      else
        ops.push_back(make(OpKind::Noise, {{"sigma", rng.uniform(p.noise_min, p.noise_max)}}, rng));
      break;
    }
    case 1:
      ops.push_back(make(OpKind::Sticker,
                         {{"area", rng.uniform(p.sticker_area_min, p.sticker_area_max)},
                          {"value", rng.uniform()}},
                         rng));
      break;
    case 2:
      ops.push_back(make(OpKind::CropAspect,
                         {{"h", rng.uniform(p.crop_min, p.crop_max)}, {"w", rng.uniform(p.crop_min, p.crop_max)}},
                         rng));
      break;
    default:
      ops.push_back(make(OpKind::Screenshot,
                         {{"scale", rng.uniform(p.shot_scale_min, p.shot_scale_max)},
                          {"q", draw_int(rng, p.shot_q_min, p.shot_q_max)},
                          {"border", static_cast<double>(rng.below(2))}},
                         rng));
      break;
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  DegradationChain parse() {
    DegradationChain chain;
    if (s_.empty()) return chain;
    while (true) {
      chain.ops.push_back(parse_op());
      if (pos_ == s_.size()) break;
      expect('|');
    }
    return chain;
  }

 private:
  [[noreturn]] void fail(const std::string& expected) const {
    throw Error(ErrorKind::Parse, "chain manifest: expected " + expected + " at byte " + std::to_string(pos_));
  }

  void expect(char c) {
    if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("'") + c + "'");
    ++pos_;
  }

  std::string ident() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    if (pos_ == start) fail("identifier");
    return s_.substr(start, pos_ - start);
  }

  std::string_view value_text() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ')' && s_[pos_] != '|') ++pos_;
    if (pos_ == start) fail("value");
    return std::string_view(s_).substr(start, pos_ - start);
  }

  ChainOp parse_op() {
    std::size_t kind_at = pos_;
    std::string name = ident();
    expect('(');
    if (name == "op") {
      kind_at = pos_;
      name = ident();
      expect(',');
    }
    OpKind kind;
    try {
      kind = parse_kind(name);
    } catch (const Error&) {
      pos_ = kind_at;
      fail("op kind");
    }
    ChainOp op;
    op.kind = kind;
    bool have_seed = false;
    const auto& keys = param_keys(kind);
    while (true) {
      const std::size_t key_at = pos_;
      const std::string key = ident();
      expect('=');
      const std::size_t value_at = pos_;
      const std::string_view text = value_text();
      if (key == "seed") {
        if (have_seed) {
          pos_ = key_at;
          fail("no duplicate key 'seed'");
        }
        const auto res = std::from_chars(text.data(), text.data() + text.size(), op.seed);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
          pos_ = value_at;
          fail("unsigned integer seed");
        }
        have_seed = true;
      } else {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
          pos_ = key_at;
          fail("a key of " + name);
        }
        if (op.params.count(key)) {
          pos_ = key_at;
          fail("no duplicate key '" + key + "'");
        }
        double v = 0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
          pos_ = value_at;
          fail("number");
        }
        op.params[key] = v;
      }
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      expect(')');
      break;
    }
    for (const auto& key : keys)
      if (!op.params.count(key)) fail("key '" + key + "' for " + name);
    if (!have_seed) fail("key 'seed'");
    return op;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(OpKind kind) { return info(kind).name; }

OpKind parse_kind(const std::string& text) {
  for (const auto& k : kind_table())
    if (text == k.name) return k.kind;
  throw Error(ErrorKind::InvalidArgument, "unknown op kind '" + text + "'");
}

const std::vector<OpKind>& all_kinds() {
  static const std::vector<OpKind> kinds = {OpKind::Jpeg,  OpKind::Resize,     OpKind::Blur,
                                            OpKind::Noise, OpKind::Color,      OpKind::CropAspect,
                                            OpKind::Sticker, OpKind::Screenshot};
  return kinds;
}

const std::vector<std::string>& param_keys(OpKind kind) { return info(kind).keys; }

double ChainOp::at(const std::string& key) const {
  const auto it = params.find(key);
  require(it != params.end(), ErrorKind::InvalidArgument,
          to_string(kind) + ": missing parameter '" + key + "'");
  return it->second;
}

std::string to_string(Profile profile) {
  switch (profile) {
    case Profile::Propagation: return "propagation";
    case Profile::Postprocess: return "postprocess";
    case Profile::Mixed: return "mixed";
  }
  return "mixed";
}

Profile parse_profile(const std::string& text) {
  if (text == "propagation") return Profile::Propagation;
  if (text == "postprocess") return Profile::Postprocess;
  if (text == "mixed") return Profile::Mixed;
  throw Error(ErrorKind::InvalidArgument,
              "unknown profile '" + text + "' (valid: propagation, postprocess, mixed)");
}

DegradationChain build_chain(SeededRng& rng, Profile profile, int k_min, int k_max,
                             const ChainPresets& presets) {
  require(0 <= k_min && k_min <= k_max && k_max <= 8, ErrorKind::InvalidArgument,
          "build_chain: k range must satisfy 0 <= k_min <= k_max <= 8");
  const int k = static_cast<int>(rng.uniform_int(k_min, k_max));
  DegradationChain chain;
  while (chain.k() < k) {
    const int slots = k - chain.k();
    switch (profile) {
      case Profile::Propagation:
        push_propagation(chain.ops, slots, rng.below(2) == 1, rng, presets);
        break;
      case Profile::Postprocess:
        push_postprocess(chain.ops, rng.below(4), rng, presets);
        break;
      case Profile::Mixed: {
        const auto which = rng.below(6);
        if (which < 2) {
          // Two propagation variants, each as likely as a postprocess kind.
          push_propagation(chain.ops, slots, which == 1, rng, presets);
        } else {
          push_postprocess(chain.ops, which - 2, rng, presets);
        }
        break;
      }
    }
  }
  return chain;
}

void validate(const ChainOp& op) {
  const auto& k = info(op.kind);
  require(op.params.size() == k.keys.size(), ErrorKind::InvalidArgument,
          std::string(k.name) + ": expected " + std::to_string(k.keys.size()) + " parameters");
  for (std::size_t i = 0; i < k.keys.size(); ++i) {
    const double v = op.at(k.keys[i]);
    require(std::isfinite(v) && v >= k.ranges[i].lo && v <= k.ranges[i].hi, ErrorKind::InvalidArgument,
            std::string(k.name) + ": " + k.keys[i] + "=" + format_double(v) + " outside [" +
                format_double(k.ranges[i].lo) + ", " + format_double(k.ranges[i].hi) + "]");
  }
  if (op.kind == OpKind::Sticker)
    require(op.at("area") > 0, ErrorKind::InvalidArgument, "sticker: area must be positive");
  if (op.kind == OpKind::Screenshot) {
    const double b = op.at("border");
    require(b == 0 || b == 1, ErrorKind::InvalidArgument, "screenshot: border must be 0 or 1");
  }
}

Image jpeg_roundtrip(const Image& image, double quality) {
  require(quality >= 1 && quality <= 100, ErrorKind::InvalidArgument, "jpeg: quality outside [1, 100]");
  static const Eigen::Matrix<double, 8, 8> c = dct_matrix();
  const Eigen::Matrix<double, 8, 8> t = quant_table(quality);
  const int h = image.height();
  const int w = image.width();
  const int hp = (h + 7) / 8 * 8;
  const int wp = (w + 7) / 8 * 8;
  Image out(h, w, image.channels());
  Eigen::MatrixXd padded(hp, wp);
  for (int ch = 0; ch < image.channels(); ++ch) {
    const auto& plane = image.planes[ch];
    for (int y = 0; y < hp; ++y)
      for (int x = 0; x < wp; ++x) {
        const float v = std::clamp(plane(std::min(y, h - 1), std::min(x, w - 1)), 0.0f, 1.0f);
        padded(y, x) = std::round(v * 255.0) - 128.0;
      }
    for (int by = 0; by < hp; by += 8)
      for (int bx = 0; bx < wp; bx += 8) {
        const Eigen::Matrix<double, 8, 8> block = padded.block<8, 8>(by, bx);
        Eigen::Matrix<double, 8, 8> coef = c * block * c.transpose();
        coef = (coef.array() / t.array()).round() * t.array();
        padded.block<8, 8>(by, bx) = c.transpose() * coef * c;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.planes[ch](y, x) =
            static_cast<float>(std::clamp(std::round(padded(y, x) + 128.0), 0.0, 255.0) / 255.0);
  }
  return out;
}

Image gaussian_blur(const Image& image, double sigma) {
  require(sigma >= 0, ErrorKind::InvalidArgument, "blur: negative sigma");
  if (sigma == 0) return image;
  const int radius = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (auto& k : kernel) k /= sum;
  const int h = image.height();
  const int w = image.width();
  Image out(h, w, image.channels());
  Eigen::MatrixXd tmp(h, w);
  for (int ch = 0; ch < image.channels(); ++ch) {
    const auto& p = image.planes[ch];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] * p(y, reflect(x + i, w));
        tmp(y, x) = acc;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] * tmp(reflect(y + i, h), x);
        out.planes[ch](y, x) = static_cast<float>(acc);
      }
  }
  finish(out);
  return out;
}

Image add_noise(const Image& image, double sigma, std::uint64_t seed) {
  Image out = image;
  if (sigma > 0) {
    SeededRng rng(seed, 0x4E015E);
    for (auto& plane : out.planes)
      for (Eigen::Index j = 0; j < plane.cols(); ++j)
        for (Eigen::Index i = 0; i < plane.rows(); ++i)
          plane(i, j) += static_cast<float>(sigma * rng.gaussian());
  }
  finish(out);
  return out;
}

Image color_adjust(const Image& image, double gain, double bias) {
  Image out = image;
  for (auto& plane : out.planes)
    plane = ((plane.cast<double>() - 0.5) * gain + 0.5 + bias).cast<float>();
  finish(out);
  return out;
}

Image resize_scale(const Image& image, double scale) {
  require(scale > 0, ErrorKind::InvalidArgument, "resize: scale must be positive");
  const int h = std::max(1, static_cast<int>(std::lround(image.height() * scale)));
  const int w = std::max(1, static_cast<int>(std::lround(image.width() * scale)));
  Image out = resize_bilinear(image, h, w);
  finish(out);
  return out;
}

Image op_apply(const ChainOp& op, const Image& image) {
  validate(op);
  require(image.height() >= 1 && image.width() >= 1, ErrorKind::InvalidArgument,
          to_string(op.kind) + ": empty image");
  switch (op.kind) {
    case OpKind::Jpeg:
      return jpeg_roundtrip(image, op.at("q"));
    case OpKind::Resize:
      return resize_scale(image, op.at("scale"));
    case OpKind::Blur:
      return gaussian_blur(image, op.at("sigma"));
    case OpKind::Noise:
      return add_noise(image, op.at("sigma") / 255.0, op.seed);
    case OpKind::Color:
      return color_adjust(image, op.at("gain"), op.at("bias"));
    case OpKind::CropAspect: {
      SeededRng rng(op.seed);
      const int ch = std::clamp(static_cast<int>(std::lround(op.at("h") * image.height())), 1, image.height());
      const int cw = std::clamp(static_cast<int>(std::lround(op.at("w") * image.width())), 1, image.width());
      const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(image.height() - ch + 1)));
      const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(image.width() - cw + 1)));
      Image out(ch, cw, image.channels());
      for (int c = 0; c < image.channels(); ++c) out.planes[c] = image.planes[c].block(y0, x0, ch, cw);
      finish(out);
      return out;
    }
    case OpKind::Sticker: {
      SeededRng rng(op.seed);
      const double side = std::sqrt(op.at("area"));
      const int sh = std::clamp(static_cast<int>(std::floor(side * image.height())), 1, image.height());
      const int sw = std::clamp(static_cast<int>(std::floor(side * image.width())), 1, image.width());
      const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(image.height() - sh + 1)));
      const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(image.width() - sw + 1)));
      const float value = static_cast<float>(std::round(op.at("value") * 255.0) / 255.0);
      Image out = image;
      for (auto& plane : out.planes) plane.block(y0, x0, sh, sw) = value;
      return out;
    }
    case OpKind::Screenshot: {
      Image out = jpeg_roundtrip(resize_scale(image, op.at("scale")), op.at("q"));
      if (op.at("border") == 1) out = pad_border(out, 0.0f);
      return out;
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown op kind");
}

Image apply_chain(const DegradationChain& chain, const Image& image) {
  Image current = image;
  for (std::size_t i = 0; i < chain.ops.size(); ++i) {
    try {
      current = op_apply(chain.ops[i], current);
    } catch (const Error& e) {
      throw Error(e.kind(), "chain op " + std::to_string(i) + " (" + to_string(chain.ops[i].kind) +
                                "): " + e.what());
    }
  }
  return current;
}

std::string chain_to_manifest(const DegradationChain& chain) {
  std::string out;
  for (std::size_t i = 0; i < chain.ops.size(); ++i) {
    const auto& op = chain.ops[i];
    if (i) out += '|';
    out += "op(" + to_string(op.kind);
    for (const auto& key : param_keys(op.kind)) out += "," + key + "=" + format_double(op.at(key));
    out += ",seed=" + std::to_string(op.seed) + ")";
  }
  return out;
}

DegradationChain manifest_to_chain(const std::string& text) { return Parser(text).parse(); }

double psnr(const Image& a, const Image& b) {
  require(a.height() == b.height() && a.width() == b.width() && a.channels() == b.channels(),
          ErrorKind::DimensionMismatch, "psnr: image shapes differ");
  double se = 0;
  for (int c = 0; c < a.channels(); ++c)
    se += (a.planes[c].cast<double>() - b.planes[c].cast<double>()).square().sum();
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace rem::chainsim
