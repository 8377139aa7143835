#include "rem/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "rem/chainsim.hpp"
#include "rem/error.hpp"
#include "rem/evalkit.hpp"

namespace rem {

namespace {

using Getter = std::function<std::string(const ExperimentConfig&)>;
using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

struct Field {
  ConfigKey key;
  Getter get;
  Setter set;
};

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& text) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw Error(ErrorKind::Parse, "not a number: '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw Error(ErrorKind::Parse, "expected true or false, got '" + text + "'");
}

template <typename T>
Field num(const char* section, const char* key, const char* doc, T ExperimentConfig::*member) {
  return {{section, key, doc},
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
            else return std::to_string(c.*member);
          },
          [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_number<T>(v); }};
}

template <typename T>
Field num_in(const char* section, const char* key, const char* doc, std::function<T&(ExperimentConfig&)> ref) {
  return {{section, key, doc},
          [ref](const ExperimentConfig& c) {
            T& v = ref(const_cast<ExperimentConfig&>(c));
            if constexpr (std::is_floating_point_v<T>) return fmt(v);
            else return std::to_string(v);
          },
          [ref](ExperimentConfig& c, const std::string& v) { ref(c) = parse_number<T>(v); }};
}

Field flag(const char* section, const char* key, const char* doc, bool ExperimentConfig::*member) {
  return {{section, key, doc},
          [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); },
          [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_bool(v); }};
}

Field text(const char* section, const char* key, const char* doc, std::string ExperimentConfig::*member) {
  return {{section, key, doc}, [member](const ExperimentConfig& c) { return c.*member; },
          [member](ExperimentConfig& c, const std::string& v) { c.*member = v; }};
}


const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      num<std::uint64_t>("run", "seed", "master seed", &ExperimentConfig::seed),
      text("run", "out", "output directory", &ExperimentConfig::out),

      {{"worldgen", "mode", "image or vector"},
       [](const ExperimentConfig& c) { return to_string(c.mode); },
       [](ExperimentConfig& c, const std::string& v) { c.mode = parse_mode(v); }},
      num("worldgen", "n_real", "training reals", &ExperimentConfig::n_real),
      num_in<int>("worldgen", "image_size", "image side in pixels", [](ExperimentConfig& c) -> auto& { return c.world.image_size; }),
      num_in<double>("worldgen", "field_cutoff", "Gaussian spectral envelope of the smooth field, cycles/pixel", [](ExperimentConfig& c) -> auto& { return c.world.field_cutoff; }),
      num_in<double>("worldgen", "field_std", "std of the smooth field", [](ExperimentConfig& c) -> auto& { return c.world.field_std; }),
      num_in<double>("worldgen", "noise_min", "lower bound of per-image sensor noise std", [](ExperimentConfig& c) -> auto& { return c.world.noise_min; }),
      num_in<double>("worldgen", "noise_max", "upper bound of per-image sensor noise std", [](ExperimentConfig& c) -> auto& { return c.world.noise_max; }),
      num_in<double>("worldgen", "notch_low", "notch family: inner radius, cycles/pixel", [](ExperimentConfig& c) -> auto& { return c.world.notch_low; }),
      num_in<double>("worldgen", "notch_high", "notch family: outer radius, cycles/pixel", [](ExperimentConfig& c) -> auto& { return c.world.notch_high; }),
      num_in<int>("worldgen", "quant_levels", "quant family: gray levels", [](ExperimentConfig& c) -> auto& { return c.world.quant_levels; }),
      num_in<int>("worldgen", "latent_dim", "vector mode: latent dim m", [](ExperimentConfig& c) -> auto& { return c.world.latent_dim; }),
      num_in<int>("worldgen", "ambient_dim", "vector mode: ambient dim D", [](ExperimentConfig& c) -> auto& { return c.world.ambient_dim; }),
      num_in<double>("worldgen", "vector_noise", "vector mode: additive noise std", [](ExperimentConfig& c) -> auto& { return c.world.vector_noise; }),

      num_in<int>("mbr", "latent_dim", "autoencoder latent dim; 0 = 16 (image) or 8 (vector)", [](ExperimentConfig& c) -> auto& { return c.ae.latent_dim; }),
      num_in<int>("mbr", "hidden", "autoencoder hidden width", [](ExperimentConfig& c) -> auto& { return c.ae.hidden; }),
      num_in<int>("mbr", "epochs", "autoencoder epochs", [](ExperimentConfig& c) -> auto& { return c.ae.epochs; }),
      num_in<int>("mbr", "batch", "autoencoder batch size", [](ExperimentConfig& c) -> auto& { return c.ae.batch; }),
      num_in<double>("mbr", "lr", "autoencoder Adam step", [](ExperimentConfig& c) -> auto& { return c.ae.lr; }),
      num("mbr", "mask_ratio", "fraction of latent dims perturbed", &ExperimentConfig::mask_ratio),
      num("mbr", "epsilon", "latent noise std in units of per-dim latent std", &ExperimentConfig::epsilon),
      flag("mbr", "resample_per_epoch", "draw fresh near-reals every epoch", &ExperimentConfig::resample_per_epoch),

      num("ee", "hidden", "learner hidden width", &ExperimentConfig::ee_hidden),
      num("ee", "feature_dim", "learner feature dim D_h", &ExperimentConfig::feature_dim),
      num("ee", "epochs", "envelope epochs", &ExperimentConfig::ee_epochs),
      num("ee", "batch", "pairs per batch", &ExperimentConfig::ee_batch),
      num("ee", "lr", "Adam step", &ExperimentConfig::ee_lr),
      num_in<double>("ee", "lambda_tan", "tangency weight", [](ExperimentConfig& c) -> auto& { return c.weights.tan; }),
      num_in<double>("ee", "lambda_anc", "anchor weight", [](ExperimentConfig& c) -> auto& { return c.weights.anc; }),
      num_in<double>("ee", "lambda_res", "residual weight", [](ExperimentConfig& c) -> auto& { return c.weights.res; }),
      num("ee", "variance_fraction", "explained variance that sets p", &ExperimentConfig::variance_fraction),
      flag("ee", "refresh_basis", "refit the tangent basis every epoch", &ExperimentConfig::refresh_basis),
      text("ee", "front_end", "auto, spectral or identity", &ExperimentConfig::front_end),

      flag("cdc", "enabled", "anchor and residual terms", &ExperimentConfig::cdc_enabled),
      flag("cdc", "augment", "discriminator also sees degraded views", &ExperimentConfig::augment),
      text("cdc", "anchor", "mbr-encoder or fixed-seed", &ExperimentConfig::anchor),
      num("cdc", "anchor_hidden", "fixed-seed anchor hidden width", &ExperimentConfig::anchor_hidden),
      num("cdc", "anchor_dim", "fixed-seed anchor output dim", &ExperimentConfig::anchor_dim),
      num_in<double>("cdc", "jpeg_q_min", "training jpeg quality lower bound", [](ExperimentConfig& c) -> auto& { return c.policy.jpeg_q_min; }),
      num_in<double>("cdc", "jpeg_q_max", "training jpeg quality upper bound", [](ExperimentConfig& c) -> auto& { return c.policy.jpeg_q_max; }),
      num_in<double>("cdc", "scale_min", "training resize lower bound", [](ExperimentConfig& c) -> auto& { return c.policy.scale_min; }),
      num_in<double>("cdc", "scale_max", "training resize upper bound", [](ExperimentConfig& c) -> auto& { return c.policy.scale_max; }),
      num_in<double>("cdc", "blur_min", "training blur sigma lower bound, px", [](ExperimentConfig& c) -> auto& { return c.policy.blur_min; }),
      num_in<double>("cdc", "blur_max", "training blur sigma upper bound, px", [](ExperimentConfig& c) -> auto& { return c.policy.blur_max; }),
      num_in<double>("cdc", "noise_min", "training noise std lower bound, 8-bit levels", [](ExperimentConfig& c) -> auto& { return c.policy.noise_min; }),
      num_in<double>("cdc", "noise_max", "training noise std upper bound, 8-bit levels", [](ExperimentConfig& c) -> auto& { return c.policy.noise_max; }),
      num_in<double>("cdc", "gain_min", "training color gain lower bound", [](ExperimentConfig& c) -> auto& { return c.policy.gain_min; }),
      num_in<double>("cdc", "gain_max", "training color gain upper bound", [](ExperimentConfig& c) -> auto& { return c.policy.gain_max; }),
      num_in<int>("cdc", "k_min", "fewest ops per training draw", [](ExperimentConfig& c) -> auto& { return c.policy.k_min; }),
      num_in<int>("cdc", "k_max", "most ops per training draw", [](ExperimentConfig& c) -> auto& { return c.policy.k_max; }),
      num_in<double>("cdc", "vector_noise", "vector mode: additive noise std", [](ExperimentConfig& c) -> auto& { return c.policy.vector_noise; }),
      num_in<double>("cdc", "dropout", "vector mode: coordinate dropout probability", [](ExperimentConfig& c) -> auto& { return c.policy.dropout; }),

      text("chainsim", "profile", "propagation, postprocess or mixed", &ExperimentConfig::profile),
      num("chainsim", "k_min", "shortest evaluation chain", &ExperimentConfig::chain_k_min),
      num("chainsim", "k_max", "longest evaluation chain", &ExperimentConfig::chain_k_max),

      num("eval", "n_eval", "evaluation samples per class and family", &ExperimentConfig::n_eval),
      num("eval", "threshold", "score threshold for calling a sample real", &ExperimentConfig::threshold),
      text("eval", "freq_mode", "paired or mean_spectrum", &ExperimentConfig::freq_mode),
      num("eval", "tau_scale", "open-set threshold in median within-family distances", &ExperimentConfig::tau_scale),
      text("eval", "train_family", "fake family seen by the baseline", &ExperimentConfig::train_family),
  };
  return table;
}


std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

ExperimentConfig parse_config(const std::string& text_in) {
  ExperimentConfig config;
  std::map<std::string, const Field*> index;
  for (const auto& f : fields()) index[f.key.section + "." + f.key.key] = &f;
  std::set<std::string> seen;
  std::istringstream in(text_in);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      require(line.back() == ']', ErrorKind::Parse, where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      static const std::set<std::string> sections = {"run", "worldgen", "mbr", "ee", "cdc", "chainsim", "eval"};
      require(sections.count(section) > 0, ErrorKind::Parse, where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Parse, where + "expected key = value");
    require(!section.empty(), ErrorKind::Parse, where + "key outside of a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    const auto it = index.find(full);
    require(it != index.end(), ErrorKind::Parse, where + "unknown key '" + full + "'");
    require(seen.insert(full).second, ErrorKind::Parse, where + "duplicate key '" + full + "'");
    try {
      it->second->set(config, value);
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, where + full + ": " + e.what());
    }
  }
  validate(config);
  return config;
}

std::string serialize_config(const ExperimentConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.key.section != section) {
      if (!section.empty()) out << '\n';
      section = f.key.section;
      out << '[' << section << "]\n";
    }
    out << f.key.key << " = " << f.get(config) << '\n';
  }
  return out.str();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::MissingFile, "missing file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << serialize_config(config);
}

void validate(const ExperimentConfig& c) {
  auto check = [](bool ok, const std::string& msg) { require(ok, ErrorKind::Parse, "config: " + msg); };
  check(c.n_real >= 32, "worldgen.n_real must be >= 32");
  check(c.world.image_size >= 8, "worldgen.image_size must be >= 8");
  check(c.world.noise_min >= 0 && c.world.noise_min <= c.world.noise_max, "worldgen noise range");
  check(c.world.notch_low >= 0 && c.world.notch_low < c.world.notch_high, "worldgen notch range");
  check(c.world.quant_levels >= 2, "worldgen.quant_levels must be >= 2");
  check(c.world.latent_dim >= 1 && c.world.ambient_dim > c.world.latent_dim, "worldgen vector dims");
  check(c.ae.latent_dim >= 0 && c.ae.hidden >= 1 && c.ae.epochs >= 1 && c.ae.batch >= 1 && c.ae.lr > 0,
        "mbr dims, epochs, batch and lr");
  check(c.mask_ratio > 0 && c.mask_ratio <= 1, "mbr.mask_ratio must be in (0, 1]");
  check(c.epsilon >= 0, "mbr.epsilon must be >= 0");
  check(c.ee_hidden >= 1 && c.feature_dim >= 2 && c.ee_epochs >= 1 && c.ee_batch >= 1 && c.ee_lr > 0,
        "ee dims, epochs, batch and lr");
  check(c.weights.tan >= 0 && c.weights.anc >= 0 && c.weights.res >= 0, "ee lambdas must be >= 0");
  check(c.variance_fraction > 0 && c.variance_fraction <= 1, "ee.variance_fraction must be in (0, 1]");
  check(c.front_end == "auto" || c.front_end == "spectral" || c.front_end == "identity",
        "ee.front_end must be auto, spectral or identity");
  check(c.anchor == "mbr-encoder" || c.anchor == "fixed-seed", "cdc.anchor must be mbr-encoder or fixed-seed");
  check(c.anchor_hidden >= 1 && c.anchor_dim >= 1, "cdc anchor dims");
  try {
    cdc::validate(c.policy);
    chainsim::parse_profile(c.profile);
    evalkit::parse_freq_mode(c.freq_mode);
  } catch (const Error& e) {
    throw Error(ErrorKind::Parse, std::string("config: ") + e.what());
  }
  check(0 <= c.chain_k_min && c.chain_k_min <= c.chain_k_max && c.chain_k_max <= 8, "chainsim k range");
  check(c.n_eval >= 1, "eval.n_eval must be >= 1");
  check(c.tau_scale > 0, "eval.tau_scale must be positive");
  check(std::find(worldgen::kFamilies.begin(), worldgen::kFamilies.end(), c.train_family) != worldgen::kFamilies.end(),
        "eval.train_family must be a known family");
}

int resolved_latent_dim(const ExperimentConfig& config) {
  if (config.ae.latent_dim > 0) return config.ae.latent_dim;
  return config.mode == PayloadMode::Image ? 16 : 8;
}

envelope::EnvelopeConfig envelope_config(const ExperimentConfig& c) {
  envelope::EnvelopeConfig e;
  e.hidden = c.ee_hidden;
  e.feature_dim = c.feature_dim;
  e.epochs = c.ee_epochs;
  e.batch = c.ee_batch;
  e.lr = c.ee_lr;
  e.weights = c.weights;
  e.variance_fraction = c.variance_fraction;
  e.refresh_basis = c.refresh_basis;
  e.cdc = c.cdc_enabled;
  e.augment = c.augment;
  e.policy = c.policy;
  e.policy.seed = mix_seed(c.seed, hash_string("cdc.policy"));
  if (c.front_end != "auto") e.front = envelope::parse_front_end(c.front_end);
  return e;
}

}  // namespace rem
