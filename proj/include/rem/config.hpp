#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rem/cdc.hpp"
#include "rem/envelope.hpp"
#include "rem/mbr.hpp"
#include "rem/worldgen.hpp"

namespace rem {

// Sectioned key=value configuration. Every key is listed by
// `config_keys()`; anything else is a parse error.
struct ExperimentConfig {
  // [run]
  std::uint64_t seed = 1;
  std::string out = "runs/rem";

  // [worldgen]
  PayloadMode mode = PayloadMode::Image;
  int n_real = 1024;
  worldgen::WorldParams world;

  // [mbr]; latent_dim 0 means 16 for images, 8 for vectors.
  mbr::AutoencoderConfig ae{0};
  double mask_ratio = 0.25;
  double epsilon = 0.1;
  bool resample_per_epoch = true;

  // [ee]
  int ee_hidden = 64;
  int feature_dim = 32;
  int ee_epochs = 20;
  int ee_batch = 64;
  double ee_lr = 1e-3;
  envelope::LossWeights weights;
  double variance_fraction = 0.9;
  bool refresh_basis = true;
  std::string front_end = "auto";

  // [cdc]
  bool cdc_enabled = true;
  bool augment = true;
  std::string anchor = "mbr-encoder";
  int anchor_hidden = 128;
  int anchor_dim = 16;
  cdc::DegradePolicy policy;

  // [chainsim]
  std::string profile = "mixed";
  int chain_k_min = 2;
  int chain_k_max = 4;

  // [eval]
  int n_eval = 1000;
  double threshold = 0.5;
  std::string freq_mode = "paired";
  double tau_scale = 3.0;
  std::string train_family = "checker";

  bool operator==(const ExperimentConfig&) const = default;
};

struct ConfigKey {
  std::string section;
  std::string key;
  std::string doc;
};
const std::vector<ConfigKey>& config_keys();

ExperimentConfig parse_config(const std::string& text);
std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

// Cross-field checks (ranges, known enum values).
void validate(const ExperimentConfig& config);

int resolved_latent_dim(const ExperimentConfig& config);
envelope::EnvelopeConfig envelope_config(const ExperimentConfig& config);

}  // namespace rem
