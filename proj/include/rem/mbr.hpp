#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "rem/layout.hpp"
#include "rem/nn.hpp"
#include "rem/rng.hpp"
#include "rem/worldgen.hpp"

namespace rem::mbr {

struct TrainingMeta {
  int epochs = 0;
  std::vector<double> epoch_loss;  // mean squared reconstruction error per epoch
  double final_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

// Plain deterministic autoencoder: input -> hidden (tanh) -> d_z -> hidden
// (tanh) -> input, trained on mean squared error.
struct Autoencoder {
  InputLayout layout;
  TwoLayerNet<double> encoder;  // linear latent output
  TwoLayerNet<double> decoder;  // linear reconstruction output
  Eigen::VectorXd latent_std;   // per-dimension std of z over the training reals
  std::optional<TrainingMeta> meta;

  int latent_dim() const { return encoder.output_dim(); }
  int input_dim() const { return encoder.input_dim(); }

  Eigen::MatrixXd encode(const Eigen::Ref<const Eigen::MatrixXd>& x) const { return predict(encoder, x); }
  Eigen::MatrixXd decode(const Eigen::Ref<const Eigen::MatrixXd>& z) const { return predict(decoder, z); }
};

struct AutoencoderConfig {
  int latent_dim = 16;
  int hidden = 128;
  int epochs = 150;
  int batch = 64;
  double lr = 2e-3;

  bool operator==(const AutoencoderConfig&) const = default;
};

// Mini-batch Adam on reconstruction MSE. Requires >= 32 reals and
// latent_dim < input dim; throws Divergence naming the epoch on a
// non-finite loss.
Autoencoder train_autoencoder(const std::vector<Sample>& reals, const AutoencoderConfig& config,
                              SeededRng& rng);

// Mask ratio rho and noise scale epsilon (units of per-dimension latent std).
struct PerturbSpec {
  double mask_ratio = 0.25;
  double epsilon = 0.1;
  std::uint64_t seed = 0;
};

void validate(const PerturbSpec& spec);

// Mask with max(1, round(rho * d_z)) ones at uniformly random positions,
// and delta ~ N(0, epsilon^2 I).
std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_mask_and_noise(int latent_dim,
                                                                   const PerturbSpec& spec,
                                                                   SeededRng& rng);

// z + M .* delta.
Eigen::VectorXd perturb_latent(const Eigen::Ref<const Eigen::VectorXd>& z,
                               const Eigen::Ref<const Eigen::VectorXd>& mask,
                               const Eigen::Ref<const Eigen::VectorXd>& delta);

// x_f = D(E(x_r) + M .* (latent_std .* delta)) for every real, with a fresh
// (M, delta) per sample drawn from rng.split(index). Outputs are tagged
// near_real; image payloads are clamped to [0, 1] and stored on the 8-bit grid.
std::vector<Sample> generate_near_real(const Autoencoder& ae, const std::vector<Sample>& reals,
                                       const PerturbSpec& spec, const SeededRng& rng);

// Plain reconstructions D(E(x)), tagged near_real.
std::vector<Sample> reconstruct(const Autoencoder& ae, const std::vector<Sample>& reals);

// "REMAE1" checkpoint. After the magic: uint32 LE input_dim, d_z, hidden,
// mode (0 image, 1 vector), height, width, channels, epochs; then float32 LE
// blocks encoder.w1 (hidden x input, row-major), encoder.b1, encoder.w2
// (d_z x hidden), encoder.b2, decoder.w1 (hidden x d_z), decoder.b1,
// decoder.w2 (input x hidden), decoder.b2, latent_std, per-epoch losses.
void save_autoencoder(const Autoencoder& ae, const std::filesystem::path& path);
Autoencoder load_autoencoder(const std::filesystem::path& path);

}  // namespace rem::mbr
