#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rem/image.hpp"

namespace rem {

enum class Role { Real, NearReal, Fake };
enum class PayloadMode { Image, Vector };

std::string to_string(Role role);
Role parse_role(const std::string& text);
std::string to_string(PayloadMode mode);
PayloadMode parse_mode(const std::string& text);

using Payload = std::variant<Image, Eigen::VectorXf>;

struct Sample {
  std::string id;
  Payload payload;
  Role role = Role::Real;
  std::optional<std::string> family;
  std::uint64_t seed = 0;
  std::string chain;  // chain manifest string, empty when undegraded

  bool is_image() const { return std::holds_alternative<Image>(payload); }
  const Image& image() const { return std::get<Image>(payload); }
  const Eigen::VectorXf& vector() const { return std::get<Eigen::VectorXf>(payload); }
};

namespace worldgen {

inline const std::vector<std::string> kFamilies = {"checker", "notch", "quant"};

// Knobs of the procedural world. Defaults are the desk configuration.
struct WorldParams {
  int image_size = 32;
  int channels = 1;
  double field_cutoff = 0.045;  // Gaussian spectral envelope, cycles/pixel
  double field_std = 0.12;
  double offset_range = 0.1;
  int min_shapes = 1;
  int max_shapes = 3;
  double shape_radius_min = 3.0;
  double shape_radius_max = 8.0;
  double shape_softness = 1.0;
  double shape_blend = 0.7;
  double noise_min = 0.002;
  double noise_max = 0.006;
  // Notch family: DFT bins with radius in [notch_low, notch_high) are zeroed.
  double notch_low = 0.06;
  double notch_high = 0.16;
  int quant_levels = 16;

  // Vector mode.
  int latent_dim = 4;
  int ambient_dim = 64;
  int embed_hidden = 32;
  double vector_noise = 0.01;

  bool operator==(const WorldParams&) const = default;
};

// Seed of the frozen vector-mode embedding psi.
inline constexpr std::uint64_t kEmbeddingSeed = 0x5EEDE4BEDULL;

// psi: R^m -> R^D, fixed two-layer tanh map.
class Embedding {
 public:
  explicit Embedding(const WorldParams& params);
  Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::VectorXd>& latent) const;
  int latent_dim() const { return static_cast<int>(w1_.cols()); }
  int ambient_dim() const { return static_cast<int>(w2_.rows()); }

 private:
  Eigen::MatrixXd w1_;
  Eigen::VectorXd b1_;
  Eigen::MatrixXd w2_;
  Eigen::VectorXd b2_;
};

std::vector<Sample> gen_real(std::uint64_t seed, int n, PayloadMode mode,
                             const WorldParams& params = {});
std::vector<Sample> gen_fake(const std::string& family, std::uint64_t seed, int n,
                             PayloadMode mode, const WorldParams& params = {});

// Image-mode building blocks, exposed for tests and diagnostics.
Image real_image(std::uint64_t sample_seed, const WorldParams& params);
Image apply_family(const std::string& family, const Image& real, const WorldParams& params);
Eigen::VectorXd real_vector(std::uint64_t sample_seed, const WorldParams& params,
                            double noise_scale);

// Fraction of spectral energy (excluding DC) in the outer half of the
// radial frequency range.
double high_frequency_ratio(const Image& image);

}  // namespace worldgen

// Corpus files: manifest.tsv with (id, role, family, seed, chain, path) per
// line, '-' for empty fields; payloads are 8-bit PGM/PPM or .vec files
// (uint64 little-endian count followed by float32 little-endian values).
struct ManifestEntry {
  std::string id;
  Role role = Role::Real;
  std::optional<std::string> family;
  std::uint64_t seed = 0;
  std::string chain;
  std::string path;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
};

CorpusManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);

void write_vector(const Eigen::VectorXf& values, const std::filesystem::path& path);
Eigen::VectorXf read_vector(const std::filesystem::path& path);

// Writes payloads plus manifest.tsv under `dir`; returns the manifest path.
std::filesystem::path write_corpus(const std::vector<Sample>& samples,
                                   const std::filesystem::path& dir);
std::vector<Sample> read_corpus(const std::filesystem::path& manifest_path);

}  // namespace rem
