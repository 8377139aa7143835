#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rem/image.hpp"
#include "rem/rng.hpp"

namespace rem::chainsim {

enum class OpKind { Jpeg, Resize, Blur, Noise, Color, CropAspect, Sticker, Screenshot };

std::string to_string(OpKind kind);
OpKind parse_kind(const std::string& text);
const std::vector<OpKind>& all_kinds();

// Parameter keys per kind, in manifest order, with accepted ranges:
//   jpeg        q in [10, 100]
//   resize      scale in [0.25, 2]
//   blur        sigma in [0.3, 3] px
//   noise       sigma in [0, 16], 8-bit levels
//   color       gain in [0.5, 1.5], bias in [-0.25, 0.25]
//   crop_aspect h, w in [0.5, 1], kept fraction per axis
//   sticker     area in (0, 0.1], value in [0, 1]
//   screenshot  scale in [0.8, 1.2], q in [70, 90], border in {0, 1}
const std::vector<std::string>& param_keys(OpKind kind);

struct ChainOp {
  OpKind kind = OpKind::Jpeg;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;

  double at(const std::string& key) const;
  bool operator==(const ChainOp&) const = default;
};

struct DegradationChain {
  std::vector<ChainOp> ops;

  int k() const { return static_cast<int>(ops.size()); }
  bool operator==(const DegradationChain&) const = default;
};

enum class Profile { Propagation, Postprocess, Mixed };

std::string to_string(Profile profile);
Profile parse_profile(const std::string& text);

// Draw presets. Propagation variants are emulated as (resize, jpeg) presets.
struct ChainPresets {
  double pc_q_min = 70, pc_q_max = 85;
  double mobile_scale_min = 0.6, mobile_scale_max = 0.8;
  double mobile_q_min = 50, mobile_q_max = 75;
  double gain_min = 0.8, gain_max = 1.2;
  double bias_min = -0.05, bias_max = 0.05;
  double blur_min = 0.5, blur_max = 1.0;
  double noise_min = 1.0, noise_max = 4.0;
  double sticker_area_min = 0.01, sticker_area_max = 0.1;
  double crop_min = 0.8, crop_max = 1.0;
  double shot_scale_min = 0.8, shot_scale_max = 1.2;
  double shot_q_min = 70, shot_q_max = 90;
};

// k ~ U{k_min..k_max}; k counts operators. A mobile round trip contributes
// two operators (resize, jpeg) and degrades to a lone jpeg when only one slot
// is left.
DegradationChain build_chain(SeededRng& rng, Profile profile, int k_min, int k_max,
                             const ChainPresets& presets = {});

void validate(const ChainOp& op);
Image op_apply(const ChainOp& op, const Image& image);
// Ops applied in list order; errors name the failing op index.
Image apply_chain(const DegradationChain& chain, const Image& image);

// Grammar: op(kind,key=value,...,seed=N)|op(...). The "op" prefix may be
// omitted. Doubles use the shortest round-trip form.
std::string chain_to_manifest(const DegradationChain& chain);
DegradationChain manifest_to_chain(const std::string& text);

// Building blocks. All outputs are clamped to [0, 1] and put on the 8-bit grid.
// Baseline JPEG round trip per channel: 8x8 DCT, IJG-scaled standard
// luminance table, edge padding to a multiple of 8.
Image jpeg_roundtrip(const Image& image, double quality);
Image gaussian_blur(const Image& image, double sigma);
Image add_noise(const Image& image, double sigma, std::uint64_t seed);
Image color_adjust(const Image& image, double gain, double bias);
Image resize_scale(const Image& image, double scale);

double psnr(const Image& a, const Image& b);

}  // namespace rem::chainsim
