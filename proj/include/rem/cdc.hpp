#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "rem/layout.hpp"
#include "rem/mbr.hpp"
#include "rem/nn.hpp"
#include "rem/worldgen.hpp"

namespace rem::cdc {

// Frozen anchor f. Parameters are fixed at construction; there is no
// mutable access.
class AnchorEncoder {
 public:
  // Copies the trained MBR encoder.
  static AnchorEncoder from_autoencoder(const mbr::Autoencoder& ae);
  // Random tanh network from a named seed.
  static AnchorEncoder fixed_seed(const InputLayout& layout, int hidden, int dim, std::uint64_t seed);
  static AnchorEncoder from_net(const InputLayout& layout, TwoLayerNet<double> net, std::string source);

  const InputLayout& layout() const { return layout_; }
  const TwoLayerNet<double>& net() const { return net_; }
  const std::string& source() const { return source_; }
  int input_dim() const { return net_.input_dim(); }
  int dim() const { return net_.output_dim(); }

  // SHA-256 (hex) over the float32 little-endian parameter bytes.
  std::string fingerprint() const;

 private:
  AnchorEncoder(InputLayout layout, TwoLayerNet<double> net, std::string source)
      : layout_(layout), net_(std::move(net)), source_(std::move(source)) {}

  InputLayout layout_;
  TwoLayerNet<double> net_;
  std::string source_;
};

// a = f(x) for one input vector or a batch of columns.
Eigen::VectorXd anchor_forward(const AnchorEncoder& anchor, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::MatrixXd anchor_forward_batch(const AnchorEncoder& anchor, const Eigen::Ref<const Eigen::MatrixXd>& x);
Eigen::VectorXd anchor_forward(const AnchorEncoder& anchor, const Sample& sample);

// h_hat = W h, W is D_a x D_h.
Eigen::VectorXd project_anchor(const Eigen::Ref<const Eigen::MatrixXd>& w,
                               const Eigen::Ref<const Eigen::VectorXd>& h);

// ||a - h_hat||^2, or its mean over columns for batches.
double loss_anc(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& h_hat);
// ||(a - h_hat) - (a' - h_hat')||^2, mean over columns.
double loss_res(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& h_hat,
                const Eigen::Ref<const Eigen::MatrixXd>& a_deg,
                const Eigen::Ref<const Eigen::MatrixXd>& h_hat_deg);

// Training-time augmentation pool. Ops are drawn uniformly from jpeg,
// resize (down then back up), blur, noise and color gain; parameters are
// uniform in the ranges below.
struct DegradePolicy {
  double jpeg_q_min = 30, jpeg_q_max = 90;
  double scale_min = 0.5, scale_max = 1.0;
  double blur_min = 0.5, blur_max = 1.5;
  double noise_min = 1.0, noise_max = 5.0;  // 8-bit levels
  double gain_min = 0.8, gain_max = 1.2;
  int k_min = 1, k_max = 3;
  // Vector payloads: additive Gaussian noise plus coordinate dropout.
  double vector_noise = 0.05;
  double dropout = 0.1;
  std::uint64_t seed = 0;

  bool operator==(const DegradePolicy&) const = default;
};

void validate(const DegradePolicy& policy);

// Deterministic per (sample id, policy.seed, draw). Role, family and shape
// are preserved.
Sample degrade_train(const Sample& x, const DegradePolicy& policy, std::uint64_t draw = 0);

}  // namespace rem::cdc
