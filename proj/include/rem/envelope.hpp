#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rem/cdc.hpp"
#include "rem/layout.hpp"
#include "rem/nn.hpp"
#include "rem/numerics.hpp"
#include "rem/rng.hpp"
#include "rem/worldgen.hpp"

namespace rem::envelope {

// Fixed, parameter-free input transform in front of the learner.
// Spectral (images): radial log-power bands of the luminance DFT (DC
// excluded) followed by grid x grid cell means mapped to [-1, 1].
// Identity: the flat payload.
enum class FrontEndKind { Spectral, Identity };

std::string to_string(FrontEndKind kind);
FrontEndKind parse_front_end(const std::string& text);

struct FrontEnd {
  FrontEndKind kind = FrontEndKind::Spectral;
  InputLayout layout;
  int radial_bins = 12;
  int grid = 4;

  int dim() const;
  bool operator==(const FrontEnd&) const = default;

  static FrontEnd for_layout(const InputLayout& layout);
};

// Columns of flat payloads (layout.flat_dim() x n) to front-end features.
Eigen::MatrixXd apply_front_end(const FrontEnd& front, const Eigen::Ref<const Eigen::MatrixXd>& inputs);

struct LossWeights {
  double tan = 0.1;
  double anc = 1.0;
  double res = 1.0;
  bool operator==(const LossWeights&) const = default;
};

struct LossParts {
  double bce = 0;
  double tan = 0;
  double anc = 0;
  double res = 0;
};

struct LossReport {
  double l_bce = 0;
  double l_tan = 0;
  double l_anc = 0;
  double l_res = 0;
  double total = 0;
  double grad_norm = 0;
};

// total = bce + tan weight * tan + anc weight * anc + res weight * res.
// A non-finite part raises NonFinite naming the term.
LossReport total_loss(const LossParts& parts, const LossWeights& weights);

// -mean log sigma(real) - mean log(1 - sigma(fake)), logits clamped to +-30.
double loss_bce(const Eigen::Ref<const Eigen::VectorXd>& real_logits,
                const Eigen::Ref<const Eigen::VectorXd>& fake_logits);
// Mean over paired columns of ||(I - P)(h_f - h_r)||^2.
double loss_tan(const TangentBasis& basis, const Eigen::Ref<const Eigen::MatrixXd>& h_real,
                const Eigen::Ref<const Eigen::MatrixXd>& h_fake);

struct EnvelopeMeta {
  std::vector<LossReport> epochs;  // batch means per epoch
};

struct EnvelopeModel {
  InputLayout layout;
  FrontEnd front;
  TwoLayerNet<double> learner;  // front.dim() -> hidden -> D_h, tanh output
  Eigen::VectorXd disc_w;       // linear discriminator on features
  double disc_b = 0;
  Eigen::MatrixXd proj;         // W, D_a x D_h (0 rows without an anchor)
  TangentBasis basis;
  LossWeights weights;
  std::string anchor_fingerprint;
  std::optional<EnvelopeMeta> meta;

  int feature_dim() const { return learner.output_dim(); }
  int anchor_dim() const { return static_cast<int>(proj.rows()); }
};

// h = phi(x).
FeatureVec learner_forward(const EnvelopeModel& model, const Payload& payload);
Eigen::MatrixXd learner_features(const EnvelopeModel& model, const std::vector<Sample>& samples);

// sigma(s(phi(x))), probability of being real.
double score(const EnvelopeModel& model, const Sample& sample);
Eigen::VectorXd score_batch(const EnvelopeModel& model, const std::vector<Sample>& samples);
Eigen::VectorXd logits(const EnvelopeModel& model, const Eigen::Ref<const Eigen::MatrixXd>& features);

// One optimisation batch in front-end coordinates. real/fake columns are
// paired by index. Degraded blocks are either empty or the same size as
// their clean counterparts; anchor blocks hold a = f(x) for the same views.
struct TrainingBatch {
  Eigen::MatrixXd real, fake;
  Eigen::MatrixXd real_deg, fake_deg;
  Eigen::MatrixXd anchor_real, anchor_fake;
  Eigen::MatrixXd anchor_real_deg, anchor_fake_deg;
  bool bce_on_degraded = false;

  bool has_degraded() const { return real_deg.cols() > 0; }
};

struct EnvelopeGradients {
  NetGradients<double> learner;
  Eigen::VectorXd disc_w;
  double disc_b = 0;
  Eigen::MatrixXd proj;

  double norm() const;
};

LossReport evaluate_batch(const EnvelopeModel& model, const TrainingBatch& batch);
// Analytic gradients of the total loss. The anchor features and the tangent
// basis are constants.
std::pair<LossReport, EnvelopeGradients> backward(const EnvelopeModel& model, const TrainingBatch& batch);

struct EnvelopeConfig {
  int hidden = 64;
  int feature_dim = 32;
  int epochs = 20;
  int batch = 64;
  double lr = 1e-3;
  LossWeights weights;
  double variance_fraction = 0.9;
  bool refresh_basis = true;
  bool cdc = true;      // anchor and residual terms on degraded views
  bool augment = true;  // discriminator also sees degraded views
  cdc::DegradePolicy policy;
  std::optional<FrontEndKind> front;  // default: spectral for images
};

// Negatives for a given epoch; entry i is paired with real i.
using NegativeSource = std::function<std::vector<Sample>(int epoch)>;

// Reals against near-real negatives. `anchor` may be null only when
// config.cdc is false.
EnvelopeModel train_envelope(const std::vector<Sample>& reals, const NegativeSource& near_reals,
                             const cdc::AnchorEncoder* anchor, const EnvelopeConfig& config, SeededRng& rng);
EnvelopeModel train_envelope(const std::vector<Sample>& reals, const std::vector<Sample>& near_reals,
                             const cdc::AnchorEncoder* anchor, const EnvelopeConfig& config, SeededRng& rng);

// Same architecture and optimiser, trained with plain BCE on reals against
// generator fakes.
EnvelopeModel train_baseline(const std::vector<Sample>& reals, const std::vector<Sample>& fakes,
                             const EnvelopeConfig& config, SeededRng& rng);

// "REMEE1" checkpoint. After the magic, uint32 LE: mode, height, width,
// channels, vector_dim, front kind, radial_bins, grid, front dim, hidden, D_h,
// D_a, p, epochs. Then float32 LE: lambda (tan, anc, res), disc_b,
// explained_variance, learner w1, b1, w2, b2, disc_w, W (D_a x D_h), U_p
// (D_h x p), eigenvalues (p), then per epoch (bce, tan, anc, res, total,
// grad_norm). Blocks are row-major. A sidecar `<path>.txt` echoes the header
// as key=value lines.
void save_envelope(const EnvelopeModel& model, const std::filesystem::path& path);
EnvelopeModel load_envelope(const std::filesystem::path& path);

}  // namespace rem::envelope
