#include "rem/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rem/binio.hpp"
#include "rem/error.hpp"

namespace rem::envelope {

namespace {

constexpr double kLogitClamp = 30.0;

// -log sigma(x), stable.
double softplus_neg(double x) { return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double clamp_logit(double x) { return std::clamp(x, -kLogitClamp, kLogitClamp); }

// Radial band of each DFT bin; -1 for DC.
Eigen::MatrixXi radial_bands(int h, int w, int bands) {
  const double max_radius = std::sqrt(0.5) + 1e-4;
  Eigen::MatrixXi out(h, w);
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      if (u == 0 && v == 0) {
        out(u, v) = -1;
        continue;
      }
      const double r = std::hypot(bin_frequency(u, h), bin_frequency(v, w));
      out(u, v) = std::min(static_cast<int>(r / max_radius * bands), bands - 1);
    }
  return out;
}

void check_finite_block(const Eigen::Ref<const Eigen::MatrixXd>& g, const char* name) {
  require(g.allFinite(), ErrorKind::NonFinite, std::string("non-finite gradient in ") + name);
}

struct Forward {
  NetActivations<double> act;
  Eigen::MatrixXd inputs;
  Eigen::RowVectorXd logit;
  int n = 0;
  int nd = 0;
};

Forward run_forward(const EnvelopeModel& model, const TrainingBatch& batch) {
  const int n = static_cast<int>(batch.real.cols());
  require(n >= 1 && batch.fake.cols() == n, ErrorKind::InvalidArgument,
          "training batch: real and fake blocks must be nonempty and paired");
  const int nd = static_cast<int>(batch.real_deg.cols());
  require(nd == 0 || (nd == n && batch.fake_deg.cols() == n), ErrorKind::InvalidArgument,
          "training batch: degraded blocks must match the clean ones");
  Forward f;
  f.n = n;
  f.nd = nd;
  f.inputs.resize(batch.real.rows(), 2 * n + 2 * nd);
  f.inputs << batch.real, batch.fake, batch.real_deg, batch.fake_deg;
  f.act = forward(model.learner, f.inputs);
  f.logit = (model.disc_w.transpose() * f.act.output).array() + model.disc_b;
  return f;
}

}  // namespace

std::string to_string(FrontEndKind kind) { return kind == FrontEndKind::Spectral ? "spectral" : "identity"; }

FrontEndKind parse_front_end(const std::string& text) {
  if (text == "spectral") return FrontEndKind::Spectral;
  if (text == "identity") return FrontEndKind::Identity;
  throw Error(ErrorKind::InvalidArgument, "unknown front end '" + text + "' (valid: spectral, identity)");
}

int FrontEnd::dim() const {
  if (kind == FrontEndKind::Identity) return layout.flat_dim();
  return radial_bins + grid * grid;
}

FrontEnd FrontEnd::for_layout(const InputLayout& layout) {
  FrontEnd f;
  f.layout = layout;
  f.kind = layout.mode == PayloadMode::Image ? FrontEndKind::Spectral : FrontEndKind::Identity;
  return f;
}

Eigen::MatrixXd apply_front_end(const FrontEnd& front, const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  require_dims(inputs.rows(), front.layout.flat_dim(), "front end input");
  if (front.kind == FrontEndKind::Identity) return inputs;
  require(front.layout.mode == PayloadMode::Image, ErrorKind::InvalidArgument,
          "spectral front end needs image payloads");
  const int h = front.layout.height;
  const int w = front.layout.width;
  const int c = front.layout.channels;
  const int g = front.grid;
  require(front.radial_bins >= 1 && g >= 1 && g <= std::min(h, w), ErrorKind::InvalidArgument,
          "front end: invalid band or grid count");
  const Eigen::MatrixXi bands = radial_bands(h, w, front.radial_bins);
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(front.radial_bins);
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v)
      if (bands(u, v) >= 0) ++counts(bands(u, v));
  const long hw = static_cast<long>(h) * w;
  Eigen::MatrixXd out(front.dim(), inputs.cols());
  Eigen::MatrixXd lum(h, w);
  for (Eigen::Index s = 0; s < inputs.cols(); ++s) {
    lum.setZero();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) lum(y, x) += inputs(ch * hw + static_cast<long>(y) * w + x, s);
    lum /= c;
    const Eigen::MatrixXd power = dft2(lum).cwiseAbs2() / static_cast<double>(hw);
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(front.radial_bins);
    for (int u = 0; u < h; ++u)
      for (int v = 0; v < w; ++v)
        if (bands(u, v) >= 0) sums(bands(u, v)) += power(u, v);
    for (int b = 0; b < front.radial_bins; ++b)
      out(b, s) = counts(b) > 0 ? std::log(sums(b) / counts(b) + 1e-6) / 5.0 : 0.0;
    for (int i = 0; i < g; ++i)
      for (int j = 0; j < g; ++j) {
        const int y0 = i * h / g, y1 = (i + 1) * h / g;
        const int x0 = j * w / g, x1 = (j + 1) * w / g;
        out(front.radial_bins + i * g + j, s) = lum.block(y0, x0, y1 - y0, x1 - x0).mean() * 2.0 - 1.0;
      }
  }
  return out;
}

LossReport total_loss(const LossParts& parts, const LossWeights& weights) {
  const std::pair<const char*, double> terms[] = {
      {"l_bce", parts.bce}, {"l_tan", parts.tan}, {"l_anc", parts.anc}, {"l_res", parts.res}};
  for (const auto& [name, value] : terms)
    require(std::isfinite(value), ErrorKind::NonFinite, std::string("non-finite loss term ") + name);
  LossReport r;
  r.l_bce = parts.bce;
  r.l_tan = parts.tan;
  r.l_anc = parts.anc;
  r.l_res = parts.res;
  r.total = parts.bce + weights.tan * parts.tan + weights.anc * parts.anc + weights.res * parts.res;
  return r;
}

double loss_bce(const Eigen::Ref<const Eigen::VectorXd>& real_logits,
                const Eigen::Ref<const Eigen::VectorXd>& fake_logits) {
  require(real_logits.size() >= 1 && fake_logits.size() >= 1, ErrorKind::InvalidArgument,
          "loss_bce: empty logit list");
  double real = 0, fake = 0;
  for (double l : real_logits) real += softplus_neg(clamp_logit(l));
  for (double l : fake_logits) fake += softplus_neg(-clamp_logit(l));
  return real / static_cast<double>(real_logits.size()) + fake / static_cast<double>(fake_logits.size());
}

double loss_tan(const TangentBasis& basis, const Eigen::Ref<const Eigen::MatrixXd>& h_real,
                const Eigen::Ref<const Eigen::MatrixXd>& h_fake) {
  require_dims(h_real.rows(), basis.dim, "loss_tan");
  require_dims(h_fake.rows(), basis.dim, "loss_tan");
  require_dims(h_fake.cols(), h_real.cols(), "loss_tan pairs");
  require(h_real.cols() >= 1, ErrorKind::InvalidArgument, "loss_tan: no pairs");
  return project_off_tangent_cols(basis, h_fake - h_real).squaredNorm() / static_cast<double>(h_real.cols());
}

FeatureVec learner_forward(const EnvelopeModel& model, const Payload& payload) {
  const Eigen::VectorXd x = to_input(payload, model.layout);
  return predict(model.learner, apply_front_end(model.front, x));
}

Eigen::MatrixXd learner_features(const EnvelopeModel& model, const std::vector<Sample>& samples) {
  return predict(model.learner, apply_front_end(model.front, to_inputs(samples, model.layout)));
}

Eigen::VectorXd logits(const EnvelopeModel& model, const Eigen::Ref<const Eigen::MatrixXd>& features) {
  require_dims(features.rows(), model.feature_dim(), "logits");
  return (features.transpose() * model.disc_w).array() + model.disc_b;
}

double score(const EnvelopeModel& model, const Sample& sample) {
  require(model.meta.has_value(), ErrorKind::NotTrained, "score: model is untrained");
  const FeatureVec h = learner_forward(model, sample.payload);
  return sigmoid(model.disc_w.dot(h) + model.disc_b);
}

Eigen::VectorXd score_batch(const EnvelopeModel& model, const std::vector<Sample>& samples) {
  require(model.meta.has_value(), ErrorKind::NotTrained, "score: model is untrained");
  Eigen::VectorXd l = logits(model, learner_features(model, samples));
  for (auto& v : l) v = sigmoid(v);
  return l;
}

double EnvelopeGradients::norm() const {
  return std::sqrt(learner.w1.squaredNorm() + learner.b1.squaredNorm() + learner.w2.squaredNorm() +
                   learner.b2.squaredNorm() + disc_w.squaredNorm() + disc_b * disc_b + proj.squaredNorm());
}

LossReport evaluate_batch(const EnvelopeModel& model, const TrainingBatch& batch) {
  return backward(model, batch).first;
}

std::pair<LossReport, EnvelopeGradients> backward(const EnvelopeModel& model, const TrainingBatch& batch) {
  const Forward f = run_forward(model, batch);
  const int n = f.n;
  const int nd = f.nd;
  const Eigen::MatrixXd& h = f.act.output;
  const LossWeights& lam = model.weights;
  Eigen::MatrixXd d_h = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  Eigen::RowVectorXd d_logit = Eigen::RowVectorXd::Zero(h.cols());
  LossParts parts;

  auto bce_block = [&](int real_start, int fake_start, int count) {
    double real = 0, fake = 0;
    for (int i = 0; i < count; ++i) {
      const double lr = f.logit(real_start + i);
      const double lf = f.logit(fake_start + i);
      real += softplus_neg(clamp_logit(lr));
      fake += softplus_neg(-clamp_logit(lf));
      if (std::abs(lr) < kLogitClamp) d_logit(real_start + i) = (sigmoid(lr) - 1.0) / count;
      if (std::abs(lf) < kLogitClamp) d_logit(fake_start + i) = sigmoid(lf) / count;
    }
    return real / count + fake / count;
  };
  parts.bce = bce_block(0, n, n);
  if (nd > 0 && batch.bce_on_degraded) parts.bce += bce_block(2 * n, 3 * n, nd);

  const Eigen::MatrixXd off = project_off_tangent_cols(model.basis, h.middleCols(n, n) - h.leftCols(n));
  parts.tan = off.squaredNorm() / n;
  if (lam.tan != 0) {
    d_h.middleCols(n, n) += lam.tan * 2.0 / n * off;
    d_h.leftCols(n) -= lam.tan * 2.0 / n * off;
  }

  EnvelopeGradients g;
  g.proj = Eigen::MatrixXd::Zero(model.proj.rows(), model.proj.cols());
  const bool has_anchor = model.proj.rows() > 0 && batch.anchor_real.cols() == n;
  if (has_anchor) {
    const int m = 2 * n;
    Eigen::MatrixXd a(model.proj.rows(), m);
    a << batch.anchor_real, batch.anchor_fake;
    const auto hc = h.leftCols(m);
    const Eigen::MatrixXd resid = a - model.proj * hc;
    parts.anc = resid.squaredNorm() / m;
    if (lam.anc != 0) {
      d_h.leftCols(m) += lam.anc * (-2.0 / m) * (model.proj.transpose() * resid);
      g.proj += lam.anc * (-2.0 / m) * resid * hc.transpose();
    }
    if (nd > 0) {
      Eigen::MatrixXd ad(model.proj.rows(), m);
      ad << batch.anchor_real_deg, batch.anchor_fake_deg;
      const auto hd = h.middleCols(m, m);
      const Eigen::MatrixXd e = resid - (ad - model.proj * hd);
      parts.res = e.squaredNorm() / m;
      if (lam.res != 0) {
        const Eigen::MatrixXd wte = model.proj.transpose() * e;
        d_h.leftCols(m) += lam.res * (-2.0 / m) * wte;
        d_h.middleCols(m, m) += lam.res * (2.0 / m) * wte;
        g.proj += lam.res * (-2.0 / m) * e * (hc - hd).transpose();
      }
    }
  }

  LossReport report = total_loss(parts, lam);
  d_h += model.disc_w * d_logit;
  g.disc_w = h * d_logit.transpose();
  g.disc_b = d_logit.sum();
  g.learner = rem::backward(model.learner, f.inputs, f.act, d_h);
  check_finite_block(g.learner.w1, "learner.w1");
  check_finite_block(g.learner.b1, "learner.b1");
  check_finite_block(g.learner.w2, "learner.w2");
  check_finite_block(g.learner.b2, "learner.b2");
  check_finite_block(g.disc_w, "discriminator.w");
  require(std::isfinite(g.disc_b), ErrorKind::NonFinite, "non-finite gradient in discriminator.b");
  check_finite_block(g.proj, "projection W");
  report.grad_norm = g.norm();
  return {report, std::move(g)};
}

namespace {

struct View {
  Eigen::MatrixXd features;  // front-end
  Eigen::MatrixXd anchor;    // a = f(x), empty without anchor
};

View make_view(const std::vector<Sample>& samples, const FrontEnd& front, const InputLayout& layout,
               const cdc::AnchorEncoder* anchor) {
  View v;
  v.features = apply_front_end(front, to_inputs(samples, layout));
  if (anchor) v.anchor = cdc::anchor_forward_batch(*anchor, to_inputs(samples, anchor->layout()));
  return v;
}

std::vector<Sample> degrade_all(const std::vector<Sample>& samples, const cdc::DegradePolicy& policy,
                                std::uint64_t draw) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(cdc::degrade_train(s, policy, draw));
  return out;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(idx[k]);
  return out;
}

TangentBasis fit_basis(const EnvelopeModel& model, const Eigen::MatrixXd& real_features, double fraction) {
  const Eigen::MatrixXd h = predict(model.learner, real_features);
  return pca_by_variance(h.transpose(), fraction, model.feature_dim() - 1);
}

void round_basis(TangentBasis& basis) {
  round_to_float(basis.components);
  round_to_float(basis.eigenvalues);
  basis.explained_variance = static_cast<float>(basis.explained_variance);
}

EnvelopeModel train_impl(const std::vector<Sample>& reals, const NegativeSource& negatives,
                         const cdc::AnchorEncoder* anchor, const EnvelopeConfig& config, SeededRng& rng) {
  require(!reals.empty(), ErrorKind::InsufficientSamples, "train_envelope: empty real corpus");
  require(config.epochs >= 1 && config.batch >= 1 && config.hidden >= 1 && config.feature_dim >= 2,
          ErrorKind::InvalidArgument, "train_envelope: invalid epochs, batch or dimensions");
  require(config.variance_fraction > 0 && config.variance_fraction <= 1, ErrorKind::InvalidArgument,
          "train_envelope: variance_fraction must be in (0, 1]");
  require(!config.cdc || anchor, ErrorKind::InvalidArgument, "train_envelope: consistency terms need an anchor");
  const bool degraded = config.cdc || config.augment;
  if (degraded) cdc::validate(config.policy);

  EnvelopeModel model;
  model.layout = InputLayout::of(reals.front());
  model.front = FrontEnd::for_layout(model.layout);
  if (config.front) model.front.kind = *config.front;
  model.weights = config.weights;
  if (!config.cdc) model.weights.anc = model.weights.res = 0;
  const cdc::AnchorEncoder* used_anchor = config.cdc ? anchor : nullptr;
  if (used_anchor) model.anchor_fingerprint = used_anchor->fingerprint();

  const int dh = config.feature_dim;
  model.learner = TwoLayerNet<double>::random(model.front.dim(), config.hidden, dh, true, rng);
  model.disc_w.resize(dh);
  for (auto& v : model.disc_w) v = rng.gaussian() / std::sqrt(static_cast<double>(dh));
  const int da = used_anchor ? used_anchor->dim() : 0;
  model.proj.resize(da, dh);
  for (Eigen::Index j = 0; j < dh; ++j)
    for (Eigen::Index i = 0; i < da; ++i) model.proj(i, j) = rng.gaussian() / std::sqrt(static_cast<double>(dh));

  const View real_clean = make_view(reals, model.front, model.layout, used_anchor);
  model.basis = fit_basis(model, real_clean.features, config.variance_fraction);

  Adam opt(AdamConfig{config.lr});
  EnvelopeMeta meta;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<Sample> negs = negatives(epoch);
    require(!negs.empty(), ErrorKind::InsufficientSamples, "train_envelope: empty negative corpus");
    const View neg_clean = make_view(negs, model.front, model.layout, used_anchor);
    View real_deg, neg_deg;
    if (degraded) {
      const std::uint64_t draw = static_cast<std::uint64_t>(epoch);
      real_deg = make_view(degrade_all(reals, config.policy, draw), model.front, model.layout, used_anchor);
      neg_deg = make_view(degrade_all(negs, config.policy, draw), model.front, model.layout, used_anchor);
    }
    const int n = static_cast<int>(std::min(reals.size(), negs.size()));
    const std::vector<int> order = permutation(n, rng);
    LossReport sum;
    int batches = 0;
    for (int start = 0; start < n; start += config.batch) {
      const std::vector<int> idx(order.begin() + start, order.begin() + std::min(n, start + config.batch));
      TrainingBatch b;
      b.real = gather(real_clean.features, idx);
      b.fake = gather(neg_clean.features, idx);
      if (degraded) {
        b.real_deg = gather(real_deg.features, idx);
        b.fake_deg = gather(neg_deg.features, idx);
      }
      b.bce_on_degraded = config.augment;
      if (used_anchor) {
        b.anchor_real = gather(real_clean.anchor, idx);
        b.anchor_fake = gather(neg_clean.anchor, idx);
        b.anchor_real_deg = gather(real_deg.anchor, idx);
        b.anchor_fake_deg = gather(neg_deg.anchor, idx);
      }
      std::pair<LossReport, EnvelopeGradients> step;
      try {
        step = backward(model, b);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFinite) throw;
        throw Error(ErrorKind::Divergence, "train_envelope: divergence at epoch " + std::to_string(epoch) + " (" +
                                               e.what() + ")");
      }
      auto& [report, g] = step;
      opt.step({param_ref(model.learner.w1, g.learner.w1), param_ref(model.learner.b1, g.learner.b1),
                param_ref(model.learner.w2, g.learner.w2), param_ref(model.learner.b2, g.learner.b2),
                param_ref(model.disc_w, g.disc_w), ParamRef{&model.disc_b, &g.disc_b, 1},
                param_ref(model.proj, g.proj)});
      sum.l_bce += report.l_bce;
      sum.l_tan += report.l_tan;
      sum.l_anc += report.l_anc;
      sum.l_res += report.l_res;
      sum.total += report.total;
      sum.grad_norm += report.grad_norm;
      ++batches;
    }
    for (double* v : {&sum.l_bce, &sum.l_tan, &sum.l_anc, &sum.l_res, &sum.total, &sum.grad_norm})
      *v = static_cast<float>(*v / batches);
    if (!std::isfinite(sum.total) || !model.learner.all_finite() || !model.disc_w.allFinite()) {
      throw Error(ErrorKind::Divergence, "train_envelope: divergence at epoch " + std::to_string(epoch));
    }
    meta.epochs.push_back(sum);
    if (config.refresh_basis) model.basis = fit_basis(model, real_clean.features, config.variance_fraction);
  }

  round_to_float(model.learner);
  round_to_float(model.disc_w);
  model.disc_b = static_cast<float>(model.disc_b);
  round_to_float(model.proj);
  round_basis(model.basis);
  for (double* w : {&model.weights.tan, &model.weights.anc, &model.weights.res}) *w = static_cast<float>(*w);
  model.meta = std::move(meta);
  return model;
}

}  // namespace

EnvelopeModel train_envelope(const std::vector<Sample>& reals, const NegativeSource& near_reals,
                             const cdc::AnchorEncoder* anchor, const EnvelopeConfig& config, SeededRng& rng) {
  NegativeSource checked = [&](int epoch) {
    std::vector<Sample> negs = near_reals(epoch);
    require(!negs.empty(), ErrorKind::InsufficientSamples, "train_envelope: near-real corpus is empty");
    for (const auto& s : negs)
      require(s.role == Role::NearReal, ErrorKind::InvalidArgument,
              "train_envelope: negative '" + s.id + "' is not tagged near_real");
    return negs;
  };
  return train_impl(reals, checked, anchor, config, rng);
}

EnvelopeModel train_envelope(const std::vector<Sample>& reals, const std::vector<Sample>& near_reals,
                             const cdc::AnchorEncoder* anchor, const EnvelopeConfig& config, SeededRng& rng) {
  return train_envelope(reals, NegativeSource([&](int) { return near_reals; }), anchor, config, rng);
}

EnvelopeModel train_baseline(const std::vector<Sample>& reals, const std::vector<Sample>& fakes,
                             const EnvelopeConfig& config, SeededRng& rng) {
  require(!fakes.empty(), ErrorKind::InsufficientSamples, "train_baseline: empty fake corpus");
  EnvelopeConfig plain = config;
  plain.weights = LossWeights{0, 0, 0};
  plain.cdc = false;
  plain.augment = false;
  return train_impl(reals, [&](int) { return fakes; }, nullptr, plain, rng);
}

void save_envelope(const EnvelopeModel& model, const std::filesystem::path& path) {
  require(model.meta.has_value(), ErrorKind::NotTrained, "save_envelope: model is untrained");
  BinaryWriter w(path);
  w.magic("REMEE1");
  const InputLayout& l = model.layout;
  const std::uint32_t header[] = {
      l.mode == PayloadMode::Image ? 0u : 1u,
      static_cast<std::uint32_t>(l.height),
      static_cast<std::uint32_t>(l.width),
      static_cast<std::uint32_t>(l.channels),
      static_cast<std::uint32_t>(l.vector_dim),
      model.front.kind == FrontEndKind::Spectral ? 0u : 1u,
      static_cast<std::uint32_t>(model.front.radial_bins),
      static_cast<std::uint32_t>(model.front.grid),
      static_cast<std::uint32_t>(model.front.dim()),
      static_cast<std::uint32_t>(model.learner.hidden_dim()),
      static_cast<std::uint32_t>(model.feature_dim()),
      static_cast<std::uint32_t>(model.anchor_dim()),
      static_cast<std::uint32_t>(model.basis.p),
      static_cast<std::uint32_t>(model.meta->epochs.size())};
  for (auto v : header) w.u32(v);
  w.f32(model.weights.tan);
  w.f32(model.weights.anc);
  w.f32(model.weights.res);
  w.f32(model.disc_b);
  w.f32(model.basis.explained_variance);
  w.block(model.learner.w1);
  w.block(model.learner.b1);
  w.block(model.learner.w2);
  w.block(model.learner.b2);
  w.block(model.disc_w);
  w.block(model.proj);
  w.block(model.basis.components);
  w.block(model.basis.eigenvalues);
  for (const auto& e : model.meta->epochs)
    for (double v : {e.l_bce, e.l_tan, e.l_anc, e.l_res, e.total, e.grad_norm}) w.f32(v);
  w.finish();

  std::ofstream side(path.string() + ".txt");
  require(static_cast<bool>(side), ErrorKind::Io, "cannot write " + path.string() + ".txt");
  side << "format=REMEE1\nmode=" << to_string(l.mode) << "\nheight=" << l.height << "\nwidth=" << l.width
       << "\nchannels=" << l.channels << "\nvector_dim=" << l.vector_dim
       << "\nfront_end=" << to_string(model.front.kind) << "\nradial_bins=" << model.front.radial_bins
       << "\ngrid=" << model.front.grid << "\nhidden=" << model.learner.hidden_dim()
       << "\nfeature_dim=" << model.feature_dim() << "\nanchor_dim=" << model.anchor_dim()
       << "\ntangent_p=" << model.basis.p << "\nlambda_tan=" << model.weights.tan
       << "\nlambda_anc=" << model.weights.anc << "\nlambda_res=" << model.weights.res
       << "\nepochs=" << model.meta->epochs.size() << "\nanchor_sha256="
       << (model.anchor_fingerprint.empty() ? "-" : model.anchor_fingerprint) << "\n";
}

EnvelopeModel load_envelope(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic("REMEE1");
  std::uint32_t h[14];
  for (auto& v : h) v = r.u32();
  EnvelopeModel m;
  m.layout.mode = h[0] == 0 ? PayloadMode::Image : PayloadMode::Vector;
  m.layout.height = static_cast<int>(h[1]);
  m.layout.width = static_cast<int>(h[2]);
  m.layout.channels = static_cast<int>(h[3]);
  m.layout.vector_dim = static_cast<int>(h[4]);
  m.front.layout = m.layout;
  m.front.kind = h[5] == 0 ? FrontEndKind::Spectral : FrontEndKind::Identity;
  m.front.radial_bins = static_cast<int>(h[6]);
  m.front.grid = static_cast<int>(h[7]);
  const int in = static_cast<int>(h[8]);
  require(in == m.front.dim(), ErrorKind::Parse, path.string() + ": inconsistent front end");
  const int hidden = static_cast<int>(h[9]);
  const int dh = static_cast<int>(h[10]);
  const int da = static_cast<int>(h[11]);
  const int p = static_cast<int>(h[12]);
  const std::uint32_t epochs = h[13];
  m.weights.tan = r.f32();
  m.weights.anc = r.f32();
  m.weights.res = r.f32();
  m.disc_b = r.f32();
  m.basis.explained_variance = r.f32();
  m.learner.tanh_output = true;
  m.learner.w1 = r.block(hidden, in);
  m.learner.b1 = r.vec(hidden);
  m.learner.w2 = r.block(dh, hidden);
  m.learner.b2 = r.vec(dh);
  m.disc_w = r.vec(dh);
  m.proj = r.block(da, dh);
  m.basis.dim = dh;
  m.basis.p = p;
  m.basis.components = r.block(dh, p);
  m.basis.eigenvalues = r.vec(p);
  EnvelopeMeta meta;
  for (std::uint32_t e = 0; e < epochs; ++e) {
    LossReport rep;
    for (double* v : {&rep.l_bce, &rep.l_tan, &rep.l_anc, &rep.l_res, &rep.total, &rep.grad_norm}) *v = r.f32();
    meta.epochs.push_back(rep);
  }
  m.meta = std::move(meta);
  return m;
}

}  // namespace rem::envelope
