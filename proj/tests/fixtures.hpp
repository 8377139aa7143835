#pragma once

// Small hand-built models and batches shared by the envelope tests and the
// acceptance binary.

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rem/envelope.hpp"
#include "rem/rng.hpp"

namespace fixture {

inline Eigen::MatrixXd gaussian(int rows, int cols, rem::SeededRng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (auto& v : m.reshaped()) v = scale * rng.gaussian();
  return m;
}

struct Dims {
  int input = 6;
  int hidden = 10;
  int feature = 24;
  int anchor = 5;
  int batch = 6;
};

// Vector-mode model with an identity front end and a partial tangent basis.
inline rem::envelope::EnvelopeModel toy_model(std::uint64_t seed, const Dims& d = {}) {
  rem::SeededRng rng(seed);
  rem::envelope::EnvelopeModel m;
  m.layout.mode = rem::PayloadMode::Vector;
  m.layout.vector_dim = d.input;
  m.front.kind = rem::envelope::FrontEndKind::Identity;
  m.front.layout = m.layout;
  m.learner = rem::TwoLayerNet<double>::random(d.input, d.hidden, d.feature, true, rng);
  m.learner.b1 = gaussian(d.hidden, 1, rng, 0.1);
  m.learner.b2 = gaussian(d.feature, 1, rng, 0.1);
  m.disc_w = gaussian(d.feature, 1, rng, 0.5);
  m.disc_b = 0.1;
  m.proj = gaussian(d.anchor, d.feature, rng, 0.3);
  m.basis = rem::pca_top_p(gaussian(40, d.feature, rng), 5);
  m.weights = {0.3, 0.7, 1.3};
  return m;
}

inline rem::envelope::TrainingBatch toy_batch(std::uint64_t seed, const Dims& d = {}) {
  rem::SeededRng rng(seed);
  rem::envelope::TrainingBatch b;
  b.real = gaussian(d.input, d.batch, rng);
  b.fake = gaussian(d.input, d.batch, rng);
  b.real_deg = b.real + gaussian(d.input, d.batch, rng, 0.2);
  b.fake_deg = b.fake + gaussian(d.input, d.batch, rng, 0.2);
  b.anchor_real = gaussian(d.anchor, d.batch, rng, 0.5);
  b.anchor_fake = gaussian(d.anchor, d.batch, rng, 0.5);
  b.anchor_real_deg = gaussian(d.anchor, d.batch, rng, 0.5);
  b.anchor_fake_deg = gaussian(d.anchor, d.batch, rng, 0.5);
  b.bce_on_degraded = true;
  return b;
}

struct BlockCheck {
  std::string block;
  int checked = 0;
  double max_rel_err = 0;
};

// Central differences of the total loss on `per_block` random entries of the
// learner, the discriminator and the projection.
inline std::vector<BlockCheck> gradient_check(rem::envelope::EnvelopeModel model,
                                              const rem::envelope::TrainingBatch& batch, int per_block,
                                              std::uint64_t seed, double step = 1e-4) {
  using rem::envelope::backward;
  using rem::envelope::evaluate_batch;
  const auto analytic = backward(model, batch).second;
  auto loss = [&] { return evaluate_batch(model, batch).total; };
  rem::SeededRng rng(seed);

  struct Entry {
    double* param;
    double grad;
  };
  auto check = [&](const std::string& name, const std::vector<Entry>& entries) {
    BlockCheck c{name, 0, 0};
    for (int i = 0; i < per_block; ++i) {
      const Entry& e = entries[rng.below(entries.size())];
      const double numeric = oracle::central_difference(loss, *e.param, step);
      c.max_rel_err = std::max(c.max_rel_err, std::abs(e.grad - numeric) / (std::abs(e.grad) + 1e-8));
      ++c.checked;
    }
    return c;
  };
  auto entries_of = [](auto& param, const auto& grad) {
    std::vector<Entry> out;
    for (Eigen::Index i = 0; i < param.size(); ++i) out.push_back({param.data() + i, grad.data()[i]});
    return out;
  };

  std::vector<Entry> phi;
  for (auto [p, g] : {std::pair{&model.learner.w1, &analytic.learner.w1}, std::pair{&model.learner.w2, &analytic.learner.w2}}) {
    auto e = entries_of(*p, *g);
    phi.insert(phi.end(), e.begin(), e.end());
  }
  for (auto [p, g] : {std::pair{&model.learner.b1, &analytic.learner.b1}, std::pair{&model.learner.b2, &analytic.learner.b2}}) {
    auto e = entries_of(*p, *g);
    phi.insert(phi.end(), e.begin(), e.end());
  }
  std::vector<Entry> disc = entries_of(model.disc_w, analytic.disc_w);
  disc.push_back({&model.disc_b, analytic.disc_b});
  const std::vector<Entry> proj = entries_of(model.proj, analytic.proj);

  return {check("phi", phi), check("s", disc), check("W", proj)};
}

}  // namespace fixture
