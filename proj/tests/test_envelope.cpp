#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "rem/error.hpp"

using namespace rem;
using namespace rem::envelope;
namespace fs = std::filesystem;

namespace {

std::vector<Sample> blob(double center, int n, int dim, Role role, std::uint64_t seed, const std::string& prefix) {
  SeededRng rng(seed);
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXf v(dim);
    for (auto& x : v) x = static_cast<float>(center + 0.5 * rng.gaussian());
    Sample s;
    s.id = prefix + std::to_string(i);
    s.payload = v;
    s.role = role;
    out.push_back(std::move(s));
  }
  return out;
}

EnvelopeConfig toy_config() {
  EnvelopeConfig c;
  c.hidden = 16;
  c.feature_dim = 8;
  c.epochs = 10;
  c.batch = 32;
  c.cdc = false;
  c.augment = false;
  c.front = FrontEndKind::Identity;
  return c;
}

}  // namespace

TEST_CASE("learner forward") {
  EnvelopeModel m = fixture::toy_model(1);
  Eigen::VectorXf x(6);
  x << 0.5f, -1.0f, 0.25f, 2.0f, 0.0f, -0.75f;
  const FeatureVec h = learner_forward(m, Payload(x));
  const Eigen::VectorXd xd = x.cast<double>();
  const Eigen::VectorXd hidden = (m.learner.w1 * xd + m.learner.b1).array().tanh().matrix();
  const Eigen::VectorXd expected = (m.learner.w2 * hidden + m.learner.b2).array().tanh().matrix();
  CHECK((h - expected).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(learner_forward(m, Payload(x)) == h);

  m.learner = TwoLayerNet<double>::zeros(6, 10, 24, true);
  CHECK(learner_forward(m, Payload(x)).isZero(0));
  CHECK_THROWS_AS(learner_forward(m, Payload(Eigen::VectorXf::Zero(5))), Error);
}

TEST_CASE("loss_bce examples") {
  CHECK(loss_bce(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(2)) == doctest::Approx(1.386294).epsilon(1e-6));
  CHECK(loss_bce(Eigen::VectorXd::Constant(2, 30), Eigen::VectorXd::Constant(2, -30)) <= 1e-9);
  CHECK(loss_bce(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -1.0)) ==
        doctest::Approx(0.626523).epsilon(1e-6));
  // Clamped beyond +-30.
  CHECK(loss_bce(Eigen::VectorXd::Constant(1, -1000), Eigen::VectorXd::Constant(1, 0)) ==
        doctest::Approx(loss_bce(Eigen::VectorXd::Constant(1, -30), Eigen::VectorXd::Constant(1, 0))));
  CHECK_THROWS_AS(loss_bce(Eigen::VectorXd(0), Eigen::VectorXd::Zero(1)), Error);
  CHECK_THROWS_AS(loss_bce(Eigen::VectorXd::Zero(1), Eigen::VectorXd(0)), Error);
}

TEST_CASE("loss_tan examples") {
  TangentBasis e1;
  e1.dim = 2;
  e1.p = 1;
  e1.components = Eigen::MatrixXd::Zero(2, 1);
  e1.components(0, 0) = 1;
  Eigen::MatrixXd hr = Eigen::MatrixXd::Zero(2, 1), hf(2, 1);
  hf << 3, 4;
  CHECK(loss_tan(e1, hr, hf) == doctest::Approx(16.0));
  hf << 7, 0;
  CHECK(loss_tan(e1, hr, hf) == 0.0);
  CHECK_THROWS_AS(loss_tan(e1, Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Zero(3, 1)), Error);

  SeededRng rng(3);
  const TangentBasis b = pca_top_p(fixture::gaussian(30, 6, rng), 3);
  const Eigen::MatrixXd r = fixture::gaussian(6, 8, rng), f = fixture::gaussian(6, 8, rng);
  const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(6, 6) - b.components * b.components.transpose();
  double expected = 0;
  for (int j = 0; j < 8; ++j) expected += (proj * (f.col(j) - r.col(j))).squaredNorm();
  CHECK(std::abs(loss_tan(b, r, f) - expected / 8) < 1e-6);

  const TangentBasis full = pca_top_p(fixture::gaussian(30, 6, rng), 6);
  CHECK(loss_tan(full, r, f) < 1e-20);
}

TEST_CASE("total_loss composition") {
  const auto r0 = total_loss({1, 2, 3, 4}, {0, 0, 0});
  CHECK(r0.total == 1.0);
  const auto r = total_loss({1, 2, 3, 4}, {0.1, 1, 1});
  CHECK(r.total == doctest::Approx(8.2));
  CHECK(r.l_tan == 2.0);
  SeededRng rng(5);
  for (int i = 0; i < 20; ++i) {
    const LossParts p{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    const LossWeights w{rng.uniform(), rng.uniform(), rng.uniform()};
    CHECK(std::abs(total_loss(p, w).total - (p.bce + w.tan * p.tan + w.anc * p.anc + w.res * p.res)) < 1e-12);
  }
  try {
    total_loss({1, std::nan(""), 0, 0}, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
    CHECK(std::string(e.what()).find("tan") != std::string::npos);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto checks = fixture::gradient_check(fixture::toy_model(seed), fixture::toy_batch(seed + 10), 20, seed);
    for (const auto& c : checks) {
      INFO(c.block);
      CHECK(c.checked == 20);
      CHECK(c.max_rel_err <= 1e-3);
    }
  }
}

TEST_CASE("gradients without degraded views") {
  auto b = fixture::toy_batch(4);
  b.real_deg.resize(b.real.rows(), 0);
  b.fake_deg.resize(b.real.rows(), 0);
  b.anchor_real_deg.resize(0, 0);
  b.anchor_fake_deg.resize(0, 0);
  for (const auto& c : fixture::gradient_check(fixture::toy_model(4), b, 20, 4)) {
    INFO(c.block);
    CHECK(c.max_rel_err <= 1e-3);
  }
}

TEST_CASE("W has no gradient without the consistency terms") {
  auto m = fixture::toy_model(2);
  m.weights.anc = 0;
  m.weights.res = 0;
  const auto g = backward(m, fixture::toy_batch(3)).second;
  CHECK(g.proj.isZero(0));
}

TEST_CASE("duplicated batches give the same gradients") {
  const auto m = fixture::toy_model(6);
  const auto b = fixture::toy_batch(7);
  auto dup = [](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), 2 * x.cols());
    out << x, x;
    return out;
  };
  TrainingBatch d = b;
  for (auto* x : {&d.real, &d.fake, &d.real_deg, &d.fake_deg, &d.anchor_real, &d.anchor_fake, &d.anchor_real_deg,
                  &d.anchor_fake_deg})
    *x = dup(*x);
  const auto [r1, g1] = backward(m, b);
  const auto [r2, g2] = backward(m, d);
  CHECK(std::abs(r1.total - r2.total) < 1e-12);
  CHECK((g1.learner.w1 - g2.learner.w1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g1.disc_w - g2.disc_w).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g1.proj - g2.proj).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("non-finite inputs name the gradient block") {
  auto b = fixture::toy_batch(8);
  b.anchor_real(0, 0) = std::numeric_limits<double>::infinity();
  try {
    backward(fixture::toy_model(8), b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
  }
}

TEST_CASE("scores") {
  auto m = fixture::toy_model(9);
  m.meta = EnvelopeMeta{};
  m.disc_w.setZero();
  m.disc_b = 0;
  Sample s;
  s.id = "x";
  s.payload = Eigen::VectorXf::Ones(6);
  CHECK(score(m, s) == 0.5);

  m = fixture::toy_model(9);
  m.meta = EnvelopeMeta{};
  const auto samples = blob(0, 10, 6, Role::Real, 1, "s");
  const Eigen::VectorXd batch = score_batch(m, samples);
  for (int i = 0; i < 10; ++i) CHECK(batch(i) == score(m, samples[static_cast<std::size_t>(i)]));

  // Larger bias, larger logit, never a smaller score.
  const double before = score(m, s);
  m.disc_b += 1.0;
  CHECK(score(m, s) >= before);

  m.meta.reset();
  CHECK_THROWS_AS(score(m, s), Error);
}

TEST_CASE("envelope separates toy clusters") {
  const auto reals = blob(-2, 256, 8, Role::Real, 1, "r");
  const auto near = blob(2, 256, 8, Role::NearReal, 2, "n");
  SeededRng rng(3);
  const auto model = train_envelope(reals, near, nullptr, toy_config(), rng);
  const auto test_r = blob(-2, 200, 8, Role::Real, 11, "tr");
  const auto test_n = blob(2, 200, 8, Role::NearReal, 12, "tn");
  const Eigen::VectorXd sr = score_batch(model, test_r), sn = score_batch(model, test_n);
  CHECK((sr.array() > 0.5).count() >= 190);
  CHECK((sn.array() < 0.5).count() >= 190);
  REQUIRE(model.meta.has_value());
  CHECK(model.meta->epochs.size() == 10);
  CHECK(model.basis.dim == 8);
}

TEST_CASE("envelope training is deterministic") {
  const auto reals = blob(-1, 64, 8, Role::Real, 1, "r");
  const auto near = blob(1, 64, 8, Role::NearReal, 2, "n");
  SeededRng r1(3), r2(3);
  const auto a = train_envelope(reals, near, nullptr, toy_config(), r1);
  const auto b = train_envelope(reals, near, nullptr, toy_config(), r2);
  CHECK(a.learner.w1 == b.learner.w1);
  CHECK(a.disc_w == b.disc_w);
  CHECK(a.disc_b == b.disc_b);
}

TEST_CASE("tangency weight lowers the tangency loss") {
  const auto reals = blob(-0.5, 256, 8, Role::Real, 1, "r");
  const auto near = blob(0.5, 256, 8, Role::NearReal, 2, "n");
  auto cfg = toy_config();
  cfg.epochs = 20;
  cfg.weights.tan = 0;
  SeededRng r1(4), r2(4);
  const auto off = train_envelope(reals, near, nullptr, cfg, r1);
  cfg.weights.tan = 0.1;
  const auto on = train_envelope(reals, near, nullptr, cfg, r2);
  const double l_off = off.meta->epochs.back().l_tan, l_on = on.meta->epochs.back().l_tan;
  CHECK(l_off != l_on);
  CHECK(l_on < l_off);
}

TEST_CASE("training preconditions") {
  const auto reals = blob(-1, 16, 4, Role::Real, 1, "r");
  auto near = blob(1, 16, 4, Role::NearReal, 2, "n");
  SeededRng rng(1);
  CHECK_THROWS_AS(train_envelope(reals, std::vector<Sample>{}, nullptr, toy_config(), rng), Error);
  near[0].role = Role::Fake;
  CHECK_THROWS_AS(train_envelope(reals, near, nullptr, toy_config(), rng), Error);
  auto cfg = toy_config();
  cfg.cdc = true;
  near[0].role = Role::NearReal;
  CHECK_THROWS_AS(train_envelope(reals, near, nullptr, cfg, rng), Error);
}

TEST_CASE("consistency training leaves the anchor untouched") {
  const auto reals = blob(-1, 64, 8, Role::Real, 1, "r");
  const auto near = blob(1, 64, 8, Role::NearReal, 2, "n");
  InputLayout layout;
  layout.mode = PayloadMode::Vector;
  layout.vector_dim = 8;
  const auto anchor = cdc::AnchorEncoder::fixed_seed(layout, 16, 4, 77);
  const std::string before = anchor.fingerprint();
  auto cfg = toy_config();
  cfg.cdc = true;
  cfg.augment = true;
  cfg.epochs = 3;
  SeededRng rng(2);
  const auto m = train_envelope(reals, near, &anchor, cfg, rng);
  CHECK(anchor.fingerprint() == before);
  CHECK(m.anchor_fingerprint == before);
  CHECK(m.proj.rows() == 4);
  CHECK(m.meta->epochs.back().l_res > 0);
}

TEST_CASE("spectral front end on images") {
  const auto imgs = worldgen::gen_real(1, 4, PayloadMode::Image);
  const FrontEnd fe = FrontEnd::for_layout(InputLayout::of(imgs[0]));
  CHECK(fe.kind == FrontEndKind::Spectral);
  const Eigen::MatrixXd feats = apply_front_end(fe, to_inputs(imgs, fe.layout));
  CHECK(feats.rows() == fe.dim());
  CHECK(feats.cols() == 4);
  CHECK(feats.allFinite());
  // Cell means of a constant image are all equal.
  Image flat(32, 32, 1, 0.25f);
  const Eigen::VectorXd f = apply_front_end(fe, flatten(flat));
  const Eigen::VectorXd cells = f.tail(fe.grid * fe.grid);
  CHECK((cells.array() - (2 * 0.25 - 1)).abs().maxCoeff() < 1e-9);
}

TEST_CASE("checkpoint round-trip") {
  const fs::path dir = fs::temp_directory_path() / "rem_test_envelope";
  fs::create_directories(dir);
  const auto reals = blob(-1, 64, 8, Role::Real, 1, "r");
  const auto near = blob(1, 64, 8, Role::NearReal, 2, "n");
  SeededRng rng(3);
  const auto m = train_envelope(reals, near, nullptr, toy_config(), rng);
  save_envelope(m, dir / "m.remee");
  const auto back = load_envelope(dir / "m.remee");
  CHECK(back.learner.w1 == m.learner.w1);
  CHECK(back.learner.b2 == m.learner.b2);
  CHECK(back.disc_w == m.disc_w);
  CHECK(back.disc_b == m.disc_b);
  CHECK(back.basis.components == m.basis.components);
  CHECK(back.weights == m.weights);
  CHECK(back.front == m.front);
  const Eigen::VectorXd s1 = score_batch(m, reals), s2 = score_batch(back, reals);
  CHECK(s1 == s2);
  save_envelope(back, dir / "b.remee");
  std::ifstream fa(dir / "m.remee", std::ios::binary), fb(dir / "b.remee", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(sa == sb);
  CHECK(sa.substr(0, 6) == "REMEE1");
  CHECK(fs::exists(dir / "m.remee.txt"));
  fs::remove_all(dir);
}
