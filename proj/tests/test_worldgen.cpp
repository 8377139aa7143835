#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "rem/error.hpp"
#include "rem/worldgen.hpp"

using namespace rem;
namespace fs = std::filesystem;

namespace {

bool same_payload(const Sample& a, const Sample& b) {
  if (a.is_image() != b.is_image()) return false;
  if (a.is_image()) return a.image() == b.image();
  return a.vector().size() == b.vector().size() && a.vector() == b.vector();
}

bool same_corpus(const std::vector<Sample>& a, const std::vector<Sample>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].id != b[i].id || a[i].seed != b[i].seed || !same_payload(a[i], b[i])) return false;
  return true;
}

double residual(const worldgen::Embedding& psi, const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
  return (psi(u) - y).norm();
}

// Coarse grid over [-1, 1]^m, then repeated local grids with shrinking step.
double grid_fit_residual(const worldgen::Embedding& psi, const Eigen::VectorXd& y) {
  const int m = psi.latent_dim();
  Eigen::VectorXd best = Eigen::VectorXd::Zero(m);
  double best_r = residual(psi, best, y);
  auto search = [&](const Eigen::VectorXd& center, double step, int half) {
    const int side = 2 * half + 1;
    long total = 1;
    for (int i = 0; i < m; ++i) total *= side;
    Eigen::VectorXd best_here = best;
    for (long code = 0; code < total; ++code) {
      Eigen::VectorXd u = center;
      long c = code;
      for (int i = 0; i < m; ++i) {
        u(i) += step * static_cast<double>(c % side - half);
        c /= side;
      }
      const double r = residual(psi, u, y);
      if (r < best_r) {
        best_r = r;
        best_here = u;
      }
    }
    best = best_here;
  };
  search(Eigen::VectorXd::Zero(m), 0.2, 5);
  for (double step = 0.1; step > 1e-7; step *= 0.4) search(best, step, 2);
  return best_r;
}

}  // namespace

TEST_CASE("generation is deterministic and seed sensitive") {
  for (auto mode : {PayloadMode::Image, PayloadMode::Vector}) {
    const auto a = worldgen::gen_real(1, 8, mode);
    CHECK(same_corpus(a, worldgen::gen_real(1, 8, mode)));
    const auto b = worldgen::gen_real(2, 8, mode);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) any_diff |= !same_payload(a[i], b[i]);
    CHECK(any_diff);
    for (const auto& f : worldgen::kFamilies)
      CHECK(same_corpus(worldgen::gen_fake(f, 5, 4, mode), worldgen::gen_fake(f, 5, 4, mode)));
  }
}

TEST_CASE("real images are in range and sized") {
  for (const auto& s : worldgen::gen_real(3, 16, PayloadMode::Image)) {
    REQUIRE(s.is_image());
    CHECK(s.role == Role::Real);
    CHECK(s.image().height() == 32);
    CHECK(s.image().width() == 32);
    CHECK(s.image().planes[0].minCoeff() >= 0.0f);
    CHECK(s.image().planes[0].maxCoeff() <= 1.0f);
  }
}

TEST_CASE("fakes carry role and family") {
  for (const auto& f : worldgen::kFamilies)
    for (const auto& s : worldgen::gen_fake(f, 9, 6, PayloadMode::Image)) {
      CHECK(s.role == Role::Fake);
      REQUIRE(s.family.has_value());
      CHECK(*s.family == f);
    }
  try {
    worldgen::gen_fake("moire", 1, 1, PayloadMode::Image);
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("checker") != std::string::npos);
    CHECK(msg.find("notch") != std::string::npos);
    CHECK(msg.find("quant") != std::string::npos);
  }
  CHECK_THROWS_AS(worldgen::gen_real(1, 0, PayloadMode::Image), Error);
}

TEST_CASE("checker fakes carry more high-frequency energy") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto reals = worldgen::gen_real(seed, 64, PayloadMode::Image);
    const auto fakes = worldgen::gen_fake("checker", seed, 64, PayloadMode::Image);
    double r = 0, f = 0;
    for (std::size_t i = 0; i < reals.size(); ++i) {
      r += worldgen::high_frequency_ratio(reals[i].image());
      f += worldgen::high_frequency_ratio(fakes[i].image());
    }
    CHECK(f > r);
  }
}

TEST_CASE("fakes share the base content of the same-seed reals") {
  const auto reals = worldgen::gen_real(4, 8, PayloadMode::Image);
  const auto quant = worldgen::gen_fake("quant", 4, 8, PayloadMode::Image);
  for (std::size_t i = 0; i < reals.size(); ++i) {
    const float diff = (reals[i].image().planes[0] - quant[i].image().planes[0]).abs().maxCoeff();
    CHECK(diff <= 0.5f / 15.0f + 1e-6f);
  }
}

TEST_CASE("quant fakes sit on the level grid") {
  worldgen::WorldParams p;
  for (const auto& s : worldgen::gen_fake("quant", 6, 4, PayloadMode::Image, p)) {
    const auto scaled = s.image().planes[0] * static_cast<float>(p.quant_levels - 1);
    CHECK((scaled - scaled.round()).abs().maxCoeff() < 1e-3f);
  }
}

TEST_CASE("noise-free vectors lie on the embedded manifold") {
  worldgen::WorldParams p;
  p.vector_noise = 0;
  const worldgen::Embedding psi(p);
  for (const auto& s : worldgen::gen_real(8, 4, PayloadMode::Vector, p)) {
    REQUIRE(s.vector().size() == p.ambient_dim);
    CHECK(grid_fit_residual(psi, s.vector().cast<double>()) <= 1e-3);
  }
}

TEST_CASE("corpus files round-trip") {
  const fs::path dir = fs::temp_directory_path() / "rem_test_worldgen";
  fs::remove_all(dir);
  std::vector<Sample> samples = worldgen::gen_real(2, 3, PayloadMode::Image);
  for (const auto& s : worldgen::gen_fake("notch", 2, 2, PayloadMode::Image)) samples.push_back(s);
  const auto manifest = write_corpus(samples, dir / "img");
  const auto back = read_corpus(manifest);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i].id == samples[i].id);
    CHECK(back[i].role == samples[i].role);
    CHECK(back[i].family == samples[i].family);
    CHECK(back[i].seed == samples[i].seed);
    CHECK(same_payload(back[i], samples[i]));
  }

  const auto vecs = worldgen::gen_real(2, 3, PayloadMode::Vector);
  const auto vback = read_corpus(write_corpus(vecs, dir / "vec"));
  for (std::size_t i = 0; i < vecs.size(); ++i) CHECK(same_payload(vback[i], vecs[i]));

  fs::remove(dir / "img" / "payloads" / (back.front().id + ".pgm"));
  CHECK_THROWS_AS(read_corpus(manifest), Error);
  try {
    read_corpus(dir / "nothing.tsv");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingFile);
  }
  fs::remove_all(dir);
}

TEST_CASE("duplicate ids are rejected") {
  auto samples = worldgen::gen_real(2, 2, PayloadMode::Vector);
  samples[1].id = samples[0].id;
  CHECK_THROWS_AS(write_corpus(samples, fs::temp_directory_path() / "rem_test_dup"), Error);
  fs::remove_all(fs::temp_directory_path() / "rem_test_dup");
}
