#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "rem/config.hpp"
#include "rem/error.hpp"

using namespace rem;

namespace {

std::string parse_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("default config round-trips") {
  const ExperimentConfig c;
  CHECK(parse_config(serialize_config(c)) == c);
  CHECK(parse_config("") == c);
  CHECK(serialize_config(parse_config(serialize_config(c))) == serialize_config(c));
}

TEST_CASE("modified config round-trips") {
  ExperimentConfig c;
  c.seed = 42;
  c.mode = PayloadMode::Vector;
  c.n_real = 128;
  c.epsilon = 0.0375;
  c.resample_per_epoch = false;
  c.weights.tan = 0.1234567890123;
  c.weights.res = 3.0;
  c.cdc_enabled = false;
  c.anchor = "fixed-seed";
  c.profile = "postprocess";
  c.chain_k_min = 0;
  c.chain_k_max = 8;
  c.freq_mode = "mean_spectrum";
  c.train_family = "notch";
  c.policy.jpeg_q_min = 60;
  const ExperimentConfig back = parse_config(serialize_config(c));
  CHECK(back == c);
  CHECK(back.weights.tan == c.weights.tan);
}

TEST_CASE("comments, blank lines and whitespace") {
  const auto c = parse_config("# a comment\n\n[run]\n  seed   =  9  \n; other\n[ee]\nepochs=3\n");
  CHECK(c.seed == 9);
  CHECK(c.ee_epochs == 3);
}

TEST_CASE("parse errors name the line") {
  CHECK(parse_error("[run]\nseed = 1\n[nope]\n").find("line 3") != std::string::npos);
  const std::string unknown = parse_error("[run]\nseed = 1\n\nspeed = 2\n");
  CHECK(unknown.find("line 4") != std::string::npos);
  CHECK(unknown.find("run.speed") != std::string::npos);
  CHECK(parse_error("[run]\nseed = 1\nseed = 2\n").find("duplicate") != std::string::npos);
  CHECK(parse_error("seed = 1\n").find("line 1") != std::string::npos);
  CHECK(parse_error("[run]\nseed\n").find("line 2") != std::string::npos);
  CHECK(parse_error("[run\n").find("line 1") != std::string::npos);
  CHECK(parse_error("[ee]\nepochs = many\n").find("line 2") != std::string::npos);
  CHECK(parse_error("[mbr]\nresample_per_epoch = yes\n").find("line 2") != std::string::npos);
}

TEST_CASE("validation") {
  CHECK(!parse_error("[chainsim]\nk_min = 5\nk_max = 2\n").empty());
  CHECK(!parse_error("[chainsim]\nprofile = social\n").empty());
  CHECK(!parse_error("[eval]\ntrain_family = gan\n").empty());
  CHECK(!parse_error("[mbr]\nmask_ratio = 0\n").empty());
  CHECK(!parse_error("[ee]\nlambda_tan = -1\n").empty());
  CHECK(!parse_error("[cdc]\nanchor = clip\n").empty());
  ExperimentConfig c;
  c.n_eval = 0;
  CHECK_THROWS_AS(validate(c), Error);
  CHECK_NOTHROW(validate(ExperimentConfig{}));
}

TEST_CASE("files") {
  const auto dir = std::filesystem::temp_directory_path() / "rem_config_test";
  std::filesystem::create_directories(dir);
  ExperimentConfig c;
  c.seed = 3;
  save_config(c, dir / "a.ini");
  CHECK(load_config(dir / "a.ini") == c);
  try {
    load_config(dir / "missing.ini");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingFile);
    CHECK(std::string(e.what()).find("missing.ini") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("every key is documented and serialized") {
  const std::string text = serialize_config(ExperimentConfig{});
  std::set<std::string> seen;
  for (const auto& k : config_keys()) {
    CHECK(!k.doc.empty());
    CHECK(seen.insert(k.section + "." + k.key).second);
    CHECK(text.find("\n" + k.key + " = ") != std::string::npos);
  }
  CHECK(seen.size() >= 30);
}

TEST_CASE("derived settings") {
  ExperimentConfig c;
  CHECK(resolved_latent_dim(c) == 16);
  c.mode = PayloadMode::Vector;
  CHECK(resolved_latent_dim(c) == 8);
  c.ae.latent_dim = 5;
  CHECK(resolved_latent_dim(c) == 5);

  c = ExperimentConfig{};
  c.ee_hidden = 48;
  c.feature_dim = 24;
  c.ee_lr = 5e-4;
  c.weights.anc = 2.5;
  c.augment = false;
  const auto e = envelope_config(c);
  CHECK(e.hidden == 48);
  CHECK(e.feature_dim == 24);
  CHECK(e.lr == 5e-4);
  CHECK(e.weights.anc == 2.5);
  CHECK(e.cdc);
  CHECK(!e.augment);
  CHECK(e.epochs == c.ee_epochs);
  CHECK(e.batch == c.ee_batch);
}
