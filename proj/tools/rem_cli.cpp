#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "rem/config.hpp"
#include "rem/error.hpp"
#include "rem/evalkit.hpp"
#include "rem/experiment.hpp"

namespace fs = std::filesystem;
using namespace rem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitMissing = 3;
constexpr int kExitDivergence = 4;

fs::path manifest_path(const fs::path& p) {
  const fs::path resolved = fs::is_directory(p) ? p / "manifest.tsv" : p;
  require(fs::exists(resolved), ErrorKind::MissingFile, "missing file: " + resolved.string());
  return resolved;
}

fs::path model_path(const fs::path& p) {
  const fs::path resolved = fs::is_directory(p) ? p / "envelope.remee" : p;
  require(fs::exists(resolved), ErrorKind::MissingFile, "missing file: " + resolved.string());
  return resolved;
}

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_config(path);
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    require(static_cast<bool>(is >> v) && is.eof(), ErrorKind::InvalidArgument,
            std::string("bad ") + what + " list: '" + text + "'");
    out.push_back(v);
  }
  require(!out.empty(), ErrorKind::InvalidArgument, std::string("empty ") + what + " list");
  return out;
}

std::string family_or_dash(const std::optional<std::string>& f) { return f ? *f : "-"; }

// Fakes only; reals carry no family.
evalkit::LabeledFeatures labeled_features(const envelope::EnvelopeModel& model, const std::vector<Sample>& samples) {
  std::vector<Sample> fakes;
  evalkit::LabeledFeatures lf;
  for (const auto& s : samples) {
    if (s.role != Role::Fake) continue;
    require(s.family.has_value(), ErrorKind::InvalidArgument, "attribute: sample '" + s.id + "' has no family");
    lf.labels.push_back(*s.family);
    fakes.push_back(s);
  }
  require(!fakes.empty(), ErrorKind::InsufficientSamples, "attribute: corpus holds no fakes");
  lf.features = envelope::learner_features(model, fakes);
  return lf;
}

// gen-data ----------------------------------------------------------------

struct GenOpts {
  std::uint64_t seed = 1;
  int n = 64;
  std::string mode = "image";
  std::string family = "real";
  std::string config;
  std::string out;
};

void cmd_gen(const GenOpts& o) {
  const ExperimentConfig cfg = config_or_default(o.config);
  const PayloadMode mode = parse_mode(o.mode);
  std::vector<Sample> samples;
  auto add = [&](std::vector<Sample> more) { samples.insert(samples.end(), more.begin(), more.end()); };
  if (o.family == "real" || o.family == "all")
    add(worldgen::gen_real(experiment::derive_seed(o.seed, "real"), o.n, mode, cfg.world));
  for (const auto& f : worldgen::kFamilies)
    if (o.family == f || o.family == "all")
      add(worldgen::gen_fake(f, experiment::derive_seed(o.seed, f), o.n, mode, cfg.world));
  require(!samples.empty(), ErrorKind::InvalidArgument,
          "unknown family '" + o.family + "' (valid: real, checker, notch, quant, all)");
  std::cout << write_corpus(samples, o.out).string() << "\n";
}

// degrade -----------------------------------------------------------------

struct DegradeOpts {
  std::string manifest;
  std::string profile = "mixed";
  std::string k_range = "2,4";
  std::uint64_t seed = 1;
  std::string out;
};

void cmd_degrade(const DegradeOpts& o) {
  const auto k = parse_list<int>(o.k_range, "k-range");
  require(k.size() == 2, ErrorKind::InvalidArgument, "--k-range takes two values, e.g. 2,4");
  const auto samples = read_corpus(manifest_path(o.manifest));
  const auto out = experiment::degrade_corpus(samples, chainsim::parse_profile(o.profile), k[0], k[1], o.seed);
  std::cout << write_corpus(out, o.out).string() << "\n";
}

// train -------------------------------------------------------------------

struct TrainOpts {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void cmd_train(const TrainOpts& o) {
  ExperimentConfig cfg = config_or_default(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out = o.out;
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  save_config(cfg, dir / "config.ini");

  const auto reals = experiment::training_reals(cfg);
  const auto rem = experiment::train_rem(cfg, reals);
  mbr::save_autoencoder(rem.ae, dir / "autoencoder.remae");
  envelope::save_envelope(rem.model, dir / "envelope.remee");

  evalkit::Table t{{"epoch", "l_bce", "l_tan", "l_anc", "l_res", "total", "grad_norm"}, {}};
  int epoch = 0;
  for (const auto& r : rem.model.meta->epochs)
    t.rows.push_back({std::to_string(epoch++), evalkit::format_number(r.l_bce), evalkit::format_number(r.l_tan),
                      evalkit::format_number(r.l_anc), evalkit::format_number(r.l_res),
                      evalkit::format_number(r.total), evalkit::format_number(r.grad_norm)});
  evalkit::write_csv(t, dir / "training.csv");

  std::ofstream anchor(dir / "anchor.txt");
  anchor << "source=" << (rem.anchor ? rem.anchor->source() : "none") << "\n"
         << "sha256_before=" << rem.anchor_hash_before << "\n"
         << "sha256_after=" << rem.anchor_hash_after << "\n";
  std::cout << "autoencoder loss " << rem.ae.meta->final_loss() << ", envelope loss "
            << rem.model.meta->epochs.back().total << "\n";
}

// score -------------------------------------------------------------------

struct ScoreOpts {
  std::string model;
  std::string manifest;
  std::string out;
};

void cmd_score(const ScoreOpts& o) {
  const auto model = envelope::load_envelope(model_path(o.model));
  const auto samples = read_corpus(manifest_path(o.manifest));
  const Eigen::VectorXd s = envelope::score_batch(model, samples);
  evalkit::Table t{{"id", "role", "family", "score"}, {}};
  for (std::size_t i = 0; i < samples.size(); ++i)
    t.rows.push_back({samples[i].id, to_string(samples[i].role), family_or_dash(samples[i].family),
                      evalkit::format_number(s[static_cast<Eigen::Index>(i)])});
  evalkit::write_csv(t, o.out);
}

// eval --------------------------------------------------------------------

struct EvalOpts {
  std::string scores;
  std::string labels;
  std::string out;
  bool by_family = false;
  bool ap = false;
  double threshold = 0.5;
  std::string plot;
};

void cmd_eval(const EvalOpts& o) {
  require(fs::exists(o.scores), ErrorKind::MissingFile, "missing file: " + o.scores);
  const evalkit::Table in = evalkit::read_csv(o.scores);
  auto col = [&](const std::string& name) -> long {
    for (std::size_t i = 0; i < in.header.size(); ++i)
      if (in.header[i] == name) return static_cast<long>(i);
    return -1;
  };
  const long id_col = col("id"), score_col = col("score"), role_col = col("role"), fam_col = col("family");
  require(id_col >= 0 && score_col >= 0, ErrorKind::Parse, o.scores + ": needs id and score columns");

  std::map<std::string, std::pair<Role, std::optional<std::string>>> truth;
  if (!o.labels.empty()) {
    for (const auto& e : read_manifest(manifest_path(o.labels)).entries) truth[e.id] = {e.role, e.family};
  } else {
    require(role_col >= 0, ErrorKind::Parse, o.scores + ": no role column and no --labels");
    for (const auto& r : in.rows) {
      std::optional<std::string> fam;
      if (fam_col >= 0 && r[fam_col] != "-") fam = r[fam_col];
      truth[r[id_col]] = {parse_role(r[role_col]), fam};
    }
  }

  std::vector<double> scores;
  std::vector<evalkit::Label> labels;
  std::vector<std::string> families;
  for (const auto& r : in.rows) {
    const auto it = truth.find(r[id_col]);
    require(it != truth.end(), ErrorKind::InvalidArgument, "no label for id '" + r[id_col] + "'");
    scores.push_back(std::stod(r[score_col]));
    labels.push_back(it->second.first == Role::Real ? evalkit::Label::Real : evalkit::Label::Fake);
    families.push_back(it->second.first == Role::Real ? "" : it->second.second.value_or("unlabeled"));
  }

  evalkit::Table t{{"scope", "n_real", "n_fake", "r_acc", "f_acc", "b_acc"}, {}};
  if (o.ap) t.header.push_back("ap");
  std::vector<std::pair<std::string, double>> bars;
  auto emit = [&](const std::string& scope, const std::vector<double>& s, const std::vector<evalkit::Label>& l) {
    const auto a = evalkit::accuracy_metrics(s, l, o.threshold);
    std::vector<std::string> row = {scope, std::to_string(a.n_real), std::to_string(a.n_fake),
                                    evalkit::format_number(a.r_acc), evalkit::format_number(a.f_acc),
                                    evalkit::format_number(a.b_acc)};
    if (o.ap) row.push_back(evalkit::format_number(evalkit::average_precision(s, l)));
    t.rows.push_back(row);
    bars.emplace_back(scope, a.b_acc);
  };
  emit("all", scores, labels);
  if (o.by_family) {
    std::map<std::string, int> seen;
    for (const auto& f : families)
      if (!f.empty()) seen[f];
    for (const auto& [fam, unused] : seen) {
      std::vector<double> s;
      std::vector<evalkit::Label> l;
      for (std::size_t i = 0; i < scores.size(); ++i)
        if (families[i].empty() || families[i] == fam) {
          s.push_back(scores[i]);
          l.push_back(labels[i]);
        }
      emit(fam, s, l);
    }
  }
  evalkit::write_csv(t, o.out);
  if (!o.plot.empty()) evalkit::write_bar_svg(bars, "balanced accuracy", o.plot);
}

// attribute ---------------------------------------------------------------

struct AttributeOpts {
  std::string model;
  std::string gallery;
  std::string queries;
  std::string mode = "closed";
  std::string out;
  double tau = 0;
  double tau_scale = 3.0;
  std::uint64_t seed = 1;
};

void cmd_attribute(const AttributeOpts& o) {
  const auto model = envelope::load_envelope(model_path(o.model));
  const auto gallery = labeled_features(model, read_corpus(manifest_path(o.gallery)));
  const auto queries = labeled_features(model, read_corpus(manifest_path(o.queries)));
  evalkit::AttributionReport r;
  if (o.mode == "open") {
    r = evalkit::attribute_open(gallery, queries, o.tau, o.tau_scale);
  } else {
    require(o.mode == "closed", ErrorKind::InvalidArgument, "--mode must be closed or open");
    evalkit::HeadConfig head;
    head.seed = o.seed;
    r = evalkit::attribute_closed(gallery, queries, head);
  }
  evalkit::Table t{{"family"}, {}};
  t.header.insert(t.header.end(), r.columns.begin(), r.columns.end());
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    std::vector<std::string> row = {r.families[static_cast<std::size_t>(i)]};
    for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) row.push_back(std::to_string(r.confusion(i, j)));
    t.rows.push_back(row);
  }
  evalkit::write_csv(t, o.out);
  std::cout << "mode=" << r.mode << " accuracy=" << evalkit::format_number(r.accuracy);
  if (r.mode == "open") std::cout << " tau=" << evalkit::format_number(r.tau_open);
  std::cout << "\n";
}

// diagnose ----------------------------------------------------------------

struct DiagnoseOpts {
  std::string a;
  std::string b;
  bool dg = false;
  bool deltaf = false;
  std::string model;
  std::string sweep_k;
  std::string profile = "mixed";
  std::string freq_mode = "paired";
  bool resample = false;
  std::uint64_t seed = 1;
  std::string out;
  std::string plot;
};

void cmd_diagnose(const DiagnoseOpts& o) {
  require(o.dg != o.deltaf, ErrorKind::InvalidArgument, "choose exactly one of --dg and --deltaf");
  const auto a = read_corpus(manifest_path(o.a));
  const auto b = read_corpus(manifest_path(o.b));
  evalkit::Table t;
  if (o.dg) {
    require(!o.model.empty(), ErrorKind::InvalidArgument, "--dg needs --model");
    const auto model = envelope::load_envelope(model_path(o.model));
    const double d = evalkit::feature_discrepancy(envelope::learner_features(model, a),
                                                  envelope::learner_features(model, b));
    t = {{"metric", "value"}, {{"d_g", evalkit::format_number(d)}}};
    std::cout << "d_g=" << evalkit::format_number(d) << "\n";
  } else {
    std::vector<Image> ia, ib;
    for (const auto& s : a) {
      require(s.is_image(), ErrorKind::InvalidArgument, "--deltaf needs image corpora");
      ia.push_back(s.image());
    }
    for (const auto& s : b) {
      require(s.is_image(), ErrorKind::InvalidArgument, "--deltaf needs image corpora");
      ib.push_back(s.image());
    }
    const auto mode = evalkit::parse_freq_mode(o.freq_mode);
    const std::vector<int> ks = o.sweep_k.empty() ? std::vector<int>{0} : parse_list<int>(o.sweep_k, "k");
    const auto points = experiment::freq_sweep(ia, ib, ks, chainsim::parse_profile(o.profile), o.seed, mode, o.resample);
    t = {{"k", "delta_f"}, {}};
    std::vector<double> xs, ys;
    for (const auto& p : points) {
      t.rows.push_back({std::to_string(p.k), evalkit::format_number(p.delta_f)});
      xs.push_back(p.k);
      ys.push_back(p.delta_f);
      std::cout << "k=" << p.k << " delta_f=" << evalkit::format_number(p.delta_f) << "\n";
    }
    if (points.size() > 1) std::cout << "spearman=" << evalkit::format_number(evalkit::spearman(xs, ys)) << "\n";
    if (!o.plot.empty()) evalkit::write_line_svg(xs, ys, "delta f vs chain length", o.plot);
  }
  evalkit::write_csv(t, o.out);
}

// ablate ------------------------------------------------------------------

struct AblateOpts {
  std::string config;
  std::vector<std::string> drop;
  std::string seeds = "1,2,3,4,5";
  std::string out;
  std::string plot;
};

void cmd_ablate(const AblateOpts& o) {
  ExperimentConfig cfg = config_or_default(o.config);
  std::vector<experiment::Drop> drops;
  for (const auto& d : o.drop) drops.push_back(experiment::parse_drop(d));
  const auto seeds = parse_list<std::uint64_t>(o.seeds, "seed");
  const auto rows = experiment::run_ablation(cfg, drops, seeds);

  const fs::path out = o.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_config(cfg, fs::path(out).replace_extension(".config.ini"));
  evalkit::Table t{{"seed", "variant", "clean_b_acc", "degraded_b_acc"}, {}};
  std::map<std::string, std::pair<double, double>> mean;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.seed), r.variant, evalkit::format_number(r.clean_b_acc),
                      evalkit::format_number(r.degraded_b_acc)});
    if (!mean.count(r.variant)) order.push_back(r.variant);
    mean[r.variant].first += r.clean_b_acc / static_cast<double>(seeds.size());
    mean[r.variant].second += r.degraded_b_acc / static_cast<double>(seeds.size());
  }
  const double full = mean["full"].second;
  std::vector<std::pair<std::string, double>> bars;
  for (const auto& v : order) {
    t.rows.push_back({"mean", v, evalkit::format_number(mean[v].first), evalkit::format_number(mean[v].second)});
    bars.emplace_back(v, mean[v].second);
    std::cout << v << ": clean " << evalkit::format_number(mean[v].first) << ", degraded "
              << evalkit::format_number(mean[v].second) << " (" << evalkit::format_number(mean[v].second - full)
              << " vs full)\n";
  }
  evalkit::write_csv(t, out);
  if (!o.plot.empty()) evalkit::write_bar_svg(bars, "chain-degraded balanced accuracy", o.plot);
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::MissingFile: return kExitMissing;
    case ErrorKind::Divergence:
    case ErrorKind::NonFinite: return kExitDivergence;
    case ErrorKind::Parse:
    case ErrorKind::InvalidArgument: return kExitUsage;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("REM_THREADS")) {
    const int n = std::atoi(t);
    if (n > 0) Eigen::setNbThreads(n);
  }

  CLI::App app{"REM: real-manifold envelope detector"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  g->add_option("--seed", gen.seed);
  g->add_option("--n", gen.n, "Samples per family")->check(CLI::PositiveNumber);
  g->add_option("--mode", gen.mode)->check(CLI::IsMember({"image", "vector"}));
  g->add_option("--family", gen.family, "real, checker, notch, quant or all");
  g->add_option("--config", gen.config, "World parameters");
  g->add_option("--out", gen.out)->required();

  DegradeOpts deg;
  auto* d = app.add_subcommand("degrade", "Apply seeded degradation chains to a corpus");
  d->add_option("--manifest", deg.manifest)->required();
  d->add_option("--profile", deg.profile)->check(CLI::IsMember({"propagation", "postprocess", "mixed"}));
  d->add_option("--k-range", deg.k_range, "k_min,k_max");
  d->add_option("--seed", deg.seed);
  d->add_option("--out", deg.out)->required();

  TrainOpts train;
  auto* tr = app.add_subcommand("train", "Train autoencoder and envelope");
  tr->add_option("--config", train.config);
  tr->add_option("--out", train.out);
  tr->add_option("--seed", train.seed);

  ScoreOpts score;
  auto* sc = app.add_subcommand("score", "Score a corpus");
  sc->add_option("--model", score.model)->required();
  sc->add_option("--manifest", score.manifest)->required();
  sc->add_option("--out", score.out)->required();

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "Accuracy report from a scores CSV");
  e->add_option("--scores", ev.scores)->required();
  e->add_option("--labels", ev.labels, "Manifest holding the ground truth");
  e->add_option("--out", ev.out)->required();
  e->add_flag("--by-family", ev.by_family);
  e->add_flag("--ap", ev.ap);
  e->add_option("--threshold", ev.threshold);
  e->add_option("--plot", ev.plot, "SVG path");

  AttributeOpts at;
  auto* a = app.add_subcommand("attribute", "Generator attribution on learner features");
  a->add_option("--model", at.model)->required();
  a->add_option("--gallery", at.gallery)->required();
  a->add_option("--queries", at.queries)->required();
  a->add_option("--mode", at.mode)->check(CLI::IsMember({"closed", "open"}));
  a->add_option("--tau", at.tau, "Open-set radius; 0 picks it from the gallery");
  a->add_option("--tau-scale", at.tau_scale);
  a->add_option("--seed", at.seed);
  a->add_option("--out", at.out)->required();

  DiagnoseOpts dg;
  auto* di = app.add_subcommand("diagnose", "Feature and spectral discrepancy between two corpora");
  di->add_option("--manifest-a", dg.a)->required();
  di->add_option("--manifest-b", dg.b)->required();
  di->add_flag("--dg", dg.dg);
  di->add_flag("--deltaf", dg.deltaf);
  di->add_option("--model", dg.model);
  di->add_option("--sweep-k", dg.sweep_k, "Chain lengths, e.g. 0,1,2,4,8");
  di->add_option("--profile", dg.profile)->check(CLI::IsMember({"propagation", "postprocess", "mixed"}));
  di->add_option("--freq-mode", dg.freq_mode)->check(CLI::IsMember({"paired", "mean_spectrum"}));
  di->add_flag("--resample", dg.resample, "Resize degraded pairs back to the input size before the DFT");
  di->add_option("--seed", dg.seed);
  di->add_option("--out", dg.out)->required();
  di->add_option("--plot", dg.plot, "SVG path");

  AblateOpts ab;
  auto* ablate = app.add_subcommand("ablate", "Full model against component-dropped variants");
  ablate->add_option("--config", ab.config);
  ablate->add_option("--drop", ab.drop, "mbr, tan, cdc, aug")->required()->delimiter(',');
  ablate->add_option("--seeds", ab.seeds);
  ablate->add_option("--out", ab.out)->required();
  ablate->add_option("--plot", ab.plot, "SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitUsage;
  }

  try {
    if (*g) cmd_gen(gen);
    else if (*d) cmd_degrade(deg);
    else if (*tr) cmd_train(train);
    else if (*sc) cmd_score(score);
    else if (*e) cmd_eval(ev);
    else if (*a) cmd_attribute(at);
    else if (*di) cmd_diagnose(dg);
    else if (*ablate) cmd_ablate(ab);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code(err);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
