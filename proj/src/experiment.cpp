#include "rem/experiment.hpp"

#include <algorithm>

#include "rem/error.hpp"
#include "rem/rng.hpp"

namespace rem::experiment {

std::uint64_t derive_seed(std::uint64_t master, const std::string& purpose) {
  return mix_seed(master, hash_string(purpose));
}

std::vector<Sample> training_reals(const ExperimentConfig& config) {
  return worldgen::gen_real(derive_seed(config.seed, "train.real"), config.n_real, config.mode, config.world);
}

mbr::Autoencoder train_mbr(const ExperimentConfig& config, const std::vector<Sample>& reals) {
  mbr::AutoencoderConfig ae = config.ae;
  ae.latent_dim = resolved_latent_dim(config);
  SeededRng rng(derive_seed(config.seed, "mbr"));
  return mbr::train_autoencoder(reals, ae, rng);
}

TrainedRem train_rem(const ExperimentConfig& config, const std::vector<Sample>& reals,
                     const mbr::Autoencoder* pretrained) {
  TrainedRem out;
  out.ae = pretrained ? *pretrained : train_mbr(config, reals);
  if (config.cdc_enabled) {
    out.anchor = config.anchor == "mbr-encoder"
                     ? cdc::AnchorEncoder::from_autoencoder(out.ae)
                     : cdc::AnchorEncoder::fixed_seed(InputLayout::of(reals.front()), config.anchor_hidden,
                                                      config.anchor_dim, derive_seed(config.seed, "anchor"));
    out.anchor_hash_before = out.anchor->fingerprint();
  }
  mbr::PerturbSpec spec;
  spec.mask_ratio = config.mask_ratio;
  spec.epsilon = config.epsilon;
  spec.seed = derive_seed(config.seed, "near_real");
  const mbr::Autoencoder& ae = out.ae;
  envelope::NegativeSource source;
  if (config.resample_per_epoch) {
    source = [&ae, &reals, spec](int epoch) {
      return mbr::generate_near_real(ae, reals, spec, SeededRng(spec.seed, static_cast<std::uint64_t>(epoch)));
    };
  } else {
    auto fixed = std::make_shared<std::vector<Sample>>(mbr::generate_near_real(ae, reals, spec, SeededRng(spec.seed)));
    source = [fixed](int) { return *fixed; };
  }
  SeededRng rng(derive_seed(config.seed, "ee"));
  out.model = envelope::train_envelope(reals, source, out.anchor ? &*out.anchor : nullptr,
                                       envelope_config(config), rng);
  if (out.anchor) out.anchor_hash_after = out.anchor->fingerprint();
  return out;
}

envelope::EnvelopeModel train_baseline(const ExperimentConfig& config, const std::vector<Sample>& reals) {
  const auto fakes = worldgen::gen_fake(config.train_family, derive_seed(config.seed, "baseline.fake"),
                                        static_cast<int>(reals.size()), config.mode, config.world);
  SeededRng rng(derive_seed(config.seed, "baseline"));
  return envelope::train_baseline(reals, fakes, envelope_config(config), rng);
}

std::string to_string(Drop drop) {
  switch (drop) {
    case Drop::None: return "full";
    case Drop::Mbr: return "mbr";
    case Drop::Tan: return "tan";
    case Drop::Cdc: return "cdc";
    case Drop::Aug: return "aug";
  }
  return "full";
}

Drop parse_drop(const std::string& text) {
  for (Drop d : {Drop::None, Drop::Mbr, Drop::Tan, Drop::Cdc, Drop::Aug})
    if (text == to_string(d)) return d;
  throw Error(ErrorKind::InvalidArgument, "unknown component '" + text + "' (valid: mbr, tan, cdc, aug)");
}

ExperimentConfig apply_drop(ExperimentConfig config, Drop drop) {
  switch (drop) {
    case Drop::None: break;
    case Drop::Mbr: config.epsilon = 0; break;
    case Drop::Tan: config.weights.tan = 0; break;
    case Drop::Cdc:
      config.cdc_enabled = false;
      config.augment = false;
      break;
    case Drop::Aug: config.augment = false; break;
  }
  return config;
}

EvalCorpus eval_corpus(const ExperimentConfig& config, const std::vector<std::string>& families) {
  EvalCorpus c;
  c.reals = worldgen::gen_real(derive_seed(config.seed, "eval.real"), config.n_eval, config.mode, config.world);
  for (const auto& f : families)
    c.fakes[f] = worldgen::gen_fake(f, derive_seed(config.seed, "eval." + f), config.n_eval, config.mode, config.world);
  return c;
}

std::vector<Sample> degrade_corpus(const std::vector<Sample>& samples, chainsim::Profile profile, int k_min,
                                   int k_max, std::uint64_t seed) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    require(s.is_image(), ErrorKind::InvalidArgument, "degrade: sample '" + s.id + "' is not an image");
    SeededRng rng(mix_seed(seed, hash_string(s.id)));
    const chainsim::DegradationChain chain = chainsim::build_chain(rng, profile, k_min, k_max);
    Sample d = s;
    d.payload = chainsim::apply_chain(chain, s.image());
    d.chain = chainsim::chain_to_manifest(chain);
    out.push_back(std::move(d));
  }
  return out;
}

EvalCorpus degrade_corpus(const EvalCorpus& corpus, const ExperimentConfig& config, std::uint64_t seed) {
  const auto profile = chainsim::parse_profile(config.profile);
  EvalCorpus out;
  out.reals = degrade_corpus(corpus.reals, profile, config.chain_k_min, config.chain_k_max, seed);
  for (const auto& [f, samples] : corpus.fakes)
    out.fakes[f] = degrade_corpus(samples, profile, config.chain_k_min, config.chain_k_max, seed);
  return out;
}

evalkit::EvalReport evaluate(const envelope::EnvelopeModel& model, const EvalCorpus& corpus, double threshold) {
  const Eigen::VectorXd real_scores = envelope::score_batch(model, corpus.reals);
  std::vector<double> scores(real_scores.begin(), real_scores.end());
  std::vector<evalkit::Label> labels(scores.size(), evalkit::Label::Real);
  evalkit::EvalReport report;
  for (const auto& [family, samples] : corpus.fakes) {
    const Eigen::VectorXd s = envelope::score_batch(model, samples);
    std::vector<double> fs(real_scores.begin(), real_scores.end());
    std::vector<evalkit::Label> fl(fs.size(), evalkit::Label::Real);
    for (double v : s) {
      fs.push_back(v);
      fl.push_back(evalkit::Label::Fake);
      scores.push_back(v);
      labels.push_back(evalkit::Label::Fake);
    }
    report.by_family[family] = evalkit::accuracy_metrics(fs, fl, threshold);
  }
  report.overall = evalkit::accuracy_metrics(scores, labels, threshold);
  report.ap = evalkit::average_precision(scores, labels);
  return report;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const std::vector<Drop>& drops,
                                      const std::vector<std::uint64_t>& seeds) {
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : seeds) {
    ExperimentConfig base = config;
    base.seed = seed;
    const auto reals = training_reals(base);
    const mbr::Autoencoder ae = train_mbr(base, reals);
    const EvalCorpus clean = eval_corpus(base, worldgen::kFamilies);
    const EvalCorpus degraded = degrade_corpus(clean, base, derive_seed(seed, "eval.chain"));
    std::vector<Drop> variants = {Drop::None};
    for (Drop d : drops)
      if (d != Drop::None) variants.push_back(d);
    for (Drop d : variants) {
      const ExperimentConfig cfg = apply_drop(base, d);
      const TrainedRem rem = train_rem(cfg, reals, &ae);
      AblationRow row;
      row.seed = seed;
      row.variant = to_string(d);
      row.clean_b_acc = evaluate(rem.model, clean, cfg.threshold).overall.b_acc;
      row.degraded_b_acc = evaluate(rem.model, degraded, cfg.threshold).overall.b_acc;
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<SweepPoint> freq_sweep(const std::vector<Image>& a, const std::vector<Image>& b,
                                   const std::vector<int>& ks, chainsim::Profile profile, std::uint64_t seed,
                                   evalkit::FreqMode mode, bool resample) {
  require_dims(static_cast<long>(b.size()), static_cast<long>(a.size()), "freq_sweep pairs");
  require(!ks.empty(), ErrorKind::InvalidArgument, "freq_sweep: no chain lengths");
  const int k_max = *std::max_element(ks.begin(), ks.end());
  require(*std::min_element(ks.begin(), ks.end()) >= 0 && k_max <= 8, ErrorKind::InvalidArgument,
          "freq_sweep: chain lengths must be in [0, 8]");
  std::vector<chainsim::DegradationChain> chains;
  for (std::size_t i = 0; i < a.size(); ++i) {
    SeededRng rng(mix_seed(seed, i));
    chains.push_back(chainsim::build_chain(rng, profile, k_max, k_max));
  }
  std::vector<SweepPoint> out;
  for (int k : ks) {
    std::vector<Image> da, db;
    for (std::size_t i = 0; i < a.size(); ++i) {
      chainsim::DegradationChain prefix;
      prefix.ops.assign(chains[i].ops.begin(), chains[i].ops.begin() + k);
      Image ia = chainsim::apply_chain(prefix, a[i]);
      Image ib = chainsim::apply_chain(prefix, b[i]);
      if (resample || mode == evalkit::FreqMode::MeanSpectrum) {
        ia = resize_bilinear(ia, a[i].height(), a[i].width());
        ib = resize_bilinear(ib, a[i].height(), a[i].width());
      }
      da.push_back(std::move(ia));
      db.push_back(std::move(ib));
    }
    out.push_back({k, evalkit::freq_discrepancy(da, db, mode)});
  }
  return out;
}

}  // namespace rem::experiment
