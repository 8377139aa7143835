#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rem/cdc.hpp"
#include "rem/chainsim.hpp"
#include "rem/config.hpp"
#include "rem/envelope.hpp"
#include "rem/evalkit.hpp"
#include "rem/mbr.hpp"

namespace rem::experiment {

// Stream labels for seeds derived from the master seed.
std::uint64_t derive_seed(std::uint64_t master, const std::string& purpose);

std::vector<Sample> training_reals(const ExperimentConfig& config);

struct TrainedRem {
  mbr::Autoencoder ae;
  std::optional<cdc::AnchorEncoder> anchor;
  envelope::EnvelopeModel model;
  std::string anchor_hash_before;
  std::string anchor_hash_after;
};

mbr::Autoencoder train_mbr(const ExperimentConfig& config, const std::vector<Sample>& reals);

// Autoencoder, anchor, near-real generation and envelope training. A
// pre-trained autoencoder (same config) can be passed to share it across
// variants.
TrainedRem train_rem(const ExperimentConfig& config, const std::vector<Sample>& reals,
                     const mbr::Autoencoder* pretrained = nullptr);

envelope::EnvelopeModel train_baseline(const ExperimentConfig& config, const std::vector<Sample>& reals);

enum class Drop { None, Mbr, Tan, Cdc, Aug };
std::string to_string(Drop drop);
Drop parse_drop(const std::string& text);
ExperimentConfig apply_drop(ExperimentConfig config, Drop drop);

struct EvalCorpus {
  std::vector<Sample> reals;
  std::map<std::string, std::vector<Sample>> fakes;  // by family
};

// Held-out reals and fakes from seeds disjoint from training.
EvalCorpus eval_corpus(const ExperimentConfig& config, const std::vector<std::string>& families);

// Every sample passes through its own chain, drawn from hash(seed, id).
std::vector<Sample> degrade_corpus(const std::vector<Sample>& samples, chainsim::Profile profile, int k_min,
                                   int k_max, std::uint64_t seed);
EvalCorpus degrade_corpus(const EvalCorpus& corpus, const ExperimentConfig& config, std::uint64_t seed);

evalkit::EvalReport evaluate(const envelope::EnvelopeModel& model, const EvalCorpus& corpus,
                             double threshold = 0.5);

struct AblationRow {
  std::uint64_t seed = 0;
  std::string variant;
  double clean_b_acc = 0;
  double degraded_b_acc = 0;
};

// Full model and the dropped variant on the same seeds; evaluation fakes
// are every family.
std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const std::vector<Drop>& drops,
                                      const std::vector<std::uint64_t>& seeds);

struct SweepPoint {
  int k = 0;
  double delta_f = 0;
};

// Delta f between index-paired images after the first k ops of one shared
// per-pair chain, taken at the degraded resolution. With `resample` both
// images go back to the input size first.
std::vector<SweepPoint> freq_sweep(const std::vector<Image>& a, const std::vector<Image>& b,
                                   const std::vector<int>& ks, chainsim::Profile profile, std::uint64_t seed,
                                   evalkit::FreqMode mode = evalkit::FreqMode::Paired, bool resample = false);

}  // namespace rem::experiment
