#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rem/image.hpp"
#include "rem/numerics.hpp"

namespace rem::evalkit {

enum class Label { Real, Fake };

struct AccuracyReport {
  double r_acc = 0;
  double f_acc = 0;
  double b_acc = 0;
  long n_real = 0;
  long n_fake = 0;
};

struct EvalReport {
  AccuracyReport overall;
  double ap = 0;
  std::map<std::string, AccuracyReport> by_family;  // each family against all reals
};

// Scores are probability-real; a sample is called real when score >= threshold.
AccuracyReport accuracy_metrics(const std::vector<double>& scores, const std::vector<Label>& labels,
                                double threshold = 0.5);

// Fake is the positive class and ranks by 1 - score. Ties keep input order.
double average_precision(const std::vector<double>& scores, const std::vector<Label>& labels);

// ||mean(phi(reals)) - mean(phi(fakes))||; features are columns.
double feature_discrepancy(const Eigen::Ref<const Eigen::MatrixXd>& real_features,
                           const Eigen::Ref<const Eigen::MatrixXd>& fake_features);

enum class FreqMode { Paired, MeanSpectrum };
std::string to_string(FreqMode mode);
FreqMode parse_freq_mode(const std::string& text);

// Paired: mean over index pairs of the Frobenius distance between DFT
// magnitudes of the luminance. MeanSpectrum: distance between the mean
// magnitudes. Images of a pair must share a size.
double freq_discrepancy(const std::vector<Image>& reals, const std::vector<Image>& fakes,
                        FreqMode mode = FreqMode::Paired);

inline const std::string kUnknown = "unknown";

struct AttributionReport {
  std::string mode;                  // "closed" or "open"
  std::vector<std::string> families; // row labels, sorted
  std::vector<std::string> columns;  // families, plus "unknown" in open mode
  Eigen::MatrixXi confusion;         // rows: true family, cols: predicted
  double accuracy = 0;
  double tau_open = 0;

  long row_total(const std::string& family) const;
  long count(const std::string& truth, const std::string& predicted) const;
};

struct LabeledFeatures {
  Eigen::MatrixXd features;  // columns
  std::vector<std::string> labels;
};

// Nearest centroid; queries farther than tau from every centroid are
// "unknown". tau <= 0 selects tau_scale x the median distance of gallery
// samples to their own centroid. Query labels may include families absent
// from the gallery.
AttributionReport attribute_open(const LabeledFeatures& gallery, const LabeledFeatures& queries,
                                 double tau = 0, double tau_scale = 3.0);

struct HeadConfig {
  int epochs = 200;
  int batch = 64;
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

// Softmax linear head on frozen features, Adam, cross-entropy. Features are
// standardized with training statistics.
AttributionReport attribute_closed(const LabeledFeatures& train, const LabeledFeatures& test,
                                   const HeadConfig& config = {});

// Reports: CSV with a header row. SVG charts are best-effort.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string format_number(double v);
void write_csv(const Table& table, const std::filesystem::path& path);
Table read_csv(const std::filesystem::path& path);
void write_bar_svg(const std::vector<std::pair<std::string, double>>& bars, const std::string& title,
                   const std::filesystem::path& path);
void write_line_svg(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& title,
                    const std::filesystem::path& path);

// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace rem::evalkit
