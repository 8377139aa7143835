#include "rem/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "rem/error.hpp"
#include "rem/nn.hpp"
#include "rem/rng.hpp"

namespace rem::evalkit {

AccuracyReport accuracy_metrics(const std::vector<double>& scores, const std::vector<Label>& labels,
                                double threshold) {
  require_dims(static_cast<long>(labels.size()), static_cast<long>(scores.size()), "accuracy_metrics");
  AccuracyReport r;
  long real_hits = 0, fake_hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == Label::Real) {
      ++r.n_real;
      if (scores[i] >= threshold) ++real_hits;
    } else {
      ++r.n_fake;
      if (scores[i] < threshold) ++fake_hits;
    }
  }
  require(r.n_real > 0 && r.n_fake > 0, ErrorKind::InsufficientSamples,
          "accuracy_metrics: balanced accuracy needs both real and fake samples");
  r.r_acc = static_cast<double>(real_hits) / r.n_real;
  r.f_acc = static_cast<double>(fake_hits) / r.n_fake;
  r.b_acc = (r.r_acc + r.f_acc) / 2;
  return r;
}

double average_precision(const std::vector<double>& scores, const std::vector<Label>& labels) {
  require_dims(static_cast<long>(labels.size()), static_cast<long>(scores.size()), "average_precision");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return 1.0 - scores[a] > 1.0 - scores[b]; });
  long positives = 0;
  double sum = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] != Label::Fake) continue;
    ++positives;
    sum += static_cast<double>(positives) / static_cast<double>(rank + 1);
  }
  require(positives > 0, ErrorKind::InsufficientSamples, "average_precision: no positive (fake) samples");
  return sum / static_cast<double>(positives);
}

double feature_discrepancy(const Eigen::Ref<const Eigen::MatrixXd>& real_features,
                           const Eigen::Ref<const Eigen::MatrixXd>& fake_features) {
  require(real_features.cols() >= 1 && fake_features.cols() >= 1, ErrorKind::InsufficientSamples,
          "feature_discrepancy: empty set");
  require_dims(fake_features.rows(), real_features.rows(), "feature_discrepancy");
  return (real_features.rowwise().mean() - fake_features.rowwise().mean()).norm();
}

std::string to_string(FreqMode mode) { return mode == FreqMode::Paired ? "paired" : "mean_spectrum"; }

FreqMode parse_freq_mode(const std::string& text) {
  if (text == "paired") return FreqMode::Paired;
  if (text == "mean_spectrum") return FreqMode::MeanSpectrum;
  throw Error(ErrorKind::InvalidArgument, "unknown freq mode '" + text + "' (valid: paired, mean_spectrum)");
}

double freq_discrepancy(const std::vector<Image>& reals, const std::vector<Image>& fakes, FreqMode mode) {
  require(!reals.empty(), ErrorKind::InsufficientSamples, "freq_discrepancy: empty set");
  require_dims(static_cast<long>(fakes.size()), static_cast<long>(reals.size()), "freq_discrepancy pairs");
  if (mode == FreqMode::Paired) {
    double sum = 0;
    for (std::size_t i = 0; i < reals.size(); ++i) {
      require(reals[i].height() == fakes[i].height() && reals[i].width() == fakes[i].width(),
              ErrorKind::DimensionMismatch, "freq_discrepancy: pair " + std::to_string(i) + " differs in size");
      sum += (dft2_magnitude(luminance(reals[i])) - dft2_magnitude(luminance(fakes[i]))).norm();
    }
    return sum / static_cast<double>(reals.size());
  }
  const int h = reals.front().height();
  const int w = reals.front().width();
  Eigen::MatrixXd mr = Eigen::MatrixXd::Zero(h, w), mf = Eigen::MatrixXd::Zero(h, w);
  for (std::size_t i = 0; i < reals.size(); ++i) {
    require(reals[i].height() == h && reals[i].width() == w && fakes[i].height() == h && fakes[i].width() == w,
            ErrorKind::DimensionMismatch, "freq_discrepancy: mean_spectrum needs equal image sizes");
    mr += dft2_magnitude(luminance(reals[i]));
    mf += dft2_magnitude(luminance(fakes[i]));
  }
  return (mr - mf).norm() / static_cast<double>(reals.size());
}

long AttributionReport::row_total(const std::string& family) const {
  const auto it = std::find(families.begin(), families.end(), family);
  if (it == families.end()) return 0;
  return confusion.row(it - families.begin()).sum();
}

long AttributionReport::count(const std::string& truth, const std::string& predicted) const {
  const auto r = std::find(families.begin(), families.end(), truth);
  const auto c = std::find(columns.begin(), columns.end(), predicted);
  if (r == families.end() || c == columns.end()) return 0;
  return confusion(r - families.begin(), c - columns.begin());
}

namespace {

std::vector<std::string> sorted_unique(const std::vector<std::string>& a, const std::vector<std::string>& b = {}) {
  std::set<std::string> s(a.begin(), a.end());
  s.insert(b.begin(), b.end());
  return {s.begin(), s.end()};
}

int index_of(const std::vector<std::string>& v, const std::string& x) {
  return static_cast<int>(std::find(v.begin(), v.end(), x) - v.begin());
}

void check_labeled(const LabeledFeatures& f, const char* what) {
  require_dims(static_cast<long>(f.labels.size()), f.features.cols(), what);
}

}  // namespace

AttributionReport attribute_open(const LabeledFeatures& gallery, const LabeledFeatures& queries, double tau,
                                 double tau_scale) {
  check_labeled(gallery, "attribute_open gallery");
  check_labeled(queries, "attribute_open queries");
  require(gallery.features.cols() > 0, ErrorKind::InsufficientSamples, "attribute_open: empty gallery");
  require_dims(queries.features.rows(), gallery.features.rows(), "attribute_open features");
  const std::vector<std::string> known = sorted_unique(gallery.labels);
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(gallery.features.rows(), static_cast<Eigen::Index>(known.size()));
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(known.size()));
  for (Eigen::Index i = 0; i < gallery.features.cols(); ++i) {
    const int k = index_of(known, gallery.labels[static_cast<std::size_t>(i)]);
    centroids.col(k) += gallery.features.col(i);
    ++counts(k);
  }
  require(counts.maxCoeff() >= 2, ErrorKind::InsufficientSamples,
          "attribute_open: gallery needs a family with at least 2 samples");
  for (Eigen::Index k = 0; k < centroids.cols(); ++k) centroids.col(k) /= counts(k);

  AttributionReport r;
  r.mode = "open";
  if (tau <= 0) {
    std::vector<double> d;
    for (Eigen::Index i = 0; i < gallery.features.cols(); ++i)
      d.push_back((gallery.features.col(i) - centroids.col(index_of(known, gallery.labels[static_cast<std::size_t>(i)]))).norm());
    std::sort(d.begin(), d.end());
    const std::size_t m = d.size();
    const double median = m % 2 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
    tau = tau_scale * median;
  }
  r.tau_open = tau;
  r.families = sorted_unique(known, queries.labels);
  r.columns = known;
  r.columns.push_back(kUnknown);
  r.confusion = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(r.families.size()),
                                      static_cast<Eigen::Index>(r.columns.size()));
  long correct = 0;
  for (Eigen::Index i = 0; i < queries.features.cols(); ++i) {
    Eigen::Index best = 0;
    const double dist = (centroids.colwise() - queries.features.col(i)).colwise().norm().minCoeff(&best);
    const std::string predicted = dist > tau ? kUnknown : known[static_cast<std::size_t>(best)];
    const std::string& truth = queries.labels[static_cast<std::size_t>(i)];
    ++r.confusion(index_of(r.families, truth), index_of(r.columns, predicted));
    const bool truth_known = std::find(known.begin(), known.end(), truth) != known.end();
    if (predicted == truth || (!truth_known && predicted == kUnknown)) ++correct;
  }
  r.accuracy = queries.features.cols() ? static_cast<double>(correct) / queries.features.cols() : 0.0;
  return r;
}

AttributionReport attribute_closed(const LabeledFeatures& train, const LabeledFeatures& test,
                                   const HeadConfig& config) {
  check_labeled(train, "attribute_closed train");
  check_labeled(test, "attribute_closed test");
  const std::vector<std::string> families = sorted_unique(train.labels);
  require(families.size() >= 2, ErrorKind::InsufficientSamples, "attribute_closed: need at least 2 families");
  require_dims(test.features.rows(), train.features.rows(), "attribute_closed features");
  for (const auto& l : test.labels)
    require(std::find(families.begin(), families.end(), l) != families.end(), ErrorKind::InvalidArgument,
            "attribute_closed: test family '" + l + "' absent from training");

  const Eigen::Index d = train.features.rows();
  const Eigen::Index k = static_cast<Eigen::Index>(families.size());
  const Eigen::Index n = train.features.cols();
  const Eigen::VectorXd mean = train.features.rowwise().mean();
  const Eigen::VectorXd sd =
      ((train.features.colwise() - mean).array().square().rowwise().mean().sqrt() + 1e-8).matrix();
  auto standardize = [&](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    return ((x.colwise() - mean).array().colwise() / sd.array()).matrix();
  };
  const Eigen::MatrixXd x = standardize(train.features);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = index_of(families, train.labels[static_cast<std::size_t>(i)]);

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  Adam opt(AdamConfig{config.lr});
  SeededRng rng(config.seed, 0xA77);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<int> order = permutation(static_cast<int>(n), rng);
    for (Eigen::Index start = 0; start < n; start += config.batch) {
      const Eigen::Index m = std::min<Eigen::Index>(config.batch, n - start);
      Eigen::MatrixXd xb(d, m);
      for (Eigen::Index j = 0; j < m; ++j) xb.col(j) = x.col(order[static_cast<std::size_t>(start + j)]);
      Eigen::MatrixXd z = (w * xb).colwise() + b;
      for (Eigen::Index j = 0; j < m; ++j) {
        z.col(j).array() -= z.col(j).maxCoeff();
        z.col(j) = z.col(j).array().exp().matrix();
        z.col(j) /= z.col(j).sum();
        z(y[static_cast<std::size_t>(order[static_cast<std::size_t>(start + j)])], j) -= 1.0;
      }
      z /= static_cast<double>(m);
      Eigen::MatrixXd gw = z * xb.transpose();
      Eigen::VectorXd gb = z.rowwise().sum();
      opt.step({param_ref(w, gw), param_ref(b, gb)});
    }
  }

  AttributionReport r;
  r.mode = "closed";
  r.families = families;
  r.columns = families;
  r.confusion = Eigen::MatrixXi::Zero(k, k);
  const Eigen::MatrixXd z = (w * standardize(test.features)).colwise() + b;
  long correct = 0;
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    Eigen::Index pred = 0;
    z.col(i).maxCoeff(&pred);
    const int truth = index_of(families, test.labels[static_cast<std::size_t>(i)]);
    ++r.confusion(truth, pred);
    if (pred == truth) ++correct;
  }
  r.accuracy = z.cols() ? static_cast<double>(correct) / z.cols() : 0.0;
  return r;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

void write_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::MissingFile, "missing file: " + path.string());
  Table t;
  std::string text;
  bool first = true;
  while (std::getline(in, text)) {
    if (text.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      require(cells.size() == t.header.size(), ErrorKind::Parse,
              path.string() + ": row with " + std::to_string(cells.size()) + " cells, header has " +
                  std::to_string(t.header.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  require(!first, ErrorKind::Parse, path.string() + ": empty CSV");
  return t;
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

void write_bar_svg(const std::vector<std::pair<std::string, double>>& bars, const std::string& title,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  const int width = 80 * static_cast<int>(std::max<std::size_t>(bars.size(), 1)) + 60;
  const int height = 260;
  double top = 1e-12;
  for (const auto& [_, v] : bars) top = std::max(top, std::abs(v));
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
      << "<text x=\"10\" y=\"20\" font-size=\"14\">" << escape_xml(title) << "</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double h = 180.0 * std::abs(bars[i].second) / top;
    const double x = 40.0 + 80.0 * static_cast<double>(i);
    out << "<rect x=\"" << x << "\" y=\"" << 220 - h << "\" width=\"60\" height=\"" << h
        << "\" fill=\"#4a78b0\"/>\n"
        << "<text x=\"" << x << "\" y=\"238\" font-size=\"11\">" << escape_xml(bars[i].first) << "</text>\n"
        << "<text x=\"" << x << "\" y=\"" << 215 - h << "\" font-size=\"11\">" << format_number(bars[i].second)
        << "</text>\n";
  }
  out << "</svg>\n";
}

void write_line_svg(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& title,
                    const std::filesystem::path& path) {
  require_dims(static_cast<long>(ys.size()), static_cast<long>(xs.size()), "write_line_svg");
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"420\" height=\"260\">\n"
      << "<text x=\"10\" y=\"20\" font-size=\"14\">" << escape_xml(title) << "</text>\n";
  if (!xs.empty()) {
    const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
    const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
    const double xr = std::max(*xmax - *xmin, 1e-12);
    const double yr = std::max(*ymax - *ymin, 1e-12);
    out << "<polyline fill=\"none\" stroke=\"#b04a4a\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i)
      out << 40 + 340 * (xs[i] - *xmin) / xr << "," << 220 - 180 * (ys[i] - *ymin) / yr << " ";
    out << "\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i)
      out << "<text x=\"" << 40 + 340 * (xs[i] - *xmin) / xr << "\" y=\"238\" font-size=\"11\">"
          << format_number(xs[i]) << "</text>\n";
  }
  out << "</svg>\n";
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  require_dims(static_cast<long>(b.size()), static_cast<long>(a.size()), "spearman");
  require(a.size() >= 2, ErrorKind::InsufficientSamples, "spearman: need at least 2 points");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    Eigen::VectorXd r(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t t = i; t <= j; ++t) r(static_cast<Eigen::Index>(idx[t])) = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const Eigen::VectorXd ra = ranks(a);
  const Eigen::VectorXd rb = ranks(b);
  const Eigen::VectorXd ca = ra.array() - ra.mean();
  const Eigen::VectorXd cb = rb.array() - rb.mean();
  const double denom = ca.norm() * cb.norm();
  return denom > 0 ? ca.dot(cb) / denom : 0.0;
}

}  // namespace rem::evalkit
