#include "hazeval/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "hazeval/error.hpp"

namespace hazeval {

double percent_agreement(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size()) throw PreconditionError("percent_agreement: length mismatch");
  if (a.empty()) throw PreconditionError("percent_agreement: empty input");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i] ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(a.size());
}

RatingMatrix rating_matrix(const std::vector<std::vector<std::string>>& item_labels,
                           const std::vector<std::string>& categories) {
  RatingMatrix m;
  for (const auto& labels : item_labels) {
    std::vector<int> row(categories.size(), 0);
    for (const auto& l : labels) {
      auto it = std::find(categories.begin(), categories.end(), l);
      if (it == categories.end()) throw PreconditionError("rating_matrix: unknown category '" + l + "'");
      ++row[static_cast<std::size_t>(it - categories.begin())];
    }
    m.counts.push_back(std::move(row));
  }
  return m;
}

std::optional<double> fleiss_kappa(const RatingMatrix& m) {
  const std::size_t items = m.counts.size();
  if (items < 2) throw PreconditionError("fleiss_kappa: need at least 2 items");
  const std::size_t cats = m.counts.front().size();
  const long raters = std::accumulate(m.counts.front().begin(), m.counts.front().end(), 0L);
  if (raters < 2) throw PreconditionError("fleiss_kappa: need at least 2 raters");

  std::vector<double> column(cats, 0.0);
  double p_bar = 0.0;
  for (const auto& row : m.counts) {
    if (row.size() != cats) throw PreconditionError("fleiss_kappa: ragged matrix");
    long sum = 0;
    long sq = 0;
    for (std::size_t j = 0; j < cats; ++j) {
      if (row[j] < 0) throw PreconditionError("fleiss_kappa: negative count");
      sum += row[j];
      sq += static_cast<long>(row[j]) * row[j];
      column[j] += row[j];
    }
    if (sum != raters) throw PreconditionError("fleiss_kappa: rows must sum to the same rater count");
    p_bar += static_cast<double>(sq - raters) / static_cast<double>(raters * (raters - 1));
  }
  p_bar /= static_cast<double>(items);

  const double total = static_cast<double>(items) * static_cast<double>(raters);
  double p_e = 0.0;
  for (double c : column) p_e += (c / total) * (c / total);
  if (p_e >= 1.0) return std::nullopt;
  return (p_bar - p_e) / (1.0 - p_e);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("pearson: length mismatch");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("spearman: length mismatch");
  if (x.size() < 3) throw PreconditionError("spearman: need at least 3 pairs");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  Correlation c;
  c.rho = pearson(rx, ry);
  if (!c.rho) return c;
  const double r = *c.rho;
  const double df = static_cast<double>(x.size()) - 2.0;
  if (std::abs(r) >= 1.0) {
    c.p_value = 0.0;
  } else {
    const double t = r * std::sqrt(df / (1.0 - r * r));
    boost::math::students_t dist(df);
    c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return c;
}

}  // namespace hazeval
