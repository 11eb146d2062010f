#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hazeval {

// Fraction of positions where the two label sequences match exactly.
double percent_agreement(std::span<const std::string> labels_a, std::span<const std::string> labels_b);

// rows = items, columns = categories, cell = number of raters choosing it.
struct RatingMatrix {
  std::vector<std::vector<int>> counts;
};

// Builds a matrix from per-item label lists over a fixed category order.
// Labels outside `categories` are a PreconditionError.
RatingMatrix rating_matrix(const std::vector<std::vector<std::string>>& item_labels,
                           const std::vector<std::string>& categories);

// Fleiss' kappa. nullopt when chance agreement is exactly 1 (every rating in
// one category). Requires >= 2 items, >= 2 raters and equal row sums.
std::optional<double> fleiss_kappa(const RatingMatrix& m);

struct Correlation {
  std::optional<double> rho;
  std::optional<double> p_value;
};

// Mid-ranks (1-based), ties share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation; nullopt when either side is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Spearman rank correlation with a two-sided p-value from the t
// approximation t = rho * sqrt((n - 2) / (1 - rho^2)), df = n - 2.
// Requires equal lengths >= 3. Constant input yields nulls.
Correlation spearman(std::span<const double> x, std::span<const double> y);

}  // namespace hazeval
