#include "hazeval/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "hazeval/error.hpp"

namespace hazeval {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw PreconditionError("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Embedding normalized(Embedding v) {
  const double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw ProviderError("embedding has zero or non-finite norm");
  for (double& x : v) x /= n;
  return v;
}

}  // namespace hazeval
