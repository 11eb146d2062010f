#pragma once

#include <span>
#include <vector>

namespace hazeval {

using Embedding = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Cosine similarity; 0 when either vector has zero norm. Clamped to [-1, 1].
double cosine(std::span<const double> a, std::span<const double> b);

// Returns v / ||v||. Throws ProviderError for a zero vector.
Embedding normalized(Embedding v);

}  // namespace hazeval
