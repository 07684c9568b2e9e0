#include "cvar/rng.hpp"

namespace cvar {

std::size_t Rng::categorical(std::span<const double> probabilities) {
  const double u = uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    cumulative += probabilities[i];
    if (u < cumulative) return i;
  }
  // Rounding can leave the cumulative sum a hair below 1.
  for (std::size_t i = probabilities.size(); i-- > 0;) {
    if (probabilities[i] > 0.0) return i;
  }
  return 0;
}

}  // namespace cvar
