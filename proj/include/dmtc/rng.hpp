#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "dmtc/tensor.hpp"

namespace dmtc {

// Counter-based splittable PRNG (splitmix64 core). A child stream derived
// via split(label) depends only on the parent's base seed and the label,
// never on how many values the parent has drawn.
class Rng {
 public:
  explicit Rng(uint64_t seed) : base_(seed), state_(seed) {}

  Rng split(std::string_view label) const;
  Rng split(uint64_t salt) const;

  uint64_t next_u64();

  // Uniform on the open interval (0,1).
  double uniform();
  double uniform(double lo, double hi);
  int uniform_int(int n);  // [0, n)

  double gaussian();                 // standard normal, Box-Muller
  double gumbel();                   // -log(-log U), standard Gumbel
  double gamma(double shape);        // Gamma(shape, 1), Marsaglia-Tsang

  // Sample from Dirichlet(eta); result is on the simplex.
  std::vector<double> dirichlet(const std::vector<double>& eta);

  uint64_t seed() const { return base_; }

 private:
  uint64_t base_;
  uint64_t state_;
};

// Tensor of i.i.d. standard Gumbel draws.
Tensor sample_gumbel(Rng& rng, int rows, int cols);
// Gumbel value for a forced uniform draw (the closed form, used in tests).
double gumbel_from_uniform(double u);

}  // namespace dmtc
