#include "dmtc/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace dmtc {

namespace {

uint64_t splitmix64(uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  return splitmix64(x);
}

}  // namespace

Rng Rng::split(std::string_view label) const { return Rng(mix(base_, fnv1a(label))); }

Rng Rng::split(uint64_t salt) const { return Rng(mix(base_, salt + 0x632BE59BD9B4E019ULL)); }

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  // 53-bit mantissa shifted to the open interval (0,1).
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
}

double Rng::gaussian() {
  double u1 = uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::gumbel() { return gumbel_from_uniform(uniform()); }

double Rng::gamma(double shape) {
  if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be positive");
  if (shape < 1.0) {
    double u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = gaussian();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double vv = t * t * t;
    double u = uniform();
    if (std::log(u) < 0.5 * x * x + d - d * vv + d * std::log(vv)) return d * vv;
  }
}

std::vector<double> Rng::dirichlet(const std::vector<double>& eta) {
  if (eta.empty()) throw std::invalid_argument("dirichlet: eta must be nonempty");
  std::vector<double> x(eta.size());
  double sum = 0.0;
  for (size_t i = 0; i < eta.size(); ++i) {
    if (eta[i] <= 0.0) throw std::invalid_argument("dirichlet: eta entries must be positive");
    x[i] = gamma(eta[i]);
    sum += x[i];
  }
  for (double& xi : x) xi /= sum;
  return x;
}

Tensor sample_gumbel(Rng& rng, int rows, int cols) {
  Tensor t(rows, cols);
  for (double& x : t.v) x = rng.gumbel();
  return t;
}

double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

bool all_finite(const Tensor& t) {
  for (double x : t.v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace dmtc
