// Copyright 2026 The dpkmeans Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPKMEANS_RNG_HPP_
#define DPKMEANS_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace dpkmeans {

namespace detail {

// splitmix64 finalizer; used only to derive child seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic random stream. std::mt19937_64 has a standard-specified
// sequence; uniform and gaussian sampling are hand-rolled below because the
// std distributions are implementation-defined and would break bit-identical
// reproducibility across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Child stream derived from the original seed and a label, independent of
  // how many draws the parent has made. Adding a new consumer never perturbs
  // the draws of existing ones.
  Rng split(std::uint64_t label) const {
    return Rng(detail::mix64(seed_ ^ detail::mix64(label)));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) by rejection (unbiased).
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via the Marsaglia polar method; one spare cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  Eigen::VectorXd gaussian_vector(Eigen::Index n) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = gaussian();
    return out;
  }

  // Chi-squared with integer degrees of freedom, as a sum of squared normals.
  double chi_squared(int dof) {
    double s = 0.0;
    for (int i = 0; i < dof; ++i) {
      const double g = gaussian();
      s += g * g;
    }
    return s;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dpkmeans

#endif  // DPKMEANS_RNG_HPP_
