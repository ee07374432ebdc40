// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef COEXIST_RNG_HPP
#define COEXIST_RNG_HPP

#include "coexist/numerics.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace coexist
{

// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Stream derivation rule: seed = fold(splitmix64, master, ids...). A trial's
// stream depends only on (master seed, stream ids), never on which worker runs it.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> ids)
{
    std::uint64_t s = splitmix64(master);
    for (auto id : ids)
        s = splitmix64(s ^ splitmix64(id + 0x632BE59BD9B4E019ULL));
    return s;
}

class Rng
{
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal() { return normal_(engine_); }

    // CN(0, variance): independent real and imaginary parts of variance/2.
    cplx complex_normal(double variance = 1.0)
    {
        const double s = std::sqrt(0.5 * variance);
        const double re = normal_(engine_);
        const double im = normal_(engine_);
        return {s * re, s * im};
    }

    CVector complex_normal_vector(Eigen::Index n, double variance = 1.0)
    {
        CVector v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v(i) = complex_normal(variance);
        return v;
    }

    CMatrix complex_normal_matrix(Eigen::Index rows, Eigen::Index cols, double variance = 1.0)
    {
        CMatrix A(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
                A(i, j) = complex_normal(variance);
        return A;
    }

    std::mt19937_64 &engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace coexist

#endif
