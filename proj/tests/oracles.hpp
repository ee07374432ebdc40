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

// Reference implementations used only by the tests. They are deliberately
// naive: dense matrices, explicit loops, no shared code with the library
// beyond the basic types.

#ifndef COEXIST_TESTS_ORACLES_HPP
#define COEXIST_TESTS_ORACLES_HPP

#include "coexist/infotheory.hpp"
#include "coexist/numerics.hpp"
#include "coexist/radar_clutter.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace coexist::oracle
{

// Cyclic Jacobi rotations on the real 2n x 2n embedding [[Re, -Im], [Im, Re]].
// Every eigenvalue of A appears twice there; the sorted list is de-duplicated by
// taking every other entry.
inline std::vector<double> jacobi_eigenvalues(const CMatrix &A)
{
    const int n = static_cast<int>(A.rows());
    const int m = 2 * n;
    std::vector<std::vector<double>> S(m, std::vector<double>(m, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
        {
            S[i][j] = A(i, j).real();
            S[i + n][j + n] = A(i, j).real();
            S[i][j + n] = -A(i, j).imag();
            S[i + n][j] = A(i, j).imag();
        }
    for (int sweep = 0; sweep < 100; ++sweep)
    {
        double off = 0.0;
        for (int p = 0; p < m; ++p)
            for (int q = p + 1; q < m; ++q)
                off += S[p][q] * S[p][q];
        if (off < 1e-30)
            break;
        for (int p = 0; p < m; ++p)
            for (int q = p + 1; q < m; ++q)
            {
                if (std::fabs(S[p][q]) < 1e-300)
                    continue;
                const double theta = (S[q][q] - S[p][p]) / (2.0 * S[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < m; ++k)
                {
                    const double skp = S[k][p], skq = S[k][q];
                    S[k][p] = c * skp - s * skq;
                    S[k][q] = s * skp + c * skq;
                }
                for (int k = 0; k < m; ++k)
                {
                    const double spk = S[p][k], sqk = S[q][k];
                    S[p][k] = c * spk - s * sqk;
                    S[q][k] = s * spk + c * sqk;
                }
            }
    }
    std::vector<double> all(m);
    for (int i = 0; i < m; ++i)
        all[i] = S[i][i];
    std::sort(all.begin(), all.end(), std::greater<double>());
    std::vector<double> out;
    for (int i = 0; i < m; i += 2)
        out.push_back(all[i]);
    return out;
}

// Power series of J0 in long double. Adequate for |x| up to about 20.
inline double j0_series(double x)
{
    const long double h = static_cast<long double>(x) * x / 4.0L;
    long double term = 1.0L, sum = 1.0L;
    for (int k = 1; k < 400; ++k)
    {
        term *= -h / (static_cast<long double>(k) * k);
        sum += term;
        if (std::fabs(static_cast<double>(term)) < 1e-30)
            break;
    }
    return static_cast<double>(sum);
}

// (1 / 2 pi) * integral over [-pi, pi] of exp(-j x sin t) dt by the trapezoid rule.
// The integrand is periodic and entire, so the rule converges geometrically once the
// node count exceeds |x| by a margin.
inline double j0_quadrature(double x)
{
    const int n = 2 * static_cast<int>(std::fabs(x)) + 400;
    long double acc = 0.0L;
    for (int i = 0; i < n; ++i)
    {
        const double t = -kPi + 2.0 * kPi * i / n;
        acc += std::cos(x * std::sin(t));
    }
    return static_cast<double>(acc / n);
}

// Permutation with vec(A^T) = Kmn vec(A) for A of size m x n (column-major vec).
inline RMatrix commutation_matrix(int m, int n)
{
    RMatrix K = RMatrix::Zero(m * n, m * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            K(i * n + j, j * m + i) = 1.0;
    return K;
}

// E[vec(C) vec(C)^H] for the M x C sub-block of one packet's clutter over the
// subcarriers qC .. qC+C-1, entry by entry from the scatterer parameters.
inline CMatrix dense_block_covariance(const PacketClutter &pk, int q, int C)
{
    const int M = pk.M();
    CMatrix K = CMatrix::Zero(M * C, M * C);
    for (int c1 = 0; c1 < C; ++c1)
        for (int m1 = 0; m1 < M; ++m1)
            for (int c2 = 0; c2 < C; ++c2)
                for (int m2 = 0; m2 < M; ++m2)
                {
                    cplx acc = 0.0;
                    for (int i = 0; i < pk.active_count(); ++i)
                    {
                        const auto &var = pk.variances(i);
                        for (std::size_t t = 0; t < var.size(); ++t)
                        {
                            const auto tt = static_cast<Eigen::Index>(t);
                            acc += pk.transmit_power() * var[t] * pk.signatures(i)(q * C + c1, tt) *
                                   std::conj(pk.signatures(i)(q * C + c2, tt)) * pk.steering()(m1, i) *
                                   std::conj(pk.steering()(m2, i));
                        }
                    }
                    K(c1 * M + m1, c2 * M + m2) = acc;
                }
    return K;
}

// Covariance of C_q conj(P~) with C_q the M x TC training block: blkdiag of the
// per-packet covariances, moved to vec(C_q^T) order with the commutation matrix,
// then contracted with I_M kron P~^H.
inline CMatrix dense_training_clutter_cov(const std::vector<PacketClutter> &training, int q, int C,
                                          const CVector &pilot_normalized)
{
    const int T = static_cast<int>(training.size());
    const int M = training.front().M();
    const int TC = T * C;
    CMatrix big = CMatrix::Zero(M * TC, M * TC);
    for (int ell = 0; ell < T; ++ell)
        big.block(ell * M * C, ell * M * C, M * C, M * C) = dense_block_covariance(training[ell], q, C);
    const CMatrix Kc = commutation_matrix(M, TC).cast<cplx>();
    CMatrix contract = CMatrix::Zero(M, M * TC); // I_M kron P~^H
    for (int m = 0; m < M; ++m)
        for (int c = 0; c < TC; ++c)
            contract(m, m * TC + c) = std::conj(pilot_normalized(c));
    const CMatrix A = contract * Kc;
    return A * big * A.adjoint();
}

// log det(I + H~^H (sigma2 I + K_c)^{-1} H~) with every matrix formed densely.
inline double dense_mutual_information(const SignalFactor &sig, const FullClutterCovariance &clutter,
                                       double sigma2_w)
{
    const int M = sig.M(), N = sig.N(), d = N * M;
    CMatrix Ht = CMatrix::Zero(d, N);
    for (int n = 0; n < N; ++n)
        for (int m = 0; m < M; ++m)
            Ht(n * M + m, n) = std::sqrt(sig.p) * sig.h(m, n / sig.C);
    CMatrix K = CMatrix::Zero(d, d);
    for (int j = 0; j < clutter.rank_bound(); ++j)
    {
        CVector f(d);
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < M; ++m)
                f(n * M + m) = clutter.scale(j) * clutter.signatures(n, j) * clutter.steering(m, j);
        K += f * f.adjoint();
    }
    K.diagonal().array() += sigma2_w;
    const CMatrix G = Ht.adjoint() * K.partialPivLu().solve(Ht);
    const CMatrix A = CMatrix::Identity(N, N) + 0.5 * (G + G.adjoint());
    const auto lu = A.partialPivLu();
    double acc = 0.0;
    for (int i = 0; i < N; ++i)
        acc += std::log(std::abs(lu.matrixLU()(i, i)));
    return acc;
}

// Relative Frobenius distance ||A - B|| / max(||B||, tiny).
template <class A, class B> double rel_fro(const A &a, const B &b)
{
    const double nb = b.norm();
    return (a - b).norm() / (nb > 0 ? nb : 1e-300);
}

} // namespace coexist::oracle

#endif
