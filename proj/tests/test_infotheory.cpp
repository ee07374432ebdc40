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


#include "oracles.hpp"

#include "coexist/infotheory.hpp"

#include <doctest.h>

using namespace coexist;

namespace
{

FullClutterCovariance random_clutter(int N, int M, int r, double power, Rng &rng)
{
    FullClutterCovariance K;
    K.N = N;
    K.M = M;
    K.signatures = rng.complex_normal_matrix(N, r);
    K.steering = rng.complex_normal_matrix(M, r);
    K.scale = RVector::Constant(r, std::sqrt(power));
    return K;
}

SignalFactor random_signal(int M, int Q, int C, double p, Rng &rng)
{
    SignalFactor s;
    s.p = p;
    s.C = C;
    s.h = rng.complex_normal_matrix(M, Q);
    return s;
}

FullClutterCovariance no_clutter(int N, int M)
{
    FullClutterCovariance K;
    K.N = N;
    K.M = M;
    K.signatures = CMatrix(N, 0);
    K.steering = CMatrix(M, 0);
    K.scale = RVector(0);
    return K;
}

} // namespace

TEST_CASE("SignalFactor: block-diagonal gram")
{
    Rng rng(1);
    const auto s = random_signal(5, 3, 2, 0.7, rng);
    const CMatrix Ht = s.dense();
    CHECK(Ht.rows() == 30);
    CHECK(Ht.cols() == 6);
    const CMatrix G = Ht.adjoint() * Ht;
    const RVector d = s.gram_diagonal();
    for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b)
            CHECK(std::abs(G(a, b) - (a == b ? cplx(d(a)) : cplx(0.0))) < 1e-12 * d.maxCoeff());
    CHECK(d(3) == doctest::Approx(0.7 * s.h.col(1).squaredNorm()).epsilon(1e-14));
}

TEST_CASE("FullClutterCovariance: factor, dense, gram, mean power")
{
    Rng rng(3);
    const auto K = random_clutter(4, 3, 5, 2.0, rng);
    const CMatrix F = K.factor();
    CHECK(F.rows() == 12);
    CHECK(F.cols() == 5);
    CHECK(oracle::rel_fro(K.dense(), CMatrix(F * F.adjoint())) < 1e-13);
    CHECK(oracle::rel_fro(K.gram(), CMatrix(F.adjoint() * F)) < 1e-13);
    CHECK(K.mean_power() == doctest::Approx(K.dense().trace().real() / 12.0).epsilon(1e-13));
    // column j = scale_j (R_j kron b_j), vec index n*M + m
    CHECK(std::abs(F(2 * 3 + 1, 4) - K.scale(4) * K.signatures(2, 4) * K.steering(1, 4)) < 1e-14);
}

TEST_CASE("full_clutter_covariance against the entrywise oracle")
{
    Theorem1Params tp;
    tp.N = 8;
    tp.C = 2;
    tp.taps = 3;
    tp.scatterers = 2;
    tp.code_length = 4;
    const PacketClutter pk = theorem1_clutter(tp, 3, 5, 0);
    const auto K = full_clutter_covariance(pk);
    CHECK(K.rank_bound() <= tp.scatterers * tp.taps);
    CHECK(oracle::rel_fro(K.dense(), oracle::dense_block_covariance(pk, 0, tp.N)) < 1e-12);
    // calibrated to CNR 30 dB over unit noise
    CHECK(K.mean_power() == doctest::Approx(1000.0).epsilon(1e-9));
}

TEST_CASE("clutter_free_mi")
{
    SignalFactor s;
    s.p = 1.0;
    s.C = 2;
    s.h = CMatrix::Constant(4, 1, cplx(1.0));
    CHECK(clutter_free_mi(s, 1.0) == doctest::Approx(2.0 * std::log(5.0)).epsilon(1e-14));
    s.p = 0.0;
    CHECK(clutter_free_mi(s, 1.0) == 0.0);

    Rng rng(5);
    const auto r = random_signal(6, 4, 3, 0.4, rng);
    double expect = 0.0;
    for (int q = 0; q < 4; ++q)
        expect += 3.0 * std::log(1.0 + 0.4 * r.h.col(q).squaredNorm() / 0.8);
    CHECK(clutter_free_mi(r, 0.8) == doctest::Approx(expect).epsilon(1e-13));
    CHECK(std::fabs(mutual_information(r, no_clutter(12, 6), 0.8) - expect) < 1e-10);

    // through the eigenvalues of K' = H~ H~^H
    const CMatrix Kp = r.dense() * r.dense().adjoint();
    const auto ev = oracle::jacobi_eigenvalues(Kp);
    double via_eig = 0.0;
    for (int i = 0; i < r.N(); ++i)
        via_eig += std::log(1.0 + ev[i] / 0.8);
    CHECK(via_eig == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("mutual_information: Woodbury path against the dense oracle")
{
    Rng rng(7);
    // N=8, C=2, Q=4, M=4
    {
        const auto s = random_signal(4, 4, 2, 1.5, rng);
        const auto K = random_clutter(8, 4, 6, 3.0, rng);
        const double ref = oracle::dense_mutual_information(s, K, 1.0);
        CHECK(std::fabs(mutual_information(s, K, 1.0) - ref) <= 1e-8 * std::fabs(ref));
    }
    for (auto [N, C, M, r] : {std::tuple{16, 4, 8, 12}, std::tuple{32, 4, 16, 40}, std::tuple{32, 8, 32, 20}})
    {
        const auto s = random_signal(M, N / C, C, 0.5, rng);
        const auto K = random_clutter(N, M, r, 10.0, rng);
        const double ref = oracle::dense_mutual_information(s, K, 0.7);
        CAPTURE(N * M);
        CHECK(std::fabs(mutual_information(s, K, 0.7) - ref) <= 1e-8 * std::fabs(ref));
    }
}

TEST_CASE("mutual_information: detail, limits and ordering")
{
    Rng rng(9);
    const auto s = random_signal(6, 2, 2, 1.0, rng);
    const auto K = random_clutter(4, 6, 5, 4.0, rng);
    const auto d = mutual_information_detail(s, K, 0.9);
    CMatrix cov = K.dense();
    cov.diagonal().array() += 0.9;
    const CMatrix G = s.dense().adjoint() * cov.inverse() * s.dense();
    CHECK(oracle::rel_fro(d.G, G) < 1e-10);
    CHECK((d.G - d.G.adjoint()).norm() < 1e-12 * d.G.norm());

    CHECK(mutual_information(s, K, 1e12) < 1e-9);
    for (int t = 0; t < 20; ++t)
    {
        const auto st = random_signal(8, 4, 2, 1.0, rng);
        const auto Kt = random_clutter(8, 8, 1 + t, 1.0 + t, rng);
        CHECK(mutual_information(st, Kt, 1.0) <= clutter_free_mi(st, 1.0) + 1e-12);
    }
    auto bad = K;
    bad.scale(0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(mutual_information(s, bad, 1.0));
}

TEST_CASE("theorem1_study")
{
    Theorem1Params tp;
    tp.N = 16;
    tp.C = 4;
    tp.taps = 4;
    tp.scatterers = 2;
    tp.code_length = 4;
    const std::vector<int> Ms = {8, 16, 32};

    auto clean = tp;
    clean.clutter = false;
    const auto z = theorem1_study(clean, Ms, 3, 1);
    for (const auto &r : z.rows)
    {
        CHECK(r.gap == 0.0);
        CHECK(r.mi_clutter == r.mi_clean);
    }

    const auto a = theorem1_study(tp, Ms, 4, 1, 1);
    const auto b = theorem1_study(tp, Ms, 4, 1, 3);
    REQUIRE(a.rows.size() == 12);
    REQUIRE(a.summary.size() == 3);
    for (std::size_t i = 0; i < a.rows.size(); ++i)
    {
        CHECK(a.rows[i].M == b.rows[i].M);
        CHECK(a.rows[i].seed == b.rows[i].seed);
        CHECK(a.rows[i].gap == b.rows[i].gap);
        CHECK(a.rows[i].gap >= 0.0);
        CHECK(a.rows[i].gap == doctest::Approx(1.0 - a.rows[i].mi_clutter / a.rows[i].mi_clean).epsilon(1e-12));
        if (i > 0)
            CHECK(std::pair(a.rows[i - 1].M, a.rows[i - 1].seed) < std::pair(a.rows[i].M, a.rows[i].seed));
    }
    double mean = 0.0;
    for (int i = 0; i < 4; ++i)
        mean += a.rows[i].gap / 4;
    CHECK(a.summary[0].mean_gap == doctest::Approx(mean).epsilon(1e-12));
    CHECK(a.summary[0].mean_tr_DM > 0.0);
}
