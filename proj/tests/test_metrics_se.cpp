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

#include "coexist/channel_model.hpp"
#include "coexist/metrics_se.hpp"

#include <doctest.h>

using namespace coexist;

namespace
{

// M antennas, K users, one scatterer that reaches both training packets and the
// data packet; 3 packets of 16 subcarriers with C = 4.
UatfScenario small_scenario(int M, int K, PilotPolicy policy, bool clutter, double energy = 0.0)
{
    FrameTiming timing;
    timing.N = 16;
    timing.N_cp = 2;
    timing.N_pkt = 3;
    timing.Ts = 1e-6;
    Rng rng(99);
    const RadarWaveform wf = random_phase_waveform(3, timing.Ts, 1.0, 1e-3, rng);
    ScattererEnsemble ens;
    if (clutter)
        for (double delay : {4e-6, 22e-6, 38e-6})
        {
            Scatterer s;
            s.theta = 0.45;
            s.delay = delay;
            s.variances = {1.0, 0.6, 0.3, 0.1};
            ens.scatterers.push_back(s);
        }
    auto slot = build_slot_clutter(ens, wf, timing, M, 0.5);
    if (clutter)
    {
        const double f = cnr_scale_factor(average_clutter_power(slot), 10.0, 1.0);
        for (auto &p : slot)
            p.scale(f);
    }
    UatfScenario s;
    PilotBookParams bp;
    bp.K = K;
    bp.T = 2;
    bp.C = 4;
    bp.Q = 4;
    bp.policy = policy;
    bp.energy = energy;
    const double betas[] = {1.0, 0.6, 0.8, 0.5};
    for (int k = 0; k < K; ++k)
    {
        s.betas.push_back(betas[k]);
        s.powers.push_back(1.0 - 0.1 * k);
        bp.power.push_back(1.0 + 0.2 * k);
    }
    s.book = build_pilot_book(bp, rng);
    s.training.assign(slot.begin(), slot.begin() + 2);
    s.data = slot[2];
    s.subcarrier = 6;
    s.C = 4;
    s.sigma2_w = 1.0;
    return s;
}

} // namespace

TEST_CASE("instantaneous_sinr")
{
    Rng rng(1);
    const int M = 6;
    const CMatrix H = rng.complex_normal_matrix(M, 1);
    const LowRankPsd none{CMatrix(M, 0)};
    CHECK(instantaneous_sinr(H.col(0), H, {0.3}, 0.5, none, 0) ==
          doctest::Approx(0.3 * H.squaredNorm() / 0.5).epsilon(1e-13));

    CMatrix H2 = rng.complex_normal_matrix(M, 2);
    const CVector v = rng.complex_normal_vector(M);
    H2.col(0) -= v * (v.dot(H2.col(0)) / v.squaredNorm());
    CHECK(instantaneous_sinr(v, H2, {1.0, 1.0}, 0.5, none, 0) < 1e-28);

    // v orthogonal to b(theta): the rank-1 clutter contributes nothing
    const CVector b = steering_vector(0.6, M, 0.5);
    const CVector w = H.col(0) - b * (b.dot(H.col(0)) / b.squaredNorm());
    LowRankPsd K;
    K.factor = 10.0 * b;
    CHECK(K.quadratic(w) < 1e-24 * w.squaredNorm() * 100.0 * M);
    CHECK(instantaneous_sinr(w, H, {1.0}, 0.5, K, 0) ==
          doctest::Approx(instantaneous_sinr(w, H, {1.0}, 0.5, none, 0)).epsilon(1e-12));

    CHECK_THROWS_AS(instantaneous_sinr(CVector::Zero(M), H, {1.0}, 0.5, none, 0), DegenerateCombinerError);
    CHECK_THROWS_AS(instantaneous_sinr(H.col(0), H, {1.0, 1.0}, 0.5, none, 0), DimensionError);

    // the covariance form is the mean of the per-draw form over clutter draws
    const CVector u = rng.complex_normal_vector(M);
    double acc = 0.0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t)
    {
        const CVector c = K.factor * rng.complex_normal();
        acc += 1.0 / instantaneous_sinr_draw(u, H, {1.0}, 0.5, c, 0);
    }
    CHECK(acc / trials == doctest::Approx(1.0 / instantaneous_sinr(u, H, {1.0}, 0.5, K, 0)).epsilon(0.03));
}

TEST_CASE("spectral_efficiency")
{
    CHECK(spectral_efficiency(0.0, 14, 7) == 0.0);
    CHECK(spectral_efficiency(1.0, 14, 7) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(spectral_efficiency(3.0, 14, 0) == doctest::Approx(2.0).epsilon(1e-15));
    for (double s : {0.01, 2.5, 1e3})
        CHECK(std::fabs(spectral_efficiency(s, 14, 7) - 7.0 / 14.0 * std::log2(1.0 + s)) < 1e-12);
    CHECK_THROWS_AS(spectral_efficiency(1.0, 14, 14), Error);
    CHECK_THROWS_AS(spectral_efficiency(-1.0, 14, 7), Error);
}

TEST_CASE("UatfAccumulator: add, add_terms and merge")
{
    Rng rng(3);
    const int M = 4, K = 3;
    UatfAccumulator all(K, 1), a(K, 1), b(K, 1), c(K, 1);
    for (int t = 0; t < 50; ++t)
    {
        const CVector v = rng.complex_normal_vector(M);
        const CMatrix H = rng.complex_normal_matrix(M, K);
        const CVector cl = rng.complex_normal_vector(M);
        all.add(v, H, cl);
        (t < 20 ? a : b).add(v, H, cl);
        c.add_terms((v.adjoint() * H).transpose(), v.squaredNorm(), std::norm(v.dot(cl)));
    }
    a.merge(b);
    CHECK(a.count() == 50);
    const std::vector<double> p = {1.0, 0.5, 2.0};
    CHECK(a.sinr(p, 0.7, 1) == doctest::Approx(all.sinr(p, 0.7, 1)).epsilon(1e-13));
    CHECK(c.sinr(p, 0.7, 1) == doctest::Approx(all.sinr(p, 0.7, 1)).epsilon(1e-13));
    CHECK(std::abs(c.mean_gain() - all.mean_gain()) < 1e-13);
}

TEST_CASE("intermediate expectations by Monte Carlo")
{
    Rng rng(5);
    const int M = 5, trials = 200000;
    const double beta = 0.8;
    // Hermitian PSD D
    const CMatrix A = rng.complex_normal_matrix(M, M);
    const CMatrix D = A * A.adjoint() / M;
    double e1 = 0.0, e2 = 0.0;
    for (int t = 0; t < trials; ++t)
    {
        const CVector h = beta * rng.complex_normal_vector(M);
        e1 += std::pow(h.squaredNorm(), 2);
        e2 += std::norm(h.dot(D * h));
    }
    const double b4 = std::pow(beta, 4);
    CHECK(e1 / trials == doctest::Approx(b4 * M * (M + 1)).epsilon(0.02));
    const double trD = D.trace().real(), trD2 = (D * D).trace().real();
    CHECK(e2 / trials == doctest::Approx(b4 * (trD * trD + trD2)).epsilon(0.03));
}

TEST_CASE("uatf_sinr_montecarlo: perfect CSI, one user, no clutter")
{
    const auto s = small_scenario(8, 1, PilotPolicy::Orthogonal, false);
    const int M = 8;
    const double p = s.powers[0], b2 = s.betas[0] * s.betas[0];
    // E[h^H h] = b2 M, E|h^H h|^2 = b2^2 M (M + 1), E||h||^2 = b2 M
    const double expect = p * b2 * M / (p * b2 + s.sigma2_w);
    const auto mc = uatf_sinr_montecarlo(s, Estimator::Perfect, Detector::CM, 100000, 7);
    CHECK(mc.sinr[0] == doctest::Approx(expect).epsilon(0.03));
    CHECK(mc.stats[0].mean_norm2() == doctest::Approx(b2 * M).epsilon(0.02));

    auto z = s;
    z.powers = {0.0};
    CHECK(uatf_sinr_montecarlo(z, Estimator::Perfect, Detector::CM, 100, 7).sinr[0] == 0.0);
    CHECK_THROWS_AS(uatf_sinr_montecarlo(s, Estimator::PM, Detector::CM, 0, 7), Error);
    CHECK_THROWS_AS(uatf_sinr_montecarlo(s, Estimator::PM, Detector::AEZF, 10, 7), Error);
}

TEST_CASE("uatf_sinr_montecarlo: 1e4 against 1e5 trials")
{
    const auto s = small_scenario(8, 2, PilotPolicy::RandomQpsk, true);
    for (Estimator e : {Estimator::PM, Estimator::MMSE})
    {
        const auto a = uatf_sinr_montecarlo(s, e, Detector::CM, 10000, 11);
        const auto b = uatf_sinr_montecarlo(s, e, Detector::CM, 100000, 12);
        for (int k = 0; k < 2; ++k)
            CHECK(a.sinr[k] == doctest::Approx(b.sinr[k]).epsilon(0.03));
    }
}

TEST_CASE("uatf_sinr_montecarlo: worker count does not change the result")
{
    const auto s = small_scenario(8, 2, PilotPolicy::RandomQpsk, true);
    const auto a = uatf_sinr_montecarlo(s, Estimator::MMSE, Detector::ZF, 3000, 13, 1);
    const auto b = uatf_sinr_montecarlo(s, Estimator::MMSE, Detector::ZF, 3000, 13, 4);
    for (int k = 0; k < 2; ++k)
        CHECK(std::fabs(a.sinr[k] - b.sinr[k]) <= 1e-12 * a.sinr[k]);
}

TEST_CASE("closed forms: clutter-free reductions")
{
    // unit pilot energy so that ||P~||^2 = 1
    const int M = 8;
    const auto s = small_scenario(M, 2, PilotPolicy::Orthogonal, false, 1.0);
    const LowRankPsd none{CMatrix(M, 0)};
    for (int k = 0; k < 2; ++k)
    {
        const double pp = s.book.power[k], b2 = s.betas[k] * s.betas[k], s2 = s.sigma2_w;
        const double trR = M * (pp * b2 + s2);
        double interf = 0.0;
        for (int j = 0; j < 2; ++j)
            interf += s.powers[j] * s.betas[j] * s.betas[j] * trR;
        const double pm = s.powers[k] * pp * b2 * b2 * M * M / (interf + s2 * trR);
        CHECK(uatf_sinr_pm_closed(s.book, s.betas, s.powers, none, none, s2, 1, k) ==
              doctest::Approx(pm).epsilon(1e-12));

        const auto parts = uatf_closed_parts(Estimator::MMSE, s.book, s.betas, s.powers, none, s2, 1, k);
        CHECK(parts.mm.trace_D() == doctest::Approx(M * std::sqrt(pp) * b2 / (pp * b2 + s2)).epsilon(1e-12));
    }

    // single user, vanishing noise: the estimate becomes exact, the noise term
    // vanishes and only the beamforming-gain spread remains, so the bound rises
    // monotonically to M rather than without limit
    const auto one = small_scenario(M, 1, PilotPolicy::Orthogonal, false, 1.0);
    double last = 0.0;
    for (double s2 : {1.0, 1e-2, 1e-4, 1e-6})
    {
        const double v = uatf_sinr_mmse_closed(one.book, one.betas, one.powers, none, none, s2, 0, 0);
        CHECK(v > last);
        last = v;
    }
    CHECK(last == doctest::Approx(M).epsilon(1e-4));
    CHECK_THROWS_AS(uatf_closed_parts(Estimator::Perfect, s.book, s.betas, s.powers, none, 1.0, 0, 0), Error);
}

TEST_CASE("closed forms against Monte Carlo on a small instance")
{
    for (PilotPolicy pol : {PilotPolicy::Orthogonal, PilotPolicy::RandomQpsk})
    {
        const auto s = small_scenario(8, 2, pol, true);
        for (Estimator e : {Estimator::PM, Estimator::MMSE})
        {
            const auto mc = uatf_sinr_montecarlo(s, e, Detector::CM, 100000, 17);
            for (int k = 0; k < 2; ++k)
            {
                const double closed = uatf_sinr_closed(e, s, k);
                CAPTURE(to_string(e));
                CAPTURE(k);
                CHECK(mc.sinr[k] == doctest::Approx(closed).epsilon(0.05));
            }
        }
    }
}

TEST_CASE("closed_parts: trace via per-column forms")
{
    const auto s = small_scenario(8, 2, PilotPolicy::RandomQpsk, true);
    const auto dc = s.data_covariance();
    for (Estimator e : {Estimator::PM, Estimator::MMSE})
    {
        const auto parts =
            uatf_closed_parts(e, s.book, s.betas, s.powers, s.training_factor(0), s.sigma2_w, s.block(), 0);
        const CMatrix A = e == Estimator::PM ? parts.mm.R_dense() : CMatrix(parts.mm.R_dense().inverse());
        const double t = (A * dc.dense()).trace().real();
        CHECK(parts.clutter_forms(dc.factor).sum() == doctest::Approx(t).epsilon(1e-10));
        CHECK(parts.sinr(dc) == doctest::Approx(uatf_sinr_closed(e, s, 0)).epsilon(1e-12));
    }
}

TEST_CASE("UatF bound sits below the mean instantaneous SINR")
{
    const auto s = small_scenario(8, 2, PilotPolicy::Orthogonal, true);
    const auto mc = uatf_sinr_montecarlo(s, Estimator::Perfect, Detector::CM, 20000, 19);
    const auto K_C = s.data_covariance();
    Rng rng(21);
    double mean0 = 0.0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t)
    {
        CMatrix H(8, 2);
        for (int j = 0; j < 2; ++j)
            H.col(j) = s.betas[j] * rng.complex_normal_vector(8);
        mean0 += instantaneous_sinr(H.col(0), H, s.powers, s.sigma2_w, K_C, 0) / trials;
    }
    CHECK(spectral_efficiency(mc.sinr[0], 14, 7) <= 0.5 * std::log2(1.0 + mean0));
}
