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

#ifndef COEXIST_METRICS_SE_HPP
#define COEXIST_METRICS_SE_HPP

#include "coexist/numerics.hpp"
#include "coexist/radar_clutter.hpp"
#include "coexist/receivers.hpp"
#include "coexist/uplink_signal.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace coexist
{

// Post-detection SINR of user k with the clutter term v^H K_C v.
double instantaneous_sinr(const CVector &v, const CMatrix &H, const std::vector<double> &powers, double sigma2_w,
                          const LowRankPsd &K_C, int k);
// Diagnostic variant with one realized clutter vector in place of the covariance.
double instantaneous_sinr_draw(const CVector &v, const CMatrix &H, const std::vector<double> &powers, double sigma2_w,
                               const CVector &clutter, int k);

double spectral_efficiency(double sinr_uatf, int N_pkt, int T);

// Running sums of the expectations appearing in the UatF SINR for one user.
class UatfAccumulator
{
  public:
    explicit UatfAccumulator(int K = 0, int target = 0);
    void add(const CVector &v, const CMatrix &H, const CVector &clutter);
    // Same update from precomputed v^H h_j, ||v||^2 and |v^H C|^2.
    void add_terms(const CVector &vh, double norm2, double clutter);
    // Merge in trial order; merging is associative up to compensated rounding.
    void merge(const UatfAccumulator &other);

    std::size_t count() const { return count_; }
    cplx mean_gain() const;                // E[v^H h_k]
    double mean_cross(int j) const;        // E|v^H h_j|^2
    double mean_norm2() const;             // E||v||^2
    double mean_clutter() const;           // E|v^H C|^2
    double sinr(const std::vector<double> &powers, double sigma2_w, int k) const;

  private:
    std::size_t count_ = 0;
    CompensatedSum gain_re_, gain_im_, norm2_, clutter_;
    std::vector<CompensatedSum> cross_;
    int target_ = 0;
};

// Small-instance scenario for the UatF expectations: one coherence block, one
// data subcarrier, training packets and one data packet of clutter statistics.
struct UatfScenario
{
    std::vector<double> betas;
    std::vector<double> powers;       // data powers p_k
    PilotBook book;                   // p_{p,k} inside
    std::vector<PacketClutter> training; // first T packets
    PacketClutter data;                  // data packet ell
    int subcarrier = 0;               // n inside the data packet
    int C = 1;
    double sigma2_w = 1.0;
    double spacing_ratio = 0.5;
    int bzf_rank = 0;

    int M() const { return data.M(); }
    int K() const { return static_cast<int>(betas.size()); }
    int block() const { return block_of(subcarrier, C); }
    LowRankPsd training_factor(int k) const;
    LowRankPsd data_covariance() const { return data.covariance(subcarrier); }
};

struct UatfMonteCarloResult
{
    std::vector<double> sinr;            // per user
    std::vector<UatfAccumulator> stats;  // per user
    std::size_t trials = 0;
};

// Each trial draws fresh fading, training noise, training clutter and data
// clutter from stream derive_seed(seed, {trial}); combiners follow the chosen
// estimator and detector.
UatfMonteCarloResult uatf_sinr_montecarlo(const UatfScenario &s, Estimator estimator, Detector detector,
                                          std::size_t trials, std::uint64_t seed, int workers = 1);

// SINR = num / (base + coef * t) for the CM closed forms, where t = tr(R K_C)
// for PM and tr(R^{-1} K_C) for MMSE. Only tr R and tr R^{-1} of R_{q,k} enter.
struct UatfClosedCoefficients
{
    double num = 0.0;
    double base = 0.0;
    double coef = 0.0;
    double sinr(double clutter_trace) const { return num == 0.0 ? 0.0 : num / (base + coef * clutter_trace); }
};

UatfClosedCoefficients uatf_closed_coefficients(Estimator estimator, const PilotBook &book,
                                                const std::vector<double> &betas, const std::vector<double> &powers,
                                                double sigma2_w, int q, int k, int M, double trace_R,
                                                double trace_R_inverse);

// Pieces of the CM closed forms for one (k, q) that do not depend on the data
// clutter: SINR = num / (base + coef * tr(A K_C)), A = R for PM and R^{-1} for MMSE.
struct UatfClosedParts
{
    Estimator estimator = Estimator::PM;
    UatfClosedCoefficients c;
    MmseMatrices mm;

    // tr(A K) for K = sum_i w_i b_i b_i^H, from the per-column quadratic forms b_i^H A b_i.
    RVector clutter_forms(const CMatrix &steering) const;
    double sinr(double clutter_trace) const { return c.sinr(clutter_trace); }
    double sinr(const LowRankPsd &data_clutter) const;
};

UatfClosedParts uatf_closed_parts(Estimator estimator, const PilotBook &book, const std::vector<double> &betas,
                                  const std::vector<double> &powers, const LowRankPsd &training_clutter,
                                  double sigma2_w, int q, int k);

// Closed forms for CM combining with PM and MMSE channel estimates.
double uatf_sinr_pm_closed(const PilotBook &book, const std::vector<double> &betas, const std::vector<double> &powers,
                           const LowRankPsd &training_clutter, const LowRankPsd &data_clutter, double sigma2_w, int q,
                           int k);
double uatf_sinr_mmse_closed(const PilotBook &book, const std::vector<double> &betas,
                             const std::vector<double> &powers, const LowRankPsd &training_clutter,
                             const LowRankPsd &data_clutter, double sigma2_w, int q, int k);

inline double uatf_sinr_closed(Estimator e, const UatfScenario &s, int k)
{
    const auto tf = s.training_factor(k);
    const auto dc = s.data_covariance();
    return e == Estimator::MMSE ? uatf_sinr_mmse_closed(s.book, s.betas, s.powers, tf, dc, s.sigma2_w, s.block(), k)
                                : uatf_sinr_pm_closed(s.book, s.betas, s.powers, tf, dc, s.sigma2_w, s.block(), k);
}

struct SinrSeRow
{
    int user = 0;
    int block = 0;
    int subcarrier = 0;
    double sinr_inst = 0.0;
    double sinr_uatf = 0.0;
    double se = 0.0;
};

struct SinrSeReport
{
    std::string estimator;
    std::string detector;
    int M = 0;
    int K = 0;
    double cnr_db = 0.0;
    std::uint64_t seed = 0;
    std::size_t trials = 0;
    std::vector<SinrSeRow> rows;
};

} // namespace coexist

#endif
