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

#include "coexist/metrics_se.hpp"
#include "coexist/parallel.hpp"
#include "coexist/rng.hpp"

namespace coexist
{

namespace
{

double interference_plus_noise(const CVector &v, const CMatrix &H, const std::vector<double> &powers, double sigma2_w,
                               int k)
{
    double acc = sigma2_w * v.squaredNorm();
    for (Eigen::Index j = 0; j < H.cols(); ++j)
        if (j != k)
            acc += powers[j] * std::norm(v.dot(H.col(j)));
    return acc;
}

void check_sinr_args(const CVector &v, const CMatrix &H, const std::vector<double> &powers, int k)
{
    if (v.squaredNorm() == 0.0)
        throw DegenerateCombinerError("sinr: zero combiner");
    if (H.rows() != v.size() || static_cast<Eigen::Index>(powers.size()) != H.cols() || k < 0 || k >= H.cols())
        throw DimensionError("sinr: inconsistent dimensions");
}

} // namespace

double instantaneous_sinr(const CVector &v, const CMatrix &H, const std::vector<double> &powers, double sigma2_w,
                          const LowRankPsd &K_C, int k)
{
    check_sinr_args(v, H, powers, k);
    const double num = powers[k] * std::norm(v.dot(H.col(k)));
    const double clutter = K_C.factor.cols() ? K_C.quadratic(v) : 0.0;
    return num / (interference_plus_noise(v, H, powers, sigma2_w, k) + clutter);
}

double instantaneous_sinr_draw(const CVector &v, const CMatrix &H, const std::vector<double> &powers, double sigma2_w,
                               const CVector &clutter, int k)
{
    check_sinr_args(v, H, powers, k);
    const double num = powers[k] * std::norm(v.dot(H.col(k)));
    const double c = clutter.size() ? std::norm(v.dot(clutter)) : 0.0;
    return num / (interference_plus_noise(v, H, powers, sigma2_w, k) + c);
}

double spectral_efficiency(double sinr_uatf, int N_pkt, int T)
{
    if (T >= N_pkt || T < 0)
        throw Error("spectral_efficiency: need 0 <= T < N_pkt");
    if (!(sinr_uatf >= 0.0))
        throw Error("spectral_efficiency: negative SINR");
    return static_cast<double>(N_pkt - T) / N_pkt * std::log2(1.0 + sinr_uatf);
}

UatfAccumulator::UatfAccumulator(int K, int target) : cross_(K), target_(target) {}

void UatfAccumulator::add_terms(const CVector &vh, double norm2, double clutter)
{
    ++count_;
    gain_re_.add(vh(target_).real());
    gain_im_.add(vh(target_).imag());
    for (std::size_t j = 0; j < cross_.size(); ++j)
        cross_[j].add(std::norm(vh(static_cast<Eigen::Index>(j))));
    norm2_.add(norm2);
    clutter_.add(clutter);
}

void UatfAccumulator::add(const CVector &v, const CMatrix &H, const CVector &clutter)
{
    const CVector hv = H.adjoint() * v; // h_j^H v = conj(v^H h_j)
    add_terms(hv.conjugate(), v.squaredNorm(), clutter.size() ? std::norm(v.dot(clutter)) : 0.0);
}

void UatfAccumulator::merge(const UatfAccumulator &other)
{
    count_ += other.count_;
    gain_re_.add(other.gain_re_.value());
    gain_im_.add(other.gain_im_.value());
    for (std::size_t j = 0; j < cross_.size(); ++j)
        cross_[j].add(other.cross_[j].value());
    norm2_.add(other.norm2_.value());
    clutter_.add(other.clutter_.value());
}

cplx UatfAccumulator::mean_gain() const
{
    return count_ ? cplx(gain_re_.value(), gain_im_.value()) / static_cast<double>(count_) : cplx(0.0);
}

double UatfAccumulator::mean_cross(int j) const { return count_ ? cross_.at(j).value() / count_ : 0.0; }
double UatfAccumulator::mean_norm2() const { return count_ ? norm2_.value() / count_ : 0.0; }
double UatfAccumulator::mean_clutter() const { return count_ ? clutter_.value() / count_ : 0.0; }

double UatfAccumulator::sinr(const std::vector<double> &powers, double sigma2_w, int k) const
{
    const double desired = powers[k] * std::norm(mean_gain());
    double den = -desired + sigma2_w * mean_norm2() + mean_clutter();
    for (std::size_t j = 0; j < cross_.size(); ++j)
        den += powers[j] * mean_cross(static_cast<int>(j));
    if (desired == 0.0)
        return 0.0;
    return desired / den;
}

LowRankPsd UatfScenario::training_factor(int k) const
{
    return training_clutter_factor(training, block(), C, book.normalized(k, block()));
}

namespace
{

struct TrialTerms
{
    std::vector<CVector> vh; // per user k: v_k^H h_j for all j
    std::vector<double> norm2;
    std::vector<double> clutter;
};

} // namespace

UatfMonteCarloResult uatf_sinr_montecarlo(const UatfScenario &s, Estimator estimator, Detector detector,
                                          std::size_t trials, std::uint64_t seed, int workers)
{
    if (trials < 1)
        throw Error("uatf_sinr_montecarlo: need at least one trial");
    if (detector == Detector::AEZF)
        throw Error("uatf_sinr_montecarlo: AEZF needs full observables and is not supported here");
    const int M = s.M();
    const int K = s.K();
    const int q = s.block();
    const int C = s.C;
    const int TC = s.book.length();
    if (static_cast<int>(s.training.size()) * C != TC)
        throw DimensionError("uatf_sinr_montecarlo: training packets do not match the pilot length");

    std::vector<MmseMatrices> mmse;
    if (estimator == Estimator::MMSE)
        for (int k = 0; k < K; ++k)
            mmse.push_back(mmse_matrices(s.book, s.betas, s.training_factor(k), s.sigma2_w, q, k));
    const LowRankPsd K_C = s.data_covariance();
    const CMatrix Uc = clutter_subspace(K_C);
    CMatrix Ub;
    if (detector == Detector::BZF)
        Ub = bessel_basis(M, s.spacing_ratio, s.bzf_rank).basis;

    std::vector<TrialTerms> terms(trials);
    parallel_for(trials, workers, [&](std::size_t t) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
        CMatrix H(M, K);
        for (int j = 0; j < K; ++j)
            H.col(j) = s.betas[j] * rng.complex_normal_vector(M);

        CMatrix H_hat = H;
        if (estimator != Estimator::Perfect)
        {
            CMatrix Cq(M, TC);
            for (std::size_t ell = 0; ell < s.training.size(); ++ell)
                Cq.middleCols(static_cast<Eigen::Index>(ell) * C, C) = s.training[ell].draw_columns(q * C, C, rng);
            CMatrix Y = rng.complex_normal_matrix(M, TC, s.sigma2_w) + Cq;
            for (int j = 0; j < K; ++j)
                Y += std::sqrt(s.book.power[j]) * H.col(j) * s.book.pilot(j, q).transpose();
            for (int j = 0; j < K; ++j)
                H_hat.col(j) = estimator == Estimator::PM ? pm_estimate(Y, s.book, j, q)
                                                          : mmse_estimate(build_r_qk(Y, s.book, j, q), mmse[j]);
        }
        const CVector c = s.data.draw_columns(s.subcarrier, 1, rng).col(0);

        CMatrix V(M, K);
        switch (detector)
        {
        case Detector::CM:
            V = H_hat;
            break;
        case Detector::ZF:
            for (int k = 0; k < K; ++k)
                V.col(k) = zf_combiner(H_hat.col(k), Uc).v;
            break;
        case Detector::BZF:
            for (int k = 0; k < K; ++k)
                V.col(k) = bzf_combiner(H_hat.col(k), {RVector(), Ub}).v;
            break;
        case Detector::LMMSE:
            V = lmmse_combiners(H_hat, s.powers, s.sigma2_w, K_C);
            break;
        case Detector::FZF:
            V = fzf_combiners(H_hat, Uc);
            break;
        case Detector::AEZF:
            break;
        }

        TrialTerms &out = terms[t];
        const CMatrix VH = V.adjoint() * H; // (k, j) = v_k^H h_j
        const CVector Vc = V.adjoint() * c;
        out.vh.resize(K);
        out.norm2.resize(K);
        out.clutter.resize(K);
        for (int k = 0; k < K; ++k)
        {
            out.vh[k] = VH.row(k).transpose();
            out.norm2[k] = V.col(k).squaredNorm();
            out.clutter[k] = std::norm(Vc(k));
        }
    });

    UatfMonteCarloResult res;
    res.trials = trials;
    for (int k = 0; k < K; ++k)
        res.stats.emplace_back(K, k);
    for (const auto &t : terms)
        for (int k = 0; k < K; ++k)
            res.stats[k].add_terms(t.vh[k], t.norm2[k], t.clutter[k]);
    for (int k = 0; k < K; ++k)
        res.sinr.push_back(res.stats[k].sinr(s.powers, s.sigma2_w, k));
    return res;
}

RVector UatfClosedParts::clutter_forms(const CMatrix &steering) const
{
    RVector out(steering.cols());
    if (steering.cols() == 0)
        return out;
    const CMatrix AB = estimator == Estimator::MMSE ? mm.R.solve(steering) : mm.R.apply(steering);
    for (Eigen::Index i = 0; i < steering.cols(); ++i)
        out(i) = steering.col(i).dot(AB.col(i)).real();
    return out;
}

double UatfClosedParts::sinr(const LowRankPsd &data_clutter) const
{
    double t = 0.0;
    if (data_clutter.factor.cols())
        t = clutter_forms(data_clutter.factor).sum();
    return sinr(t);
}

UatfClosedCoefficients uatf_closed_coefficients(Estimator estimator, const PilotBook &book,
                                                const std::vector<double> &betas, const std::vector<double> &powers,
                                                double sigma2_w, int q, int k, int M_int, double trR, double trRinv)
{
    if (estimator == Estimator::Perfect)
        throw Error("uatf_closed_coefficients: closed forms exist for pm and mmse only");
    UatfClosedCoefficients out;
    const double b2k = betas[k] * betas[k];
    if (estimator == Estimator::PM)
    {
        const double M = static_cast<double>(M_int);
        out.num = powers[k] * book.power[k] * b2k * b2k * M * M;
        out.base = sigma2_w * trR;
        out.coef = 1.0;
        for (int j = 0; j < book.users(); ++j)
        {
            const double b2 = betas[j] * betas[j];
            out.base += powers[j] * b2 * trR;
            if (j != k)
                out.base += powers[j] * book.power[j] * b2 * b2 * M * M * std::norm(book.cross(j, k, q));
        }
        return out;
    }
    const double spk = std::sqrt(book.power[k]);
    const double gain = spk * b2k;
    const double trD = gain * trRinv;
    out.num = powers[k] * book.power[k] * b2k * b2k * trD * trD;
    out.base = spk * b2k * sigma2_w * trD;
    out.coef = spk * b2k * gain;
    for (int j = 0; j < book.users(); ++j)
    {
        const double b2 = betas[j] * betas[j];
        out.base += powers[j] * spk * b2 * b2k * trD;
        if (j != k)
            out.base += powers[j] * book.power[j] * b2 * b2 * trD * trD * std::norm(book.cross(j, k, q));
    }
    return out;
}

UatfClosedParts uatf_closed_parts(Estimator estimator, const PilotBook &book, const std::vector<double> &betas,
                                  const std::vector<double> &powers, const LowRankPsd &training_clutter,
                                  double sigma2_w, int q, int k)
{
    if (estimator == Estimator::Perfect)
        throw Error("uatf_closed_parts: closed forms exist for pm and mmse only");
    auto mm = mmse_matrices(book, betas, training_clutter, sigma2_w, q, k);
    const auto c = uatf_closed_coefficients(estimator, book, betas, powers, sigma2_w, q, k,
                                            static_cast<int>(training_clutter.dim()), mm.trace_R(),
                                            estimator == Estimator::MMSE ? mm.R.trace_inverse() : 0.0);
    return {estimator, c, std::move(mm)};
}

double uatf_sinr_pm_closed(const PilotBook &book, const std::vector<double> &betas, const std::vector<double> &powers,
                           const LowRankPsd &training_clutter, const LowRankPsd &data_clutter, double sigma2_w, int q,
                           int k)
{
    return uatf_closed_parts(Estimator::PM, book, betas, powers, training_clutter, sigma2_w, q, k).sinr(data_clutter);
}

double uatf_sinr_mmse_closed(const PilotBook &book, const std::vector<double> &betas,
                             const std::vector<double> &powers, const LowRankPsd &training_clutter,
                             const LowRankPsd &data_clutter, double sigma2_w, int q, int k)
{
    return uatf_closed_parts(Estimator::MMSE, book, betas, powers, training_clutter, sigma2_w, q, k)
        .sinr(data_clutter);
}

} // namespace coexist
