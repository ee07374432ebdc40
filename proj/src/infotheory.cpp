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

#include "coexist/infotheory.hpp"
#include "coexist/parallel.hpp"
#include "coexist/rng.hpp"

#include <algorithm>

namespace coexist
{

CMatrix FullClutterCovariance::factor() const
{
    const int r = rank_bound();
    CMatrix F(static_cast<Eigen::Index>(N) * M, r);
    for (int j = 0; j < r; ++j)
        for (int n = 0; n < N; ++n)
            F.col(j).segment(static_cast<Eigen::Index>(n) * M, M) = (scale(j) * signatures(n, j)) * steering.col(j);
    return F;
}

CMatrix FullClutterCovariance::dense() const
{
    const CMatrix F = factor();
    return F * F.adjoint();
}

CMatrix FullClutterCovariance::gram() const
{
    const CMatrix RR = signatures.adjoint() * signatures;
    const CMatrix BB = steering.adjoint() * steering;
    return RR.cwiseProduct(BB).cwiseProduct((scale * scale.transpose()).cast<cplx>());
}

double FullClutterCovariance::mean_power() const
{
    double acc = 0.0;
    for (int j = 0; j < rank_bound(); ++j)
        acc += scale(j) * scale(j) * signatures.col(j).squaredNorm() * steering.col(j).squaredNorm();
    return N && M ? acc / (static_cast<double>(N) * M) : 0.0;
}

FullClutterCovariance full_clutter_covariance(const PacketClutter &packet)
{
    FullClutterCovariance out;
    out.N = packet.N();
    out.M = packet.M();
    int r = 0;
    for (int i = 0; i < packet.active_count(); ++i)
        r += static_cast<int>(packet.variances(i).size());
    out.signatures.resize(out.N, r);
    out.steering.resize(out.M, r);
    out.scale.resize(r);
    int j = 0;
    for (int i = 0; i < packet.active_count(); ++i)
    {
        const auto &var = packet.variances(i);
        for (std::size_t m = 0; m < var.size(); ++m, ++j)
        {
            out.signatures.col(j) = packet.signatures(i).col(static_cast<Eigen::Index>(m));
            out.steering.col(j) = packet.steering().col(i);
            out.scale(j) = std::sqrt(packet.transmit_power() * var[m]);
        }
    }
    return out;
}

CMatrix SignalFactor::dense() const
{
    const int n_total = N();
    CMatrix Ht = CMatrix::Zero(static_cast<Eigen::Index>(n_total) * M(), n_total);
    const double sp = std::sqrt(p);
    for (int i = 0; i < Q(); ++i)
        for (int c = 0; c < C; ++c)
        {
            const int col = i * C + c;
            Ht.col(col).segment(static_cast<Eigen::Index>(col) * M(), M()) = sp * h.col(i);
        }
    return Ht;
}

RVector SignalFactor::gram_diagonal() const
{
    RVector d(N());
    for (int i = 0; i < Q(); ++i)
        d.segment(i * C, C).setConstant(p * h.col(i).squaredNorm());
    return d;
}

MutualInformation mutual_information_detail(const SignalFactor &signal, const FullClutterCovariance &clutter,
                                            double sigma2_w)
{
    if (!(sigma2_w > 0.0) || !std::isfinite(sigma2_w))
        throw Error("mutual_information: noise variance must be positive and finite");
    if (!signal.h.allFinite() || !std::isfinite(signal.p))
        throw Error("mutual_information: non-finite signal factor");
    const int N = signal.N();
    const int r = clutter.rank_bound();
    if (r > 0 && (clutter.N != N || clutter.M != signal.M()))
        throw DimensionError("mutual_information: clutter and signal dimensions differ");

    MutualInformation out;
    CMatrix G = CMatrix::Zero(N, N);
    G.diagonal() = (signal.gram_diagonal() / sigma2_w).cast<cplx>();
    out.D_M = CMatrix::Zero(N, N);
    if (r > 0)
    {
        if (!clutter.signatures.allFinite() || !clutter.steering.allFinite() || !clutter.scale.allFinite())
            throw Error("mutual_information: non-finite clutter factor");
        // A = H~^H F: row (i, c), column j = sqrt(p) h_i^H b_j R_j[iC + c] s_j
        const CMatrix hb = signal.h.adjoint() * clutter.steering; // Q x r
        CMatrix A(N, r);
        const double sp = std::sqrt(signal.p);
        for (int i = 0; i < signal.Q(); ++i)
            for (int c = 0; c < signal.C; ++c)
            {
                const int row = i * signal.C + c;
                for (int j = 0; j < r; ++j)
                    A(row, j) = sp * hb(i, j) * clutter.signatures(row, j) * clutter.scale(j);
            }
        // (sigma2 I + F F^H)^{-1} = (I - F (sigma2 I + F^H F)^{-1} F^H) / sigma2
        CMatrix core = clutter.gram();
        core.diagonal().array() += sigma2_w;
        Eigen::LLT<CMatrix> llt(0.5 * (core + core.adjoint()));
        if (llt.info() != Eigen::Success)
            throw SingularMatrixError("mutual_information: clutter core factorization failed");
        const CMatrix loss = A * llt.solve(A.adjoint());
        G -= loss / sigma2_w;
        out.D_M = loss / (static_cast<double>(signal.M()) * sigma2_w);
    }
    if (r > 0 && clutter.scale.cwiseAbs().maxCoeff() > 0.0)
    {
        CMatrix I_G = CMatrix::Identity(N, N) + 0.5 * (G + G.adjoint());
        out.mi = logdet_psd(I_G);
    }
    else
        out.mi = clutter_free_mi(signal, sigma2_w); // I + G is diagonal
    out.G = std::move(G);
    return out;
}

double clutter_free_mi(const SignalFactor &signal, double sigma2_w)
{
    double acc = 0.0;
    for (int i = 0; i < signal.Q(); ++i)
        acc += std::log1p(signal.p * signal.h.col(i).squaredNorm() / sigma2_w);
    return signal.C * acc;
}

PacketClutter theorem1_clutter(const Theorem1Params &pr, int M, std::uint64_t master, int seed)
{
    Rng rng(derive_seed(master, {static_cast<std::uint64_t>(seed), 0x7431ULL}));
    FrameTiming timing;
    timing.N = pr.N;
    timing.N_cp = pr.N_cp;
    timing.N_pkt = 1;
    timing.Ts = pr.Ts;

    const RadarWaveform waveform = random_phase_waveform(pr.code_length, pr.Ts, 1.0, 1e-3, rng);
    // Echo samples of offset d occupy indices (d - 1, d + L + Q_c - 1); 1 <= d <= N - L - Q_c + 1 keeps all inside.
    const double d_max = pr.N - pr.code_length - pr.taps + 1;
    if (d_max < 1.0)
        throw Error("theorem1: packet too short for the echo length");
    ScattererEnsemble ens;
    ens.scatterers.resize(pr.scatterers);
    for (auto &s : ens.scatterers)
    {
        s.theta = rng.uniform(-kPi / 2, kPi / 2);
        s.delay = timing.packet_start(0) + rng.uniform(1.0, d_max) * pr.Ts;
        s.variances.assign(pr.taps, 1.0);
    }
    PacketClutter unit(ens, waveform, 0, timing, 1, pr.spacing_ratio);
    double avg = 0.0;
    for (int n = 0; n < pr.N; ++n)
        avg += unit.per_antenna_power(n);
    avg /= pr.N;
    const double factor = cnr_scale_factor(avg, pr.cnr_db, pr.sigma2_w);
    PacketClutter out(ens, waveform, 0, timing, M, pr.spacing_ratio);
    out.scale(pr.clutter ? factor : 0.0);
    return out;
}

Theorem1Table theorem1_study(const Theorem1Params &params, const std::vector<int> &M_list, int seeds,
                             std::uint64_t master_seed, int workers)
{
    if (params.N % params.C != 0)
        throw Error("theorem1: N must be a multiple of C");
    if (!std::is_sorted(M_list.begin(), M_list.end()))
        throw Error("theorem1: M list must be ascending");
    if (seeds < 1)
        throw Error("theorem1: need at least one seed");
    const int Q = params.N / params.C;
    const double p = params.sigma2_w * db_to_linear(params.snr_db);

    Theorem1Table table;
    table.rows.resize(M_list.size() * static_cast<std::size_t>(seeds));
    parallel_for(table.rows.size(), workers, [&](std::size_t idx) {
        const int M = M_list[idx / seeds];
        const int seed = static_cast<int>(idx % seeds);
        const PacketClutter pk = theorem1_clutter(params, M, master_seed, seed);
        Rng rng(derive_seed(master_seed, {static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(M)}));
        SignalFactor sig;
        sig.p = p;
        sig.C = params.C;
        sig.h = rng.complex_normal_matrix(M, Q);
        FullClutterCovariance K = full_clutter_covariance(pk);
        const auto mi = mutual_information_detail(sig, K, params.sigma2_w);
        Theorem1Row &row = table.rows[idx];
        row.M = M;
        row.seed = seed;
        row.mi_clutter = mi.mi;
        row.mi_clean = clutter_free_mi(sig, params.sigma2_w);
        row.gap = row.mi_clean > 0.0 ? (row.mi_clean - row.mi_clutter) / row.mi_clean : 0.0;
        row.tr_DM = mi.D_M.trace().real();
        row.tr2_DM = row.tr_DM * row.tr_DM;
    });

    for (std::size_t a = 0; a < M_list.size(); ++a)
    {
        Theorem1Summary s;
        s.M = M_list[a];
        CompensatedSum g, g2, t, t2;
        for (int seed = 0; seed < seeds; ++seed)
        {
            const auto &r = table.rows[a * seeds + seed];
            g.add(r.gap);
            t.add(r.tr_DM);
            t2.add(r.tr2_DM);
        }
        s.mean_gap = g.value() / seeds;
        s.mean_tr_DM = t.value() / seeds;
        s.mean_tr2_DM = t2.value() / seeds;
        for (int seed = 0; seed < seeds; ++seed)
        {
            const double d = table.rows[a * seeds + seed].gap - s.mean_gap;
            g2.add(d * d);
        }
        s.var_gap = seeds > 1 ? g2.value() / (seeds - 1) : 0.0;
        table.summary.push_back(s);
    }
    return table;
}

} // namespace coexist
