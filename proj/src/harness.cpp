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

#include "coexist/harness.hpp"
#include "coexist/infotheory.hpp"
#include "coexist/parallel.hpp"
#include "coexist/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>

namespace coexist
{

// ---- results ----------------------------------------------------------------

int ExperimentResult::column(const std::string &name) const
{
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name)
            return static_cast<int>(i);
    throw Error("ExperimentResult: no column '" + name + "'");
}

double ExperimentResult::number(std::size_t row, const std::string &col) const
{
    const Cell &c = rows.at(row).at(column(col));
    if (const auto *i = std::get_if<std::int64_t>(&c))
        return static_cast<double>(*i);
    if (const auto *d = std::get_if<double>(&c))
        return *d;
    throw Error("ExperimentResult: column '" + col + "' is not numeric");
}

std::string ExperimentResult::text(std::size_t row, const std::string &col) const
{
    const Cell &c = rows.at(row).at(column(col));
    if (const auto *s = std::get_if<std::string>(&c))
        return *s;
    throw Error("ExperimentResult: column '" + col + "' is not text");
}

OutputFormat parse_output_format(const std::string &name)
{
    if (name == "csv")
        return OutputFormat::Csv;
    if (name == "json")
        return OutputFormat::Json;
    throw Error("unknown output format '" + name + "' (expected csv|json)");
}

namespace
{

std::string format_cell(const Cell &c)
{
    if (const auto *i = std::get_if<std::int64_t>(&c))
        return std::to_string(*i);
    if (const auto *d = std::get_if<double>(&c))
    {
        if (std::isnan(*d))
            return "nan";
        if (std::isinf(*d))
            return *d > 0 ? "inf" : "-inf";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", *d);
        return buf;
    }
    const auto &s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char ch : s)
        out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

nlohmann::ordered_json cell_json(const Cell &c)
{
    if (const auto *i = std::get_if<std::int64_t>(&c))
        return *i;
    if (const auto *d = std::get_if<double>(&c))
        return std::isfinite(*d) ? nlohmann::ordered_json(*d) : nlohmann::ordered_json(nullptr);
    return std::get<std::string>(c);
}

} // namespace

std::string to_csv(const ExperimentResult &r)
{
    std::string out;
    for (std::size_t i = 0; i < r.columns.size(); ++i)
        out += (i ? "," : "") + r.columns[i];
    out += "\n";
    for (const auto &row : r.rows)
    {
        for (std::size_t i = 0; i < row.size(); ++i)
            out += (i ? "," : "") + format_cell(row[i]);
        out += "\n";
    }
    return out;
}

std::string to_json_text(const ExperimentResult &r)
{
    nlohmann::ordered_json j;
    j["experiment"] = r.experiment;
    j["metadata"] = r.metadata;
    j["columns"] = r.columns;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto &row : r.rows)
    {
        nlohmann::ordered_json o;
        for (std::size_t i = 0; i < row.size(); ++i)
            o[r.columns[i]] = cell_json(row[i]);
        j["rows"].push_back(std::move(o));
    }
    return j.dump(2) + "\n";
}

void emit_results(const ExperimentResult &r, const std::string &path, OutputFormat format)
{
    const std::string text = format == OutputFormat::Csv ? to_csv(r) : to_json_text(r);
    if (path.empty() || path == "-")
    {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("emit_results: cannot write " + path);
    out << text;
}

// ---- shared scenario drawing -----------------------------------------------

namespace
{

// Stream ids under derive_seed(master, {drop, id}).
constexpr std::uint64_t kStreamScene = 1;
constexpr std::uint64_t kStreamPilots = 2;
constexpr std::uint64_t kStreamTraining = 3;
constexpr std::uint64_t kStreamData = 4;
constexpr std::uint64_t kStreamUser = 0x1000;   // + k
constexpr std::uint64_t kStreamFading = 0x2000; // + k

struct ScenarioFiles
{
    std::optional<std::vector<UserGeometry>> geometry;
    std::optional<ScattererEnsemble> ensemble;
    std::optional<RadarWaveform> waveform;
};

ScenarioFiles load_files(const SystemConfig &cfg, int K)
{
    ScenarioFiles f;
    if (!cfg.geometry_file.empty())
    {
        f.geometry = load_geometry(cfg.geometry_file);
        if (static_cast<int>(f.geometry->size()) < K)
            throw ConfigError("geometry_file: " + cfg.geometry_file + " lists fewer than K users");
    }
    if (!cfg.ensemble_file.empty())
        f.ensemble = load_ensemble(cfg.ensemble_file);
    if (!cfg.waveform_file.empty())
        f.waveform = load_waveform(cfg.waveform_file);
    return f;
}

struct Drop
{
    std::vector<double> betas;
    std::vector<CMatrix> fading; // per user, M_max x Q, includes beta
    RadarWaveform waveform;
    ScattererEnsemble ensemble;
    std::vector<PacketClutter> slot; // scaled to 0 dB CNR
    bool clutter_free = true;
    PilotBook book;
};

PilotBookParams pilot_params(const SystemConfig &cfg, int K)
{
    PilotBookParams p;
    p.K = K;
    p.T = cfg.T;
    p.C = cfg.C;
    p.Q = cfg.Q();
    p.energy = cfg.pilot_energy;
    p.policy = parse_pilot_policy(cfg.pilot_policy);
    p.power = {cfg.pilot_power_w};
    return p;
}

// Users come from their own streams so that user k sees the same channel for every K.
Drop draw_drop(const SystemConfig &cfg, const ScenarioFiles &files, int K, int M_max, std::uint64_t d,
               bool with_fading)
{
    Drop drop;
    const auto pl = cfg.path_loss();
    for (int k = 0; k < K; ++k)
    {
        Rng ru(derive_seed(cfg.seed, {d, kStreamUser + static_cast<std::uint64_t>(k)}));
        const double dist =
            files.geometry ? (*files.geometry)[k].distance_m : ru.uniform(pl.min_distance_m, pl.max_distance_m);
        drop.betas.push_back(large_scale_beta(dist, pl, ru));
        if (with_fading)
        {
            Rng rf(derive_seed(cfg.seed, {d, kStreamFading + static_cast<std::uint64_t>(k)}));
            drop.fading.push_back(drop.betas.back() * rf.complex_normal_matrix(M_max, cfg.Q()));
        }
    }
    Rng rs(derive_seed(cfg.seed, {d, kStreamScene}));
    drop.waveform = files.waveform ? *files.waveform
                                   : random_phase_waveform(cfg.L, cfg.Ts_s, cfg.radar_power_w, cfg.prt_s, rs);
    drop.ensemble = files.ensemble ? *files.ensemble : random_ensemble(cfg.ensemble_params(), rs);
    drop.slot = build_slot_clutter(drop.ensemble, drop.waveform, cfg.timing(), M_max, cfg.spacing_ratio);
    const double avg = average_clutter_power(drop.slot);
    drop.clutter_free = !(avg > 0.0);
    if (!drop.clutter_free)
    {
        const double f = cnr_scale_factor(avg, 0.0, cfg.sigma2_w());
        for (auto &p : drop.slot)
            p.scale(f);
    }
    Rng rp(derive_seed(cfg.seed, {d, kStreamPilots}));
    drop.book = build_pilot_book(pilot_params(cfg, K), rp);
    return drop;
}

LowRankPsd top_rows(const LowRankPsd &K, int M, double amplitude)
{
    return {amplitude * K.factor.topRows(M)};
}

std::vector<int> evaluated_subcarriers(const SystemConfig &cfg, int ell)
{
    std::vector<int> out;
    const int E = cfg.eval_per_block;
    if (E == 0 || E >= cfg.C)
    {
        for (int n = 0; n < cfg.N; ++n)
            out.push_back(n);
        return out;
    }
    const int stride = cfg.C / E;
    for (int q = 0; q < cfg.Q(); ++q)
        for (int j = 0; j < E; ++j)
            out.push_back(q * cfg.C + (ell + q + j * stride) % cfg.C);
    return out;
}

std::vector<Estimator> estimators_of(const SystemConfig &cfg)
{
    std::vector<Estimator> out;
    for (const auto &s : cfg.estimators)
        out.push_back(parse_estimator(s));
    return out;
}

std::vector<Detector> detectors_of(const SystemConfig &cfg)
{
    std::vector<Detector> out;
    for (const auto &s : cfg.detectors)
        out.push_back(parse_detector(s));
    return out;
}

nlohmann::ordered_json base_metadata(const std::string &name, const SystemConfig &cfg)
{
    nlohmann::ordered_json m;
    m["experiment"] = name;
    m["code_version"] = kCodeVersion;
    m["config_hash"] = config_hash(cfg);
    m["seed"] = cfg.seed;
    m["seed_rule"] = "derive_seed(seed, {drop, stream}) with splitmix64 folding";
    m["config"] = nlohmann::ordered_json::parse(config_to_json(cfg).dump());
    return m;
}

double mean_or_nan(double sum, std::int64_t count)
{
    return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

double to_db(double x) { return x > 0.0 ? 10.0 * std::log10(x) : std::numeric_limits<double>::quiet_NaN(); }

// Per-trial contribution to every sweep point.
struct PointSums
{
    std::vector<double> sum;
    std::vector<double> sum_db; // per-sample 10 log10 SINR
    std::vector<std::int64_t> count;
    std::vector<std::int64_t> degenerate;
    bool clutter_free = false;

    explicit PointSums(std::size_t n = 0) : sum(n, 0.0), sum_db(n, 0.0), count(n, 0), degenerate(n, 0) {}
};

struct PointStats
{
    double mean = 0.0;
    double stderr_mean = 0.0;
    double mean_db = 0.0;
    double stderr_db = 0.0;
    std::int64_t samples = 0;
    std::int64_t degenerate = 0;
};

// Standard error of the mean of xs; 0 below two entries.
double spread_of(const std::vector<double> &xs)
{
    if (xs.size() < 2)
        return 0.0;
    CompensatedSum m, v;
    for (double x : xs)
        m.add(x);
    const double mu = m.value() / static_cast<double>(xs.size());
    for (double x : xs)
        v.add((x - mu) * (x - mu));
    return std::sqrt(v.value() / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

// Reduces in trial order. The spread is taken over per-trial means.
PointStats reduce_point(const std::vector<PointSums> &trials, std::size_t p)
{
    PointStats s;
    CompensatedSum total, total_db;
    std::vector<double> means, means_db;
    for (const auto &t : trials)
    {
        total.add(t.sum[p]);
        total_db.add(t.sum_db[p]);
        s.samples += t.count[p];
        s.degenerate += t.degenerate[p];
        if (t.count[p])
        {
            means.push_back(t.sum[p] / static_cast<double>(t.count[p]));
            means_db.push_back(t.sum_db[p] / static_cast<double>(t.count[p]));
        }
    }
    s.mean = mean_or_nan(total.value(), s.samples);
    s.mean_db = mean_or_nan(total_db.value(), s.samples);
    s.stderr_mean = spread_of(means);
    s.stderr_db = spread_of(means_db);
    return s;
}

// SINR^~ of every user for the combiners in the columns of V.
void add_sinrs(const CMatrix &V, const CMatrix &H, const std::vector<double> &powers, double sigma2_w,
               const CMatrix &clutter_factor, double &sum, double &sum_db, std::int64_t &count)
{
    const CMatrix VH = V.adjoint() * H;
    RVector clutter = RVector::Zero(V.cols());
    if (clutter_factor.cols())
        clutter = (V.adjoint() * clutter_factor).rowwise().squaredNorm();
    for (Eigen::Index k = 0; k < V.cols(); ++k)
    {
        double den = sigma2_w * V.col(k).squaredNorm() + clutter(k);
        for (Eigen::Index j = 0; j < H.cols(); ++j)
            if (j != k)
                den += powers[j] * std::norm(VH(k, j));
        const double num = powers[k] * std::norm(VH(k, k));
        if (!(den > 0.0) || !(num > 0.0) || !std::isfinite(num / den))
            throw DegenerateCombinerError("sinr: zero signal or zero or non-finite denominator");
        sum += num / den;
        sum_db += 10.0 * std::log10(num / den);
        ++count;
    }
}

// Batched form of projection_combiner: same result and the same degeneracy rules.
CMatrix projection_all(Detector tag, const CMatrix &H_hat, const CMatrix &basis)
{
    CMatrix V = H_hat;
    if (basis.cols())
        V.noalias() -= basis * (basis.adjoint() * H_hat);
    for (Eigen::Index k = 0; k < H_hat.cols(); ++k)
    {
        const double hn = H_hat.col(k).norm();
        if (hn == 0.0 || V.col(k).norm() < tol::degenerate_projection * hn)
            throw DegenerateCombinerError("projection combiner (" + to_string(tag) + "): degenerate estimate");
    }
    return V;
}

// Empty when the projection is degenerate.
std::optional<CMatrix> try_projection(Detector tag, const CMatrix &H_hat, const CMatrix &basis)
{
    try
    {
        return projection_all(tag, H_hat, basis);
    }
    catch (const DegenerateCombinerError &)
    {
        return std::nullopt;
    }
}

using ProjectionCache = std::vector<std::vector<std::optional<CMatrix>>>; // [estimator][block]

} // namespace

// ---- SINR versus CNR --------------------------------------------------------

ExperimentResult run_sinr_vs_cnr(const SystemConfig &cfg, int workers)
{
    const auto bad = validate_config(cfg);
    if (!bad.empty())
    {
        std::string msg;
        for (const auto &b : bad)
            msg += (msg.empty() ? "" : "\n") + b;
        throw ConfigError(msg);
    }
    const int K = cfg.K;
    const int Q = cfg.Q();
    const int C = cfg.C;
    const int T = cfg.T;
    const double s2 = cfg.sigma2_w();
    const int M_max = cfg.M_list.back();
    const auto ests = estimators_of(cfg);
    const auto dets = detectors_of(cfg);
    const std::vector<double> powers(K, cfg.data_power_w);
    const ScenarioFiles files = load_files(cfg, K);
    const SymbolAlphabet alphabet = parse_symbol_alphabet(cfg.symbols);

    bool need_training = false, need_aezf = false, need_bzf = false, need_subspace = false, need_cm = false;
    for (auto e : ests)
        need_training |= e != Estimator::Perfect;
    for (auto d : dets)
    {
        need_aezf |= d == Detector::AEZF;
        need_bzf |= d == Detector::BZF;
        need_subspace |= d == Detector::ZF || d == Detector::FZF;
        need_cm |= d == Detector::CM;
    }

    // Read-only per-M caches.
    std::vector<std::optional<CMatrix>> bzf(cfg.M_list.size());
    std::vector<std::optional<AoaGrid>> grids(cfg.M_list.size());
    for (std::size_t mi = 0; mi < cfg.M_list.size(); ++mi)
    {
        const int M = cfg.M_list[mi];
        if (need_bzf && cfg.bzf_P < M)
            bzf[mi] = bessel_basis(M, cfg.spacing_ratio, cfg.bzf_P).basis;
        if (need_aezf)
            grids[mi].emplace(M, cfg.aezf_R, cfg.spacing_ratio);
    }

    const std::size_t nM = cfg.M_list.size(), nC = cfg.cnr_db.size(), nE = ests.size(), nD = dets.size();
    auto point = [&](std::size_t mi, std::size_t ci, std::size_t ei, std::size_t di) {
        return ((mi * nC + ci) * nE + ei) * nD + di;
    };
    const std::size_t n_points = nM * nC * nE * nD;

    std::vector<PointSums> trials(static_cast<std::size_t>(cfg.trials));
    parallel_for(trials.size(), workers, [&](std::size_t t) {
        PointSums out(n_points);
        const Drop drop = draw_drop(cfg, files, K, M_max, t, true);
        out.clutter_free = drop.clutter_free;

        // Unit-CNR realizations reused at every grid point.
        std::vector<CMatrix> Wq, Cq;
        if (need_training)
        {
            Rng rt(derive_seed(cfg.seed, {t, kStreamTraining}));
            std::vector<CMatrix> clut(T), noise(T);
            for (int ell = 0; ell < T; ++ell)
            {
                clut[ell] = drop.slot[ell].draw(rt);
                noise[ell] = rt.complex_normal_matrix(M_max, cfg.N, s2);
            }
            for (int q = 0; q < Q; ++q)
            {
                Wq.push_back(training_clutter_block(noise, q, C));
                Cq.push_back(training_clutter_block(clut, q, C));
            }
        }
        std::vector<CMatrix> Xd, Wd, Cd;
        if (need_aezf)
        {
            Rng rd(derive_seed(cfg.seed, {t, kStreamData}));
            for (int ell = T; ell < cfg.N_pkt; ++ell)
            {
                Xd.push_back(draw_symbols(K, cfg.N, alphabet, rd));
                Wd.push_back(rd.complex_normal_matrix(M_max, cfg.N, s2));
                Cd.push_back(drop.slot[ell].draw(rd));
            }
        }
        const std::vector<PacketClutter> training(drop.slot.begin(), drop.slot.begin() + T);
        std::vector<std::vector<LowRankPsd>> tf; // [k][q] at 0 dB, M_max rows
        if (need_training)
            for (int k = 0; k < K; ++k)
            {
                tf.emplace_back();
                for (int q = 0; q < Q; ++q)
                    tf[k].push_back(training_clutter_factor(training, q, C, drop.book.normalized(k, q)));
            }

        for (std::size_t mi = 0; mi < nM; ++mi)
        {
            const int M = cfg.M_list[mi];
            std::vector<CMatrix> H(Q, CMatrix(M, K));
            for (int q = 0; q < Q; ++q)
                for (int k = 0; k < K; ++k)
                    H[q].col(k) = drop.fading[k].col(q).head(M);
            CMatrix S; // data signal, M x (data packets * N)
            if (need_aezf)
            {
                S.resize(M, static_cast<Eigen::Index>(cfg.N_pkt - T) * cfg.N);
                for (int a = 0; a < cfg.N_pkt - T; ++a)
                    for (int n = 0; n < cfg.N; ++n)
                    {
                        CVector x = Xd[a].col(n);
                        for (int k = 0; k < K; ++k)
                            x(k) *= std::sqrt(powers[k]);
                        S.col(static_cast<Eigen::Index>(a) * cfg.N + n) = H[block_of(n, C)] * x;
                    }
            }

            for (std::size_t ci = 0; ci < nC; ++ci)
            {
                const double amp = drop.clutter_free ? 0.0 : std::pow(10.0, cfg.cnr_db[ci] / 20.0);
                // H_hat[e][q]
                std::vector<std::vector<CMatrix>> H_hat(nE);
                for (std::size_t ei = 0; ei < nE; ++ei)
                {
                    if (ests[ei] == Estimator::Perfect)
                    {
                        H_hat[ei] = H;
                        continue;
                    }
                    for (int q = 0; q < Q; ++q)
                    {
                        CMatrix Y = Wq[q].topRows(M) + amp * Cq[q].topRows(M);
                        for (int j = 0; j < K; ++j)
                            Y += std::sqrt(drop.book.power[j]) * H[q].col(j) * drop.book.pilot(j, q).transpose();
                        CMatrix Hq(M, K);
                        for (int k = 0; k < K; ++k)
                        {
                            if (ests[ei] == Estimator::PM)
                                Hq.col(k) = pm_estimate(Y, drop.book, k, q);
                            else
                            {
                                const auto mm =
                                    mmse_matrices(drop.book, drop.betas, top_rows(tf[k][q], M, amp), s2, q, k);
                                Hq.col(k) = mmse_estimate(build_r_qk(Y, drop.book, k, q), mm);
                            }
                        }
                        H_hat[ei].push_back(std::move(Hq));
                    }
                }
                // AEZF subspaces per data packet; empty optional marks a failed estimate.
                std::vector<std::optional<CMatrix>> aezf(cfg.N_pkt - T);
                if (need_aezf)
                    for (int a = 0; a < cfg.N_pkt - T; ++a)
                    {
                        const CMatrix Y = S.middleCols(static_cast<Eigen::Index>(a) * cfg.N, cfg.N) +
                                          Wd[a].topRows(M) + amp * Cd[a].topRows(M);
                        const auto est = estimate_clutter_aoas(Y, *grids[mi], cfg.aezf_multiplier);
                        try
                        {
                            aezf[a] = aezf_basis(est.angles(), M, cfg.spacing_ratio);
                        }
                        catch (const DegenerateCombinerError &)
                        {
                        }
                    }

                // Combiners that do not depend on the subcarrier within a block.
                auto project_blocks = [&](Detector tag, const CMatrix &basis) {
                    ProjectionCache c(nE);
                    for (std::size_t ei = 0; ei < nE; ++ei)
                        for (int q = 0; q < Q; ++q)
                            c[ei].push_back(try_projection(tag, H_hat[ei][q], basis));
                    return c;
                };
                ProjectionCache v_cm, v_bzf;
                if (need_cm)
                    v_cm = project_blocks(Detector::CM, CMatrix(M, 0));
                if (need_bzf && bzf[mi])
                    v_bzf = project_blocks(Detector::BZF, *bzf[mi]);

                for (int ell = T; ell < cfg.N_pkt; ++ell)
                {
                    const PacketClutter &pk = drop.slot[ell];
                    ProjectionCache v_aezf;
                    if (need_aezf && aezf[ell - T])
                        v_aezf = project_blocks(Detector::AEZF, *aezf[ell - T]);
                    for (int n : evaluated_subcarriers(cfg, ell))
                    {
                        const int q = block_of(n, C);
                        const LowRankPsd Kc = top_rows(pk.covariance(n), M, amp);
                        const CMatrix Uc = need_subspace ? clutter_subspace(Kc) : CMatrix();
                        for (std::size_t ei = 0; ei < nE; ++ei)
                        {
                            const CMatrix &Hh = H_hat[ei][q];
                            for (std::size_t di = 0; di < nD; ++di)
                            {
                                const std::size_t p = point(mi, ci, ei, di);
                                try
                                {
                                    CMatrix V;
                                    const std::optional<CMatrix> *cached = nullptr;
                                    switch (dets[di])
                                    {
                                    case Detector::CM:
                                        cached = &v_cm[ei][q];
                                        break;
                                    case Detector::ZF:
                                        V = projection_all(Detector::ZF, Hh, Uc);
                                        break;
                                    case Detector::FZF:
                                        V = fzf_combiners(Hh, Uc);
                                        break;
                                    case Detector::LMMSE:
                                        V = lmmse_combiners(Hh, powers, s2, Kc);
                                        break;
                                    case Detector::BZF:
                                        if (!bzf[mi])
                                            throw DegenerateCombinerError("bzf: P >= M");
                                        cached = &v_bzf[ei][q];
                                        break;
                                    case Detector::AEZF:
                                        if (!aezf[ell - T])
                                            throw DegenerateCombinerError("aezf: too many angles");
                                        cached = &v_aezf[ei][q];
                                        break;
                                    }
                                    if (cached && !*cached)
                                        throw DegenerateCombinerError("projection: degenerate estimate");
                                    const CMatrix &Vr = cached ? **cached : V;
                                    add_sinrs(Vr, H[q], powers, s2, Kc.factor, out.sum[p], out.sum_db[p], out.count[p]);
                                }
                                catch (const DegenerateCombinerError &)
                                {
                                    out.degenerate[p] += K;
                                }
                            }
                        }
                    }
                }
            }
        }
        trials[t] = std::move(out);
    });

    ExperimentResult res;
    res.experiment = "sinr-vs-cnr";
    res.metadata = base_metadata(res.experiment, cfg);
    res.metadata["averaging"] = {"users", "data_packets", "subcarriers", "drops"};
    res.metadata["statistic"] = "sinr_db = 10 log10 of the mean linear SINR; mean_db = mean of per-sample SINR in dB";
    res.metadata["stderr"] = "standard error of per-drop means, linear and dB";
    res.metadata["sigma2_w"] = s2;
    std::int64_t clean = 0;
    for (const auto &t : trials)
        clean += t.clutter_free;
    res.metadata["clutter_free_drops"] = clean;
    res.columns = {"config_hash", "seed",     "M",          "K",       "cnr_db",   "estimator", "detector",
                   "sinr_db",     "sinr_lin", "stderr_lin", "mean_db", "stderr_db", "samples", "degenerate",
                   "drops"};
    const std::string hash = config_hash(cfg);
    for (std::size_t mi = 0; mi < nM; ++mi)
        for (std::size_t ci = 0; ci < nC; ++ci)
            for (std::size_t ei = 0; ei < nE; ++ei)
                for (std::size_t di = 0; di < nD; ++di)
                {
                    const auto s = reduce_point(trials, point(mi, ci, ei, di));
                    res.rows.push_back({hash, static_cast<std::int64_t>(cfg.seed), std::int64_t{cfg.M_list[mi]},
                                        std::int64_t{K}, cfg.cnr_db[ci], to_string(ests[ei]),
                                        to_string(dets[di]), to_db(s.mean), s.mean, s.stderr_mean, s.mean_db, s.stderr_db, s.samples,
                                        s.degenerate, std::int64_t{cfg.trials}});
                }
    return res;
}

// ---- SE versus M ------------------------------------------------------------

ExperimentResult run_se_vs_m(const SystemConfig &cfg, int workers)
{
    const auto bad = validate_config(cfg);
    if (!bad.empty())
    {
        std::string msg;
        for (const auto &b : bad)
            msg += (msg.empty() ? "" : "\n") + b;
        throw ConfigError(msg);
    }
    std::vector<Estimator> ests;
    for (auto e : estimators_of(cfg))
        if (e != Estimator::Perfect)
            ests.push_back(e);
    if (ests.empty())
        ests = {Estimator::PM, Estimator::MMSE};
    const int K = cfg.K;
    const int Q = cfg.Q();
    const int C = cfg.C;
    const int T = cfg.T;
    const double s2 = cfg.sigma2_w();
    const std::vector<double> powers(K, cfg.data_power_w);
    const ScenarioFiles files = load_files(cfg, K);
    const std::size_t nM = cfg.se_M_list.size(), nC = cfg.cnr_db.size(), nE = ests.size();
    auto point = [&](std::size_t mi, std::size_t ci, std::size_t ei) { return (mi * nC + ci) * nE + ei; };

    std::vector<PointSums> drops(static_cast<std::size_t>(cfg.drops));
    parallel_for(drops.size(), workers, [&](std::size_t d) {
        PointSums out(nM * nC * nE);
        // Weights are per antenna, so the M = 1 slot carries everything but the steering vectors.
        const Drop base = draw_drop(cfg, files, K, 1, d, false);
        out.clutter_free = base.clutter_free;
        const std::vector<PacketClutter> training(base.slot.begin(), base.slot.begin() + T);

        // Training clutter of (k, q) is B_S diag(c_{k,q}) B_S^H over the scatterers S seen in training.
        std::vector<int> S;
        std::vector<int> pos(base.ensemble.size(), -1);
        for (const auto &pk : training)
            for (int id : pk.scatterers())
                if (pos[id] < 0)
                {
                    pos[id] = static_cast<int>(S.size());
                    S.push_back(id);
                }
        const auto nS = static_cast<Eigen::Index>(S.size());
        std::vector<RVector> c(static_cast<std::size_t>(K) * Q, RVector::Zero(nS));
        for (int k = 0; k < K; ++k)
            for (int q = 0; q < Q; ++q)
            {
                const RVector w = training_clutter_weights(training, q, C, base.book.normalized(k, q));
                RVector &ckq = c[static_cast<std::size_t>(k) * Q + q];
                int col = 0;
                for (const auto &pk : training)
                    for (int id : pk.scatterers())
                        ckq(pos[id]) += w(col++);
            }

        for (std::size_t mi = 0; mi < nM; ++mi)
        {
            const int M = cfg.se_M_list[mi];
            auto steering = [&](const std::vector<int> &ids) {
                CMatrix B(M, static_cast<Eigen::Index>(ids.size()));
                for (std::size_t i = 0; i < ids.size(); ++i)
                    B.col(static_cast<Eigen::Index>(i)) =
                        steering_vector(base.ensemble.scatterers[ids[i]].theta, M, cfg.spacing_ratio);
                return B;
            };
            const CMatrix BS = steering(S);
            const CMatrix gram = BS.adjoint() * BS;
            std::vector<CMatrix> cross; // B_S^H B_ell per data packet
            std::vector<RVector> bnorm;
            for (int ell = T; ell < cfg.N_pkt; ++ell)
            {
                const CMatrix B = steering(base.slot[ell].scatterers());
                cross.push_back(BS.adjoint() * B);
                bnorm.push_back(B.colwise().squaredNorm().transpose());
            }
            for (int k = 0; k < K; ++k)
                for (int q = 0; q < Q; ++q)
                {
                    // R = a I + g G0 G0^H with G0^H G0 = V diag(lambda) V^H: every CNR
                    // point then costs O(r) per quadratic form.
                    const RVector sq = c[static_cast<std::size_t>(k) * Q + q].cwiseSqrt();
                    const double a = r_qk_scale(base.book, base.betas, s2, q, k);
                    RVector lambda = RVector::Zero(0);
                    CMatrix V;
                    if (nS)
                    {
                        const CMatrix W = sq.asDiagonal() * gram * sq.asDiagonal();
                        Eigen::SelfAdjointEigenSolver<CMatrix> eig(W);
                        lambda = eig.eigenvalues().cwiseMax(0.0);
                        V = eig.eigenvectors();
                    }
                    std::vector<RMatrix> z2; // |(V^H G0^H b_i)_j|^2, r x s
                    std::vector<RVector> y;  // ||G0^H b_i||^2
                    for (std::size_t a_idx = 0; a_idx < cross.size(); ++a_idx)
                    {
                        if (nS && cross[a_idx].cols())
                            z2.push_back((V.adjoint() * (sq.asDiagonal() * cross[a_idx])).cwiseAbs2());
                        else
                            z2.push_back(RMatrix::Zero(lambda.size(), cross[a_idx].cols()));
                        y.push_back(z2.back().colwise().sum().transpose());
                    }
                    for (std::size_t ci = 0; ci < nC; ++ci)
                    {
                        const double g = base.clutter_free ? 0.0 : std::pow(10.0, cfg.cnr_db[ci] / 10.0);
                        const RVector damp = (g / (a + g * lambda.array())).matrix();
                        const double trR = a * M + g * lambda.sum();
                        const double trRinv = (M - lambda.dot(damp)) / a;
                        for (std::size_t ei = 0; ei < nE; ++ei)
                        {
                            const auto coef = uatf_closed_coefficients(ests[ei], base.book, base.betas, powers, s2,
                                                                       q, k, M, trR, trRinv);
                            const std::size_t p = point(mi, ci, ei);
                            for (int ell = T; ell < cfg.N_pkt; ++ell)
                            {
                                const std::size_t a_idx = static_cast<std::size_t>(ell - T);
                                RVector forms;
                                if (ests[ei] == Estimator::PM)
                                    forms = a * bnorm[a_idx] + g * y[a_idx];
                                else
                                    forms = (bnorm[a_idx] - z2[a_idx].transpose() * damp) / a;
                                const RMatrix &wd = base.slot[ell].weights();
                                for (int cc = 0; cc < C; ++cc)
                                {
                                    const int n = q * C + cc;
                                    const double tr = forms.size() ? wd.col(n).dot(forms) : 0.0;
                                    out.sum[p] += spectral_efficiency(coef.sinr(g * tr), cfg.N_pkt, T);
                                    ++out.count[p];
                                }
                            }
                        }
                    }
                }
        }
        drops[d] = std::move(out);
    });

    ExperimentResult res;
    res.experiment = "se-vs-m";
    res.metadata = base_metadata(res.experiment, cfg);
    res.metadata["averaging"] = {"users", "blocks", "data_packets", "subcarriers", "drops"};
    res.metadata["statistic"] = "per-user UatF SE in bit/s/Hz with the (N_pkt - T) / N_pkt prelog";
    res.metadata["detector"] = "cm";
    std::int64_t clean = 0;
    for (const auto &t : drops)
        clean += t.clutter_free;
    res.metadata["clutter_free_drops"] = clean;
    res.columns = {"config_hash", "seed", "M", "K", "cnr_db", "estimator", "se", "stderr", "samples", "drops"};
    const std::string hash = config_hash(cfg);
    for (std::size_t mi = 0; mi < nM; ++mi)
        for (std::size_t ci = 0; ci < nC; ++ci)
            for (std::size_t ei = 0; ei < nE; ++ei)
            {
                const auto s = reduce_point(drops, point(mi, ci, ei));
                res.rows.push_back({hash, static_cast<std::int64_t>(cfg.seed), std::int64_t{cfg.se_M_list[mi]},
                                    std::int64_t{K}, cfg.cnr_db[ci], to_string(ests[ei]), s.mean, s.stderr_mean,
                                    s.samples, std::int64_t{cfg.drops}});
            }
    return res;
}

// ---- mutual-information study ----------------------------------------------

ExperimentResult run_theorem1(const SystemConfig &cfg, int workers)
{
    const auto bad = validate_config(cfg);
    if (!bad.empty())
    {
        std::string msg;
        for (const auto &b : bad)
            msg += (msg.empty() ? "" : "\n") + b;
        throw ConfigError(msg);
    }
    if (cfg.theorem_N > 256 && !cfg.allow_full_scale)
        throw ConfigError("theorem_N = " + std::to_string(cfg.theorem_N) +
                          " needs N x N work per (M, seed); set allow_full_scale to run it");
    Theorem1Params p;
    p.N = cfg.theorem_N;
    p.C = cfg.theorem_C;
    p.taps = cfg.theorem_taps;
    p.scatterers = cfg.theorem_scatterers;
    p.code_length = cfg.theorem_code_length;
    p.cnr_db = cfg.theorem_cnr_db;
    p.snr_db = cfg.theorem_snr_db;
    p.sigma2_w = 1.0;
    p.spacing_ratio = cfg.spacing_ratio;
    p.clutter = cfg.theorem_clutter;
    const auto table = theorem1_study(p, cfg.theorem_M_list, cfg.theorem_seeds, cfg.seed, workers);

    ExperimentResult res;
    res.experiment = "theorem1";
    res.metadata = base_metadata(res.experiment, cfg);
    res.metadata["gap"] = "(I_clean - I_clutter) / I_clean per seed, nats";
    res.columns = {"config_hash", "kind",    "M",     "seed",    "mi_clutter", "mi_clean",
                   "gap",         "gap_var", "tr_DM", "tr2_DM"};
    const std::string hash = config_hash(cfg);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto &r : table.rows)
        res.rows.push_back({hash, std::string("seed"), std::int64_t{r.M}, std::int64_t{r.seed}, r.mi_clutter,
                            r.mi_clean, r.gap, nan, r.tr_DM, r.tr2_DM});
    for (const auto &s : table.summary)
        res.rows.push_back({hash, std::string("mean"), std::int64_t{s.M}, std::int64_t{-1}, nan, nan, s.mean_gap,
                            s.var_gap, s.mean_tr_DM, s.mean_tr2_DM});
    return res;
}

// ---- closed form versus Monte Carlo -----------------------------------------

std::string AppendixCase::name() const
{
    return to_string(estimator) + (clutter ? "-clutter" : "-clean") + "-" + to_string(pilots) + "-K" +
           std::to_string(K) + "-M" + std::to_string(M);
}

std::vector<AppendixCase> appendix_cases()
{
    std::vector<AppendixCase> out;
    for (Estimator e : {Estimator::PM, Estimator::MMSE})
        for (bool clutter : {true, false})
            for (PilotPolicy pol : {PilotPolicy::Orthogonal, PilotPolicy::RandomQpsk})
                for (int K : {1, 2, 4})
                    out.push_back({e, clutter, pol, K, K == 4 ? 16 : 8});
    return out;
}

UatfScenario appendix_scenario(const AppendixCase &c, std::uint64_t seed)
{
    // 3 packets of 16 subcarriers, C = 4; packets 0 and 1 train, packet 2 carries data.
    FrameTiming timing;
    timing.N = 16;
    timing.N_cp = 2;
    timing.N_pkt = 3;
    timing.Ts = 1e-6;
    const int T = 2, C = 4, Q = 4, taps = 4;
    Rng rng(derive_seed(seed, {0xA99ULL}));
    const RadarWaveform wf = random_phase_waveform(4, timing.Ts, 1.0, 1e-3, rng);

    ScattererEnsemble ens;
    if (c.clutter)
    {
        // Delays in microseconds: two inside packet 0, one crossing into
        // packet 1, one inside packet 1 and two inside the data packet.
        const double delays[] = {3.0, 8.0, 14.0, 25.0, 40.0, 45.0};
        const double angles[] = {0.3, -1.1, -0.7, 1.1, -0.2, 0.9};
        for (int i = 0; i < 6; ++i)
        {
            Scatterer s;
            s.theta = angles[i];
            s.delay = delays[i] * 1e-6;
            for (int m = 0; m < taps; ++m)
                s.variances.push_back(1.0 / (1.0 + m + 0.5 * i));
            ens.scatterers.push_back(s);
        }
    }
    std::vector<PacketClutter> slot = build_slot_clutter(ens, wf, timing, c.M, 0.5);
    const double sigma2 = 1.0;
    if (c.clutter)
    {
        const double f = cnr_scale_factor(average_clutter_power(slot), 10.0, sigma2);
        for (auto &p : slot)
            p.scale(f);
    }

    UatfScenario s;
    const double betas[] = {1.0, 0.7, 0.5, 0.35};
    const double pk[] = {1.0, 0.8, 1.2, 0.6};
    const double ppk[] = {1.0, 1.5, 0.7, 1.1};
    PilotBookParams bp;
    bp.K = c.K;
    bp.T = T;
    bp.C = C;
    bp.Q = Q;
    bp.policy = c.pilots;
    for (int k = 0; k < c.K; ++k)
    {
        s.betas.push_back(betas[k]);
        s.powers.push_back(pk[k]);
        bp.power.push_back(ppk[k]);
    }
    s.book = build_pilot_book(bp, rng);
    s.training.assign(slot.begin(), slot.begin() + T);
    s.data = slot[2];
    s.subcarrier = 5;
    s.C = C;
    s.sigma2_w = sigma2;
    s.spacing_ratio = 0.5;
    return s;
}

AppendixReport run_validate_appendix(const SystemConfig &cfg, int workers)
{
    AppendixReport rep;
    ExperimentResult &res = rep.table;
    res.experiment = "validate-appendix";
    res.metadata = base_metadata(res.experiment, cfg);
    res.metadata["trials"] = cfg.appendix_trials;
    res.metadata["tolerance"] = cfg.appendix_tolerance;
    res.columns = {"config_hash", "case",     "estimator", "clutter", "pilots", "K",   "M",
                   "user",        "sinr_closed", "sinr_mc",  "rel_err", "pass"};
    const std::string hash = config_hash(cfg);
    const auto cases = appendix_cases();
    for (std::size_t i = 0; i < cases.size(); ++i)
    {
        const auto &c = cases[i];
        const UatfScenario s = appendix_scenario(c, cfg.seed);
        const auto mc = uatf_sinr_montecarlo(s, c.estimator, Detector::CM,
                                              static_cast<std::size_t>(cfg.appendix_trials),
                                              derive_seed(cfg.seed, {0xAB0ULL, i}), workers);
        for (int k = 0; k < c.K; ++k)
        {
            const double closed = uatf_sinr_closed(c.estimator, s, k);
            const double rel = std::abs(mc.sinr[k] - closed) / closed;
            const bool ok = rel <= cfg.appendix_tolerance;
            rep.passed &= ok;
            rep.failures += !ok;
            res.rows.push_back({hash, c.name(), to_string(c.estimator), std::string(c.clutter ? "on" : "off"),
                                to_string(c.pilots), std::int64_t{c.K}, std::int64_t{c.M}, std::int64_t{k}, closed,
                                mc.sinr[k], rel, std::string(ok ? "yes" : "no")});
        }
    }
    res.metadata["passed"] = rep.passed;
    return rep;
}

} // namespace coexist
