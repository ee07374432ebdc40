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


// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Optional arguments select criteria by number.

#include "oracles.hpp"

#include "coexist/channel_model.hpp"
#include "coexist/harness.hpp"
#include "coexist/infotheory.hpp"
#include "coexist/metrics_se.hpp"
#include "coexist/receivers.hpp"
#include "coexist/rng.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

using namespace coexist;

namespace
{

struct Outcome
{
    bool pass = false;
    std::string detail;
};

int workers()
{
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::string fmt(const char *f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// uniform on 0 .. n-1
int pick(Rng &rng, std::int64_t n)
{
    return static_cast<int>(std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(rng.uniform(0.0, double(n)))));
}

SystemConfig desk(nlohmann::json j)
{
    j["profile"] = "desk";
    return config_from_json(j);
}

// mean_db of the row matching (M, cnr, detector), perfect CSI
double point_db(const ExperimentResult &r, int M, double cnr, const std::string &det, const char *col = "mean_db")
{
    for (std::size_t i = 0; i < r.rows.size(); ++i)
        if (r.number(i, "M") == M && r.number(i, "cnr_db") == cnr && r.text(i, "detector") == det)
            return r.number(i, col);
    throw Error("acceptance: missing row " + det);
}

Outcome appendix()
{
    SystemConfig cfg = full_profile();
    cfg.appendix_trials = 100000;
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_validate_appendix(cfg, workers());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const int col = rep.table.column("rel_err");
    double worst = 0.0;
    for (const auto &row : rep.table.rows)
        worst = std::max(worst, std::get<double>(row[col]));
    const auto n = appendix_cases().size();
    return {rep.passed && n >= 12 && secs <= 300.0,
            fmt("%zu configurations, %zu users, worst rel err %.4f (tol 0.05), %.1f s (limit 300)", n,
                rep.table.rows.size(), worst, secs)};
}

Outcome theorem1()
{
    SystemConfig cfg = desk({{"theorem_N", 32}, {"theorem_C", 4}, {"theorem_cnr_db", 30.0}, {"theorem_seeds", 20},
                             {"theorem_M_list", {8, 16, 32, 64, 128, 256}}});
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_theorem1(cfg, workers());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<double> gap;
    for (std::size_t i = 0; i < r.rows.size(); ++i)
        if (r.text(i, "kind") == "mean")
            gap.push_back(r.number(i, "gap"));
    bool dec = gap.size() == 6;
    for (std::size_t i = 1; i < gap.size(); ++i)
        dec = dec && gap[i] < gap[i - 1];
    const double ratio = gap.back() / gap.front();
    return {dec && ratio < 0.1 && secs <= 600.0,
            fmt("mean gap %.3g at M=8 to %.3g at M=256, strictly decreasing: %s, ratio %.4f (< 0.1), %.1f s", gap.front(),
                gap.back(), dec ? "yes" : "no", ratio, secs)};
}

Outcome woodbury()
{
    Rng rng(derive_seed(1, {0xC3ULL}));
    double worst = 0.0;
    int count = 0;
    // every (N, C, M) on these grids with N M <= 1024, random and physical clutter
    for (int N : {4, 8, 16, 32})
        for (int C : {1, 2, 4})
            for (int M : {2, 4, 8, 16, 32})
            {
                if (N % C || N * M > 1024)
                    continue;
                SignalFactor s;
                s.p = 2.0;
                s.C = C;
                s.h = rng.complex_normal_matrix(M, N / C);
                FullClutterCovariance K;
                K.N = N;
                K.M = M;
                const int r = 1 + pick(rng, N * M);
                K.signatures = rng.complex_normal_matrix(N, r);
                K.steering = rng.complex_normal_matrix(M, r);
                K.scale = RVector::Constant(r, 3.0);
                const double ref = oracle::dense_mutual_information(s, K, 0.5);
                worst = std::max(worst, std::fabs(mutual_information(s, K, 0.5) - ref) / std::fabs(ref));
                ++count;
                if (N >= 8 && C <= 4)
                {
                    Theorem1Params tp;
                    tp.N = N;
                    tp.C = C;
                    tp.taps = 3;
                    tp.scatterers = 2;
                    tp.code_length = 3;
                    const auto phys = full_clutter_covariance(theorem1_clutter(tp, M, 7, count));
                    const double ref2 = oracle::dense_mutual_information(s, phys, 1.0);
                    worst = std::max(worst, std::fabs(mutual_information(s, phys, 1.0) - ref2) / std::fabs(ref2));
                    ++count;
                }
            }
    return {worst <= 1e-8, fmt("%d instances with NM <= 1024, worst rel diff %.2e (tol 1e-8)", count, worst)};
}

Outcome nulling()
{
    Rng rng(derive_seed(1, {0xC4ULL}));
    double wz = 0.0, wf = 0.0, wa = 0.0;
    const int draws = 1000;
    for (int t = 0; t < draws; ++t)
    {
        const int M = 16 << pick(rng, 3);
        const int ns = 1 + pick(rng, 6);
        const int K = 1 + pick(rng, 4);
        std::vector<double> angles(ns);
        LowRankPsd Kc;
        Kc.factor.resize(M, ns);
        for (int i = 0; i < ns; ++i)
        {
            angles[i] = rng.uniform(-kPi / 2, kPi / 2);
            Kc.factor.col(i) = std::sqrt(std::pow(10.0, rng.uniform(0.0, 4.0))) * steering_vector(angles[i], M, 0.5);
        }
        const CMatrix H = rng.complex_normal_matrix(M, K);
        const CVector c = Kc.factor * rng.complex_normal_vector(ns);
        const CMatrix U = clutter_subspace(Kc);
        const CMatrix V = fzf_combiners(H, U);
        const CMatrix Ua = aezf_basis(angles, M, 0.5);
        auto ratio = [&](const CVector &v) { return std::abs(v.dot(c)) / (v.norm() * c.norm()); };
        for (int k = 0; k < K; ++k)
        {
            wz = std::max(wz, ratio(zf_combiner(H.col(k), U).v));
            wf = std::max(wf, ratio(V.col(k)));
            wa = std::max(wa, ratio(aezf_combiner(H.col(k), Ua).v));
        }
    }
    return {std::max({wz, wf, wa}) <= 1e-10,
            fmt("%d draws, worst |v^H C|/(|v||C|): ZF %.2e, FZF %.2e, exact-angle AEZF %.2e (tol 1e-10)", draws, wz,
                wf, wa)};
}

Outcome ordering()
{
    const auto cfg = desk({{"M_list", {64}}, {"K", 10}, {"cnr_db", {30.0}}, {"estimators", {"perfect"}},
                           {"detectors", {"cm", "zf", "fzf", "lmmse"}}, {"trials", 1000}});
    const auto r = run_sinr_vs_cnr(cfg, workers());
    const double cm = point_db(r, 64, 30, "cm"), zf = point_db(r, 64, 30, "zf"), fzf = point_db(r, 64, 30, "fzf"),
                 lm = point_db(r, 64, 30, "lmmse");
    return {cm <= zf && zf <= fzf && fzf <= lm && zf - cm >= 1.0,
            fmt("mean dB SINR CM %.2f, ZF %.2f, FZF %.2f, LMMSE %.2f; ZF-CM %.2f dB (>= 1)", cm, zf, fzf, lm, zf - cm)};
}

Outcome array_gain()
{
    const auto cfg = desk({{"M_list", {16, 128}}, {"K", 1}, {"cnr_db", {20.0}}, {"estimators", {"perfect"}},
                           {"detectors", {"lmmse"}}, {"trials", 1000}});
    const auto r = run_sinr_vs_cnr(cfg, workers());
    const double a = point_db(r, 16, 20, "lmmse"), b = point_db(r, 128, 20, "lmmse");
    const double la = point_db(r, 16, 20, "lmmse", "sinr_db"), lb = point_db(r, 128, 20, "lmmse", "sinr_db");
    return {b - a >= 8.0 && b - a <= 12.0,
            fmt("mean dB SINR M=16 %.2f, M=128 %.2f, gain %.2f dB in [8, 12] (linear-mean gain %.2f dB)", a, b, b - a,
                lb - la)};
}

Outcome ncap()
{
    const auto cfg = desk({{"M_list", {128}}, {"K", 10}, {"cnr_db", {30.0, 40.0}}, {"estimators", {"perfect"}},
                           {"detectors", {"cm", "bzf", "aezf"}}, {"trials", 500}});
    const auto r = run_sinr_vs_cnr(cfg, workers());
    const double cm = point_db(r, 128, 30, "cm"), bzf = point_db(r, 128, 30, "bzf"), ae = point_db(r, 128, 30, "aezf"),
                 ae40 = point_db(r, 128, 40, "aezf");
    const double lcm = point_db(r, 128, 30, "cm", "sinr_db"), lbzf = point_db(r, 128, 30, "bzf", "sinr_db");
    const bool ok = ae - bzf >= 2.0 && bzf - cm >= 2.0 && std::fabs(ae40 - ae) <= 1.5;
    return {ok, fmt("K=10, mean dB SINR CM %.2f, BZF %.2f, AEZF %.2f; AEZF-BZF %.2f, BZF-CM %.2f (each >= 2; "
                    "linear-mean BZF-CM %.2f); AEZF 40 vs 30 dB %.2f (<= 1.5)",
                    cm, bzf, ae, ae - bzf, bzf - cm, lbzf - lcm, ae40 - ae)};
}

Outcome estimation()
{
    // paired squared-error differences on every appendix instance with clutter
    int configs = 0, users = 0, passed = 0;
    double weakest = std::numeric_limits<double>::infinity();
    const int trials = 10000;
    for (const auto &c : appendix_cases())
    {
        if (!c.clutter || c.estimator != Estimator::PM)
            continue;
        ++configs;
        const UatfScenario s = appendix_scenario(c, 1);
        const int M = s.M(), K = s.K(), q = s.block(), C = s.C, TC = s.book.length();
        std::vector<MmseMatrices> mm;
        for (int k = 0; k < K; ++k)
            mm.push_back(mmse_matrices(s.book, s.betas, s.training_factor(k), s.sigma2_w, q, k));
        std::vector<std::vector<double>> d(K);
        Rng rng(derive_seed(1, {0xC8ULL, static_cast<std::uint64_t>(configs)}));
        for (int t = 0; t < trials; ++t)
        {
            CMatrix H(M, K);
            for (int j = 0; j < K; ++j)
                H.col(j) = s.betas[j] * rng.complex_normal_vector(M);
            CMatrix Y = rng.complex_normal_matrix(M, TC, s.sigma2_w);
            for (std::size_t ell = 0; ell < s.training.size(); ++ell)
                Y.middleCols(static_cast<Eigen::Index>(ell) * C, C) += s.training[ell].draw_columns(q * C, C, rng);
            for (int j = 0; j < K; ++j)
                Y += std::sqrt(s.book.power[j]) * H.col(j) * s.book.pilot(j, q).transpose();
            for (int k = 0; k < K; ++k)
            {
                const double pm = (pm_estimate(Y, s.book, k, q) - H.col(k)).squaredNorm();
                const double me = (mmse_estimate(build_r_qk(Y, s.book, k, q), mm[k]) - H.col(k)).squaredNorm();
                d[k].push_back(pm - me);
            }
        }
        for (int k = 0; k < K; ++k)
        {
            double m = 0.0, v = 0.0;
            for (double x : d[k])
                m += x / trials;
            for (double x : d[k])
                v += (x - m) * (x - m) / (trials - 1);
            const double z = m / std::sqrt(v / trials);
            weakest = std::min(weakest, z);
            ++users;
            passed += z > 3.0;
        }
    }

    // noiseless, clutter-free, orthogonal pilots
    Rng rng(derive_seed(1, {0xC9ULL}));
    double worst = 0.0;
    for (int t = 0; t < 200; ++t)
    {
        const int M = 4 << pick(rng, 5);
        const int K = 1 + pick(rng, 8);
        PilotBookParams bp;
        bp.K = K;
        bp.T = 1 + pick(rng, 7);
        bp.C = 8;
        bp.Q = 2;
        bp.policy = PilotPolicy::Orthogonal;
        for (int k = 0; k < K; ++k)
            bp.power.push_back(rng.uniform(0.01, 1.0));
        if (K > bp.T * bp.C)
            continue;
        const auto book = build_pilot_book(bp, rng);
        const CMatrix H = rng.complex_normal_matrix(M, K);
        const int q = pick(rng, 2);
        CMatrix Y = CMatrix::Zero(M, book.length());
        for (int j = 0; j < K; ++j)
            Y += std::sqrt(book.power[j]) * H.col(j) * book.pilot(j, q).transpose();
        for (int k = 0; k < K; ++k)
            worst = std::max(worst, (pm_estimate(Y, book, k, q) - H.col(k)).norm() / H.col(k).norm());
    }
    return {passed == users && worst <= 1e-12,
            fmt("%d/%d users over %d clutter configurations with MSE(MMSE) < MSE(PM) at 3 sigma (weakest z %.1f); "
                "noiseless PM worst rel err %.1e (tol 1e-12)",
                passed, users, configs, weakest, worst)};
}

Outcome se_trends()
{
    std::map<std::tuple<int, int, double, std::string>, double> se; // (K, M, cnr, est)
    const std::vector<int> Ms = {8, 16, 32, 64, 128}, Ks = {1, 4, 10};
    std::vector<double> cnrs;
    for (int K : Ks)
    {
        const auto cfg = desk({{"se_M_list", Ms}, {"K", K}, {"drops", 500}, {"estimators", {"pm", "mmse"}}});
        cnrs = cfg.cnr_db;
        const auto r = run_se_vs_m(cfg, workers());
        for (std::size_t i = 0; i < r.rows.size(); ++i)
            se[{K, static_cast<int>(r.number(i, "M")), r.number(i, "cnr_db"), r.text(i, "estimator")}] =
                r.number(i, "se");
    }
    int bad_m = 0, bad_e = 0, bad_k = 0;
    for (int K : Ks)
        for (double c : cnrs)
            for (std::size_t m = 0; m < Ms.size(); ++m)
            {
                for (const char *e : {"pm", "mmse"})
                {
                    const double v = se.at({K, Ms[m], c, e});
                    if (m > 0 && !(v > se.at({K, Ms[m - 1], c, e})))
                        ++bad_m;
                    if (K != Ks.front())
                    {
                        const int prev = K == 4 ? 1 : 4;
                        if (!(v < se.at({prev, Ms[m], c, e})))
                            ++bad_k;
                    }
                }
                if (se.at({K, Ms[m], c, "mmse"}) < se.at({K, Ms[m], c, "pm"}))
                    ++bad_e;
            }
    return {bad_m + bad_e + bad_k == 0,
            fmt("%zu CNRs x K {1,4,10} x M {8..128}, 500 drops: non-increasing M steps %d, MMSE < PM points %d, "
                "non-decreasing K steps %d",
                cnrs.size(), bad_m, bad_e, bad_k)};
}

Outcome determinism()
{
    const auto sinr = desk({{"M_list", {8, 16}}, {"K", 3}, {"cnr_db", {10.0, 30.0}}, {"bzf_P", 4}, {"aezf_R", 64},
                            {"trials", 6}, {"eval_per_block", 1}, {"pilot_policy", "random"}});
    const auto sem = desk({{"se_M_list", {8, 16}}, {"K", 3}, {"cnr_db", {10.0}}, {"drops", 6}});
    const auto thm = desk({{"theorem_M_list", {8, 16, 32}}, {"theorem_seeds", 3}});
    auto app = desk({});
    app.appendix_trials = 500;
    const std::vector<std::pair<std::string, std::function<std::string(int)>>> runs = {
        {"sinr-vs-cnr", [&](int w) { return to_csv(run_sinr_vs_cnr(sinr, w)); }},
        {"se-vs-m", [&](int w) { return to_csv(run_se_vs_m(sem, w)); }},
        {"theorem1", [&](int w) { return to_csv(run_theorem1(thm, w)); }},
        {"validate-appendix", [&](int w) { return to_csv(run_validate_appendix(app, w).table); }},
    };
    std::string differ;
    for (const auto &[name, fn] : runs)
    {
        const std::string ref = fn(1);
        if (fn(2) != ref || fn(8) != ref || fn(1) != ref)
            differ += " " + name;
    }
    return {differ.empty(), differ.empty() ? "sinr-vs-cnr, se-vs-m, theorem1, validate-appendix byte-identical under "
                                             "1, 2, 8 workers"
                                           : "differs:" + differ};
}

} // namespace

int main(int argc, char **argv)
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
        {"closed forms match Monte Carlo", appendix},
        {"mutual-information gap vanishes", theorem1},
        {"Woodbury equals dense", woodbury},
        {"clutter nulling exactness", nulling},
        {"CAP detector ordering", ordering},
        {"array gain M=16 to 128", array_gain},
        {"NCAP ordering and floor", ncap},
        {"estimation quality", estimation},
        {"SE bound trends", se_trends},
        {"determinism across workers", determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i)
        only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < all.size(); ++i)
    {
        const int n = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(n))
            continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try
        {
            o = all[i].second();
        }
        catch (const std::exception &e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << all[i].first << "): " << o.detail
                  << " [" << fmt("%.1f", secs) << " s]" << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed"))
              << std::endl;
    return failed ? 1 : 0;
}
