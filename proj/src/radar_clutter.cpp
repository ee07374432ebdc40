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

#include "coexist/radar_clutter.hpp"
#include "coexist/channel_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>

namespace coexist
{

namespace
{

nlohmann::json read_json(const std::string &path, const char *who)
{
    std::ifstream in(path);
    if (!in)
        throw Error(std::string(who) + ": cannot open " + path);
    try
    {
        nlohmann::json j;
        in >> j;
        return j;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw Error(std::string(who) + ": " + path + ": " + e.what());
    }
}

} // namespace

void RadarWaveform::validate() const
{
    if (code.empty())
        throw Error("RadarWaveform: code length must be at least 1");
    double e = 0.0;
    for (const auto &c : code)
        e += std::norm(c);
    if (std::fabs(e - 1.0) > tol::unit_energy)
        throw Error("RadarWaveform: code energy is " + std::to_string(e) + ", expected 1");
    if (!(pulse_duration > 0.0))
        throw Error("RadarWaveform: pulse duration must be positive");
    if (!(transmit_power >= 0.0))
        throw Error("RadarWaveform: transmit power must be nonnegative");
}

RadarWaveform random_phase_waveform(int L, double pulse_duration, double transmit_power, double prt, Rng &rng)
{
    if (L < 1)
        throw Error("random_phase_waveform: L must be at least 1");
    RadarWaveform w;
    w.pulse_duration = pulse_duration;
    w.transmit_power = transmit_power;
    w.prt = prt;
    w.code.resize(L);
    const double amp = 1.0 / std::sqrt(static_cast<double>(L));
    for (auto &c : w.code)
        c = std::polar(amp, rng.uniform(-kPi, kPi));
    return w;
}

RadarWaveform load_waveform(const std::string &path)
{
    const auto j = read_json(path, "load_waveform");
    RadarWaveform w;
    double e = 0.0;
    for (const auto &c : j.at("code"))
    {
        cplx v = c.is_array() ? cplx(c.at(0).get<double>(), c.at(1).get<double>()) : cplx(c.get<double>(), 0.0);
        w.code.push_back(v);
        e += std::norm(v);
    }
    if (w.code.empty() || !(e > 0.0))
        throw Error("load_waveform: " + path + ": empty or zero-energy code");
    for (auto &c : w.code)
        c /= std::sqrt(e);
    w.pulse_duration = j.value("pulse_duration_s", w.pulse_duration);
    w.transmit_power = j.value("transmit_power_w", w.transmit_power);
    w.prt = j.value("prt_s", w.prt);
    w.validate();
    return w;
}

int ScattererEnsemble::taps() const
{
    return scatterers.empty() ? 0 : static_cast<int>(scatterers.front().variances.size());
}

void ScattererEnsemble::validate() const
{
    const int Qc = taps();
    for (std::size_t i = 0; i < scatterers.size(); ++i)
    {
        const auto &s = scatterers[i];
        if (static_cast<int>(s.variances.size()) != Qc || Qc < 1)
            throw Error("ScattererEnsemble: scatterer " + std::to_string(i) + " has inconsistent tap count");
        if (!(s.delay >= 0.0))
            throw Error("ScattererEnsemble: scatterer " + std::to_string(i) + " has negative delay");
        if (!std::isfinite(s.theta))
            throw Error("ScattererEnsemble: scatterer " + std::to_string(i) + " has non-finite angle");
        for (double v : s.variances)
            if (!(v >= 0.0))
                throw Error("ScattererEnsemble: scatterer " + std::to_string(i) + " has negative variance");
    }
}

double ScattererEnsemble::total_variance() const
{
    CompensatedSum s;
    for (const auto &q : scatterers)
        for (double v : q.variances)
            s.add(v);
    return s.value();
}

ScattererEnsemble ScattererEnsemble::scaled(double factor) const
{
    ScattererEnsemble out = *this;
    for (auto &q : out.scatterers)
        for (auto &v : q.variances)
            v *= factor;
    return out;
}

ScattererEnsemble random_ensemble(const EnsembleParams &params, Rng &rng)
{
    if (params.count < 0 || params.taps < 1)
        throw Error("random_ensemble: need count >= 0 and taps >= 1");
    ScattererEnsemble out;
    out.scatterers.resize(params.count);
    for (auto &s : out.scatterers)
    {
        s.theta = rng.uniform(params.min_theta, params.max_theta);
        const double range = rng.uniform(params.min_range_m, params.max_range_m);
        s.delay = params.delay_legs * range / kSpeedOfLight;
        s.variances.assign(params.taps, params.variance);
    }
    return out;
}

ScattererEnsemble load_ensemble(const std::string &path)
{
    const auto j = read_json(path, "load_ensemble");
    ScattererEnsemble out;
    for (const auto &e : j.at("scatterers"))
    {
        Scatterer s;
        s.theta = e.at("theta").get<double>();
        s.delay = e.at("delay_s").get<double>();
        s.variances = e.at("variances").get<std::vector<double>>();
        out.scatterers.push_back(std::move(s));
    }
    out.validate();
    return out;
}

void save_ensemble(const ScattererEnsemble &ensemble, const std::string &path)
{
    nlohmann::json j;
    j["scatterers"] = nlohmann::json::array();
    for (const auto &s : ensemble.scatterers)
        j["scatterers"].push_back({{"theta", s.theta}, {"delay_s", s.delay}, {"variances", s.variances}});
    std::ofstream out(path);
    if (!out)
        throw Error("save_ensemble: cannot write " + path);
    out << j.dump(2) << "\n";
}

double pulse_autocorr(double tau, double Ts)
{
    return std::max(0.0, 1.0 - std::fabs(tau) / Ts);
}

double echo_end(const Scatterer &s, int taps, int code_length, double Ts)
{
    return s.delay + (taps + code_length) * Ts;
}

std::vector<int> scatterers_for_packet(const ScattererEnsemble &ensemble, const RadarWaveform &waveform, int ell,
                                       const FrameTiming &timing)
{
    const double a = timing.packet_start(ell);
    const double b = timing.packet_end(ell);
    std::vector<int> out;
    for (int q = 0; q < ensemble.size(); ++q)
    {
        const auto &s = ensemble.scatterers[q];
        const double end = echo_end(s, static_cast<int>(s.variances.size()), waveform.length(), timing.Ts);
        if (s.delay <= b && end >= a)
            out.push_back(q);
    }
    return out;
}

CVector clutter_time_samples(int q, int ell, int m, const RadarWaveform &waveform, const ScattererEnsemble &ensemble,
                             const FrameTiming &timing)
{
    const auto &s = ensemble.scatterers.at(q);
    const double Ts = timing.Ts;
    const double t0 = timing.packet_start(ell);
    CVector x = CVector::Zero(timing.N);
    // Sample i (1..N) sits at t0 + i*Ts; r_psi has support |tau| < Ts, so each
    // chip touches at most two samples.
    for (int p = 0; p < waveform.length(); ++p)
    {
        const double shift = p * Ts + m * timing.replica_spacing() + s.delay;
        const double u = (shift - t0) / Ts;
        const double fl = std::floor(u);
        for (double i = fl - 1; i <= fl + 2; i += 1.0)
        {
            if (i < 1.0 || i > timing.N)
                continue;
            const double r = pulse_autocorr(t0 + i * Ts - shift, Ts);
            if (r > 0.0)
                x(static_cast<Eigen::Index>(i) - 1) += waveform.code[p] * r;
        }
    }
    return x;
}

CVector clutter_signature(int q, int ell, int m, const RadarWaveform &waveform, const ScattererEnsemble &ensemble,
                          const FrameTiming &timing)
{
    return isometric_dft(clutter_time_samples(q, ell, m, waveform, ensemble, timing));
}

PacketClutter::PacketClutter(const ScattererEnsemble &ensemble, const RadarWaveform &waveform, int ell,
                             const FrameTiming &timing, int M, double spacing_ratio)
    : packet_(ell), N_(timing.N), transmit_power_(waveform.transmit_power)
{
    waveform.validate();
    active_ = scatterers_for_packet(ensemble, waveform, ell, timing);
    const int s = active_count();
    steering_.resize(M, s);
    weights_ = RMatrix::Zero(s, N_);
    signatures_.reserve(s);
    variances_.reserve(s);
    for (int i = 0; i < s; ++i)
    {
        const auto &sc = ensemble.scatterers[active_[i]];
        steering_.col(i) = steering_vector(sc.theta, M, spacing_ratio);
        const int Qc = static_cast<int>(sc.variances.size());
        CMatrix sig(N_, Qc);
        for (int m = 0; m < Qc; ++m)
        {
            sig.col(m) = clutter_signature(active_[i], ell, m, waveform, ensemble, timing);
            weights_.row(i) += (transmit_power_ * sc.variances[m]) * sig.col(m).cwiseAbs2().transpose();
        }
        signatures_.push_back(std::move(sig));
        variances_.push_back(sc.variances);
    }
}

double PacketClutter::per_antenna_power(int n) const
{
    CompensatedSum acc;
    for (int i = 0; i < active_count(); ++i)
        acc.add(weights_(i, n));
    return acc.value();
}

LowRankPsd PacketClutter::covariance(int n) const
{
    if (n < 0 || n >= N_)
        throw DimensionError("PacketClutter::covariance: subcarrier out of range");
    LowRankPsd out;
    out.factor.resize(steering_.rows(), active_count());
    for (int i = 0; i < active_count(); ++i)
        out.factor.col(i) = std::sqrt(weights_(i, n)) * steering_.col(i);
    return out;
}

CMatrix PacketClutter::draw_columns(int first, int count, Rng &rng) const
{
    if (first < 0 || count < 0 || first + count > N_)
        throw DimensionError("PacketClutter::draw_columns: range out of bounds");
    CMatrix C = CMatrix::Zero(steering_.rows(), count);
    const double amp = std::sqrt(transmit_power_);
    for (int i = 0; i < active_count(); ++i)
    {
        const auto &var = variances_[i];
        CVector beta(static_cast<Eigen::Index>(var.size()));
        for (std::size_t m = 0; m < var.size(); ++m)
            beta(static_cast<Eigen::Index>(m)) = rng.complex_normal(var[m]);
        const CVector z = amp * (signatures_[i].middleRows(first, count) * beta);
        C.noalias() += steering_.col(i) * z.transpose();
    }
    return C;
}

void PacketClutter::scale(double factor)
{
    if (!(factor >= 0.0))
        throw Error("PacketClutter::scale: factor must be nonnegative");
    weights_ *= factor;
    for (auto &v : variances_)
        for (auto &x : v)
            x *= factor;
}

std::vector<PacketClutter> build_slot_clutter(const ScattererEnsemble &ensemble, const RadarWaveform &waveform,
                                              const FrameTiming &timing, int M, double spacing_ratio)
{
    std::vector<PacketClutter> out;
    out.reserve(timing.N_pkt);
    for (int ell = 0; ell < timing.N_pkt; ++ell)
        out.emplace_back(ensemble, waveform, ell, timing, M, spacing_ratio);
    return out;
}

CMatrix draw_clutter_matrix(const ScattererEnsemble &ensemble, const RadarWaveform &waveform, int ell,
                            const FrameTiming &timing, int M, double spacing_ratio, Rng &rng)
{
    return PacketClutter(ensemble, waveform, ell, timing, M, spacing_ratio).draw(rng);
}

CMatrix clutter_cov_subcarrier(const ScattererEnsemble &ensemble, const RadarWaveform &waveform, int ell, int n,
                               const FrameTiming &timing, int M, double spacing_ratio)
{
    return PacketClutter(ensemble, waveform, ell, timing, M, spacing_ratio).covariance_dense(n);
}

CMatrix training_block_covariance(const PacketClutter &packet, int q, int C)
{
    const int M = packet.M();
    if (C < 1 || q < 0 || (q + 1) * C > packet.N())
        throw DimensionError("training_block_covariance: block out of range");
    CMatrix K = CMatrix::Zero(M * C, M * C);
    for (int i = 0; i < packet.active_count(); ++i)
    {
        const CMatrix &sig = packet.signatures(i);
        const auto &var = packet.variances(i);
        CMatrix S = CMatrix::Zero(C, C);
        for (int m = 0; m < sig.cols(); ++m)
        {
            const CVector r = sig.col(m).segment(q * C, C);
            S.noalias() += (packet.transmit_power() * var[m]) * r * r.adjoint();
        }
        const CMatrix B = packet.steering().col(i) * packet.steering().col(i).adjoint();
        for (int c1 = 0; c1 < C; ++c1)
            for (int c2 = 0; c2 < C; ++c2)
                K.block(c1 * M, c2 * M, M, M) += S(c1, c2) * B;
    }
    return K;
}

namespace
{

void check_pilot(const std::vector<PacketClutter> &training, int C, const CVector &pilot)
{
    if (pilot.size() != static_cast<Eigen::Index>(training.size()) * C)
        throw DimensionError("training clutter: pilot length must equal T*C");
}

} // namespace

CMatrix training_clutter_cov(const std::vector<PacketClutter> &training_packets, int q, int C,
                             const CVector &pilot_normalized)
{
    check_pilot(training_packets, C, pilot_normalized);
    if (training_packets.empty())
        throw DimensionError("training_clutter_cov: no training packets");
    const int M = training_packets.front().M();
    CMatrix out = CMatrix::Zero(M, M);
    // Block ell of blkdiag(...) pairs with pilot entries ell*C .. ell*C+C-1. Entry
    // (c*M + m) of vec(C_ell block) is clutter at antenna m, subcarrier c.
    for (std::size_t ell = 0; ell < training_packets.size(); ++ell)
    {
        const auto &pk = training_packets[ell];
        const CMatrix K = training_block_covariance(pk, q, C);
        for (int c1 = 0; c1 < C; ++c1)
            for (int c2 = 0; c2 < C; ++c2)
            {
                const cplx w = std::conj(pilot_normalized(ell * C + c1)) * pilot_normalized(ell * C + c2);
                out += w * K.block(c1 * M, c2 * M, M, M);
            }
    }
    return out;
}

RVector training_clutter_weights(const std::vector<PacketClutter> &training_packets, int q, int C,
                                 const CVector &pilot_normalized)
{
    check_pilot(training_packets, C, pilot_normalized);
    int cols = 0;
    for (const auto &pk : training_packets)
        cols += pk.active_count();
    RVector out(cols);
    int col = 0;
    for (std::size_t ell = 0; ell < training_packets.size(); ++ell)
    {
        const auto &pk = training_packets[ell];
        const CVector pconj = pilot_normalized.segment(ell * C, C).conjugate();
        for (int i = 0; i < pk.active_count(); ++i)
        {
            const CMatrix &sig = pk.signatures(i);
            const auto &var = pk.variances(i);
            const double pt = pk.transmit_power();
            double w = 0.0;
            for (int m = 0; m < sig.cols(); ++m)
                w += pt * var[m] * std::norm(sig.col(m).segment(q * C, C).cwiseProduct(pconj).sum());
            out(col++) = w;
        }
    }
    return out;
}

LowRankPsd training_clutter_factor(const std::vector<PacketClutter> &training_packets, int q, int C,
                                   const CVector &pilot_normalized)
{
    const RVector w = training_clutter_weights(training_packets, q, C, pilot_normalized);
    const int M = training_packets.empty() ? 0 : training_packets.front().M();
    LowRankPsd out;
    out.factor = CMatrix::Zero(M, w.size());
    int col = 0;
    for (const auto &pk : training_packets)
        for (int i = 0; i < pk.active_count(); ++i, ++col)
            out.factor.col(col) = std::sqrt(w(col)) * pk.steering().col(i);
    return out;
}

double average_clutter_power(const std::vector<PacketClutter> &packets)
{
    CompensatedSum acc;
    std::size_t count = 0;
    for (const auto &pk : packets)
        for (int n = 0; n < pk.N(); ++n)
        {
            acc.add(pk.per_antenna_power(n));
            ++count;
        }
    return count ? acc.value() / static_cast<double>(count) : 0.0;
}

double cnr_scale_factor(double average_power, double target_cnr_db, double sigma2_w)
{
    if (!(average_power > 0.0))
        throw Error("calibrate_cnr: ensemble has zero clutter power in the slot");
    if (std::isinf(target_cnr_db) && target_cnr_db < 0)
        return 0.0;
    if (!std::isfinite(target_cnr_db))
        throw Error("calibrate_cnr: target must be finite");
    return sigma2_w * db_to_linear(target_cnr_db) / average_power;
}

CnrCalibration calibrate_cnr(const ScattererEnsemble &ensemble, const RadarWaveform &waveform,
                             const FrameTiming &timing, double target_cnr_db, double sigma2_w)
{
    // Weights do not depend on the array size, so a single antenna suffices.
    const auto slot = build_slot_clutter(ensemble, waveform, timing, 1, 0.5);
    CnrCalibration out;
    out.factor = cnr_scale_factor(average_clutter_power(slot), target_cnr_db, sigma2_w);
    out.ensemble = ensemble.scaled(out.factor);
    return out;
}

namespace
{
constexpr char kMagic[8] = {'C', 'X', 'M', 'A', 'T', '1', '\0', '\0'};
}

void write_matrix_dump(const std::string &path, const CMatrix &A)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("write_matrix_dump: cannot write " + path);
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t dims[2] = {static_cast<std::uint64_t>(A.rows()), static_cast<std::uint64_t>(A.cols())};
    out.write(reinterpret_cast<const char *>(dims), sizeof dims);
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
        {
            const double v[2] = {A(i, j).real(), A(i, j).imag()};
            out.write(reinterpret_cast<const char *>(v), sizeof v);
        }
}

CMatrix read_matrix_dump(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("read_matrix_dump: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw Error("read_matrix_dump: bad header in " + path);
    std::uint64_t dims[2];
    in.read(reinterpret_cast<char *>(dims), sizeof dims);
    CMatrix A(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
        {
            double v[2];
            in.read(reinterpret_cast<char *>(v), sizeof v);
            A(i, j) = {v[0], v[1]};
        }
    if (!in)
        throw Error("read_matrix_dump: truncated file " + path);
    return A;
}

} // namespace coexist
