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

#include "coexist/uplink_signal.hpp"

namespace coexist
{

double noise_variance(double psd_dbm_per_hz, double bandwidth_hz, double noise_figure_db)
{
    if (!(bandwidth_hz > 0.0))
        throw Error("noise_variance: bandwidth must be positive");
    return db_to_linear(psd_dbm_per_hz + 10.0 * std::log10(bandwidth_hz) + noise_figure_db - 30.0);
}

PilotPolicy parse_pilot_policy(const std::string &name)
{
    if (name == "orthogonal")
        return PilotPolicy::Orthogonal;
    if (name == "random" || name == "random_qpsk")
        return PilotPolicy::RandomQpsk;
    throw Error("unknown pilot policy '" + name + "' (expected orthogonal|random)");
}

std::string to_string(PilotPolicy p) { return p == PilotPolicy::Orthogonal ? "orthogonal" : "random"; }

cplx PilotBook::cross(int j, int k, int q) const
{
    return pilot(j, q).transpose() * normalized(k, q).conjugate();
}

void renormalize(PilotBook &book)
{
    book.P_tilde.resize(book.P.size());
    for (std::size_t k = 0; k < book.P.size(); ++k)
    {
        book.P_tilde[k].resize(book.P[k].size());
        for (std::size_t q = 0; q < book.P[k].size(); ++q)
        {
            const double e = book.P[k][q].squaredNorm();
            if (!(e > 0.0))
                throw Error("pilot book: zero-norm pilot for user " + std::to_string(k));
            book.P_tilde[k][q] = book.P[k][q] / e;
        }
    }
}

PilotBook build_pilot_book(const PilotBookParams &params, Rng &rng)
{
    const int TC = params.T * params.C;
    if (params.K < 1 || TC < 1 || params.Q < 1)
        throw Error("build_pilot_book: K, T, C, Q must be positive");
    if (params.policy == PilotPolicy::Orthogonal && params.K > TC)
        throw Error("build_pilot_book: orthogonal pilots need K <= T*C (K=" + std::to_string(params.K) +
                    ", TC=" + std::to_string(TC) + ")");
    const double energy = params.energy > 0.0 ? params.energy : static_cast<double>(TC);
    const double amp = std::sqrt(energy / TC);

    PilotBook book;
    book.T = params.T;
    book.C = params.C;
    book.P.assign(params.K, std::vector<CVector>(params.Q));
    if (params.power.size() == 1)
        book.power.assign(params.K, params.power.front());
    else if (static_cast<int>(params.power.size()) == params.K)
        book.power = params.power;
    else
        throw Error("build_pilot_book: need one pilot power or one per user");

    for (int k = 0; k < params.K; ++k)
        for (int q = 0; q < params.Q; ++q)
        {
            CVector p(TC);
            if (params.policy == PilotPolicy::Orthogonal)
            {
                // column k of the TC-point DFT matrix
                for (int i = 0; i < TC; ++i)
                    p(i) = std::polar(amp, -2.0 * kPi * static_cast<double>((i * k) % TC) / TC);
            }
            else
            {
                const double a = amp / std::sqrt(2.0);
                for (int i = 0; i < TC; ++i)
                {
                    const double re = rng.uniform(0.0, 1.0) < 0.5 ? -a : a;
                    const double im = rng.uniform(0.0, 1.0) < 0.5 ? -a : a;
                    p(i) = {re, im};
                }
            }
            book.P[k][q] = std::move(p);
        }
    renormalize(book);
    return book;
}

SymbolAlphabet parse_symbol_alphabet(const std::string &name)
{
    if (name == "qpsk")
        return SymbolAlphabet::Qpsk;
    if (name == "gaussian")
        return SymbolAlphabet::Gaussian;
    throw Error("unknown symbol alphabet '" + name + "' (expected qpsk|gaussian)");
}

CMatrix draw_symbols(int K, int N, SymbolAlphabet alphabet, Rng &rng)
{
    if (alphabet == SymbolAlphabet::Gaussian)
        return rng.complex_normal_matrix(K, N);
    const double a = 1.0 / std::sqrt(2.0);
    CMatrix X(K, N);
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k)
        {
            const auto bits = rng.engine()() & 3u;
            X(k, n) = {(bits & 1u) ? a : -a, (bits & 2u) ? a : -a};
        }
    return X;
}

namespace
{

void check_powers(const ChannelRealization &ch, const CMatrix &symbols, const std::vector<double> &powers)
{
    if (static_cast<int>(powers.size()) != ch.users() || symbols.rows() != ch.users())
        throw DimensionError("observable: users, powers and symbol rows disagree");
}

} // namespace

DataObservable synthesize_data_observable(const ChannelRealization &channels, const CMatrix &symbols,
                                          const std::vector<double> &powers, const CVector &clutter_column,
                                          double sigma2_w, int n, int C, Rng &rng)
{
    check_powers(channels, symbols, powers);
    const int q = block_of(n, C);
    if (q >= channels.Q || n >= symbols.cols())
        throw DimensionError("synthesize_data_observable: subcarrier out of range");
    DataObservable out;
    out.signal = CVector::Zero(channels.M);
    for (int k = 0; k < channels.users(); ++k)
        out.signal += std::sqrt(powers[k]) * symbols(k, n) * channels.blocks[k].col(q);
    out.noise = rng.complex_normal_vector(channels.M, sigma2_w);
    out.clutter = clutter_column.size() ? clutter_column : CVector::Zero(channels.M);
    out.y = out.signal + out.noise + out.clutter;
    return out;
}

PacketObservable synthesize_data_packet(const ChannelRealization &channels, const CMatrix &symbols,
                                        const std::vector<double> &powers, const CMatrix &clutter, double sigma2_w,
                                        int C, Rng &rng)
{
    check_powers(channels, symbols, powers);
    const auto N = symbols.cols();
    PacketObservable out;
    out.signal = CMatrix::Zero(channels.M, N);
    for (Eigen::Index n = 0; n < N; ++n)
    {
        const int q = block_of(static_cast<int>(n), C);
        for (int k = 0; k < channels.users(); ++k)
            out.signal.col(n) += std::sqrt(powers[k]) * symbols(k, n) * channels.blocks[k].col(q);
    }
    out.noise = rng.complex_normal_matrix(channels.M, N, sigma2_w);
    out.clutter = clutter.size() ? clutter : CMatrix::Zero(channels.M, N);
    out.Y = out.signal + out.noise + out.clutter;
    return out;
}

CMatrix data_signal_kronecker(const ChannelRealization &channels, const CMatrix &symbols,
                              const std::vector<double> &powers, int C)
{
    const auto N = symbols.cols();
    CMatrix out = CMatrix::Zero(channels.M, N);
    const CMatrix ones = CMatrix::Ones(1, C);
    for (int k = 0; k < channels.users(); ++k)
    {
        // kron([h^(1) .. h^(Q)], 1_{1xC}) repeats each block column C times
        CMatrix Hk(channels.M, channels.Q * C);
        for (int q = 0; q < channels.Q; ++q)
            Hk.middleCols(q * C, C) = channels.blocks[k].col(q) * ones;
        out += std::sqrt(powers[k]) * Hk.leftCols(N) * symbols.row(k).transpose().asDiagonal();
    }
    return out;
}

CMatrix training_clutter_block(const std::vector<CMatrix> &training_clutter, int q, int C)
{
    if (training_clutter.empty())
        throw DimensionError("training_clutter_block: no packets");
    const auto M = training_clutter.front().rows();
    CMatrix out(M, static_cast<Eigen::Index>(training_clutter.size()) * C);
    for (std::size_t ell = 0; ell < training_clutter.size(); ++ell)
        out.middleCols(static_cast<Eigen::Index>(ell) * C, C) = training_clutter[ell].middleCols(q * C, C);
    return out;
}

TrainingObservable synthesize_training_observable(const ChannelRealization &channels, const PilotBook &book,
                                                  const CMatrix &clutter_block, double sigma2_w, int q, Rng &rng)
{
    if (book.users() != channels.users())
        throw DimensionError("synthesize_training_observable: pilot book and channels disagree on K");
    const int TC = book.length();
    TrainingObservable out;
    out.signal = CMatrix::Zero(channels.M, TC);
    for (int k = 0; k < channels.users(); ++k)
        out.signal += std::sqrt(book.power[k]) * channels.blocks[k].col(q) * book.pilot(k, q).transpose();
    out.noise = rng.complex_normal_matrix(channels.M, TC, sigma2_w);
    if (clutter_block.size() && (clutter_block.rows() != channels.M || clutter_block.cols() != TC))
        throw DimensionError("synthesize_training_observable: clutter block must be M x TC");
    out.clutter = clutter_block.size() ? clutter_block : CMatrix::Zero(channels.M, TC);
    out.Y = out.signal + out.noise + out.clutter;
    return out;
}

} // namespace coexist
