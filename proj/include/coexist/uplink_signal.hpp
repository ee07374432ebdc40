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

#ifndef COEXIST_UPLINK_SIGNAL_HPP
#define COEXIST_UPLINK_SIGNAL_HPP

#include "coexist/channel_model.hpp"
#include "coexist/numerics.hpp"
#include "coexist/rng.hpp"

#include <string>
#include <vector>

namespace coexist
{

// Thermal noise power in watts over the given bandwidth.
double noise_variance(double psd_dbm_per_hz, double bandwidth_hz, double noise_figure_db);

enum class PilotPolicy
{
    Orthogonal,
    RandomQpsk
};

PilotPolicy parse_pilot_policy(const std::string &name);
std::string to_string(PilotPolicy p);

// P[k][q] is the TC-vector of user k for block q; normalized(k, q) = P / ||P||^2.
struct PilotBook
{
    int T = 0;
    int C = 0;
    std::vector<std::vector<CVector>> P;
    std::vector<std::vector<CVector>> P_tilde;
    std::vector<double> power; // p_{p,k}

    int users() const { return static_cast<int>(P.size()); }
    int blocks() const { return P.empty() ? 0 : static_cast<int>(P.front().size()); }
    int length() const { return T * C; }
    const CVector &pilot(int k, int q) const { return P.at(k).at(q); }
    const CVector &normalized(int k, int q) const { return P_tilde.at(k).at(q); }
    // P_j^T conj(P~_k)
    cplx cross(int j, int k, int q) const;
};

struct PilotBookParams
{
    int K = 1;
    int T = 7;
    int C = 16;
    int Q = 256;
    double energy = -1.0; // ||P||^2, <= 0 means T*C (unit-modulus entries)
    PilotPolicy policy = PilotPolicy::Orthogonal;
    std::vector<double> power; // per user; one entry or K entries
};

PilotBook build_pilot_book(const PilotBookParams &params, Rng &rng);
// Same book but every user's normalized pilot is recomputed after edits to P.
void renormalize(PilotBook &book);

enum class SymbolAlphabet
{
    Qpsk,
    Gaussian
};

SymbolAlphabet parse_symbol_alphabet(const std::string &name);

// K x N matrix of unit-average-energy FFT-domain symbols for one packet.
CMatrix draw_symbols(int K, int N, SymbolAlphabet alphabet, Rng &rng);

// Block index of subcarrier n (0-based): n / C.
inline int block_of(int n, int C) { return n / C; }

struct DataObservable
{
    CVector y;
    CVector signal;
    CVector noise;
    CVector clutter;
};

// y = sum_k sqrt(p_k) X_k(n) h_k^{(q)} + W + C^{(n)}; noise drawn from rng.
DataObservable synthesize_data_observable(const ChannelRealization &channels, const CMatrix &symbols,
                                          const std::vector<double> &powers, const CVector &clutter_column,
                                          double sigma2_w, int n, int C, Rng &rng);

// Whole packet: M x N matrices with signal, noise and clutter kept apart.
struct PacketObservable
{
    CMatrix Y;
    CMatrix signal;
    CMatrix noise;
    CMatrix clutter;
};

PacketObservable synthesize_data_packet(const ChannelRealization &channels, const CMatrix &symbols,
                                        const std::vector<double> &powers, const CMatrix &clutter, double sigma2_w,
                                        int C, Rng &rng);

// Noise-free signal part built through ([h^{(1)} .. h^{(Q)}] kron 1_{1xC}) diag(X_k), summed over users.
CMatrix data_signal_kronecker(const ChannelRealization &channels, const CMatrix &symbols,
                              const std::vector<double> &powers, int C);

// Columns qC .. qC+C-1 of each training packet's clutter, side by side: M x TC.
CMatrix training_clutter_block(const std::vector<CMatrix> &training_clutter, int q, int C);

struct TrainingObservable
{
    CMatrix Y;
    CMatrix signal;
    CMatrix noise;
    CMatrix clutter;
};

TrainingObservable synthesize_training_observable(const ChannelRealization &channels, const PilotBook &book,
                                                  const CMatrix &clutter_block, double sigma2_w, int q, Rng &rng);

} // namespace coexist

#endif
