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

#ifndef COEXIST_INFOTHEORY_HPP
#define COEXIST_INFOTHEORY_HPP

#include "coexist/numerics.hpp"
#include "coexist/radar_clutter.hpp"

#include <cstdint>
#include <vector>

namespace coexist
{

// K_c = F F^H on C^{NM}, column j of F = scale_j * (R_j kron b_j); the NM x r
// factor itself is only formed on request.
struct FullClutterCovariance
{
    int N = 0;
    int M = 0;
    CMatrix signatures; // N x r
    CMatrix steering;   // M x r
    RVector scale;      // r

    int rank_bound() const { return static_cast<int>(scale.size()); }
    CMatrix factor() const;
    CMatrix dense() const;
    // F^H F = (R^H R) .* (B^H B) .* (s s^T)
    CMatrix gram() const;
    // Per-antenna power tr(K_c) / (N M).
    double mean_power() const;
};

// Columns (q, m) over all scatterers of one packet.
FullClutterCovariance full_clutter_covariance(const PacketClutter &packet);

// H~ block diagonal with blocks I_C kron sqrt(p) h^{(i)}; vec index n*M + m.
struct SignalFactor
{
    double p = 1.0;
    int C = 1;
    CMatrix h; // M x Q

    int M() const { return static_cast<int>(h.rows()); }
    int Q() const { return static_cast<int>(h.cols()); }
    int N() const { return Q() * C; }
    CMatrix dense() const; // NM x N
    RVector gram_diagonal() const; // diagonal of H~^H H~
};

struct MutualInformation
{
    double mi = 0.0;     // nats
    CMatrix G;           // H~^H (sigma2 I + K_c)^{-1} H~
    CMatrix D_M;         // clutter loss term scaled by 1/M
};

MutualInformation mutual_information_detail(const SignalFactor &signal, const FullClutterCovariance &clutter,
                                            double sigma2_w);
inline double mutual_information(const SignalFactor &signal, const FullClutterCovariance &clutter, double sigma2_w)
{
    return mutual_information_detail(signal, clutter, sigma2_w).mi;
}

// C * sum_i log(1 + p ||h^{(i)}||^2 / sigma2_w)
double clutter_free_mi(const SignalFactor &signal, double sigma2_w);

struct Theorem1Params
{
    int N = 32;
    int C = 4;
    int taps = 8;          // Q_c
    int scatterers = 4;    // scatterers inside the packet
    int code_length = 8;
    double cnr_db = 30.0;
    double snr_db = 0.0;   // p beta^2 / sigma2_w per antenna
    double sigma2_w = 1.0;
    double spacing_ratio = 0.5;
    double Ts = 8.146e-9;
    int N_cp = 2;
    bool clutter = true;
};

struct Theorem1Row
{
    int M = 0;
    int seed = 0;
    double mi_clutter = 0.0;
    double mi_clean = 0.0;
    double gap = 0.0;
    double tr_DM = 0.0;
    double tr2_DM = 0.0;
};

struct Theorem1Summary
{
    int M = 0;
    double mean_gap = 0.0;
    double var_gap = 0.0;
    double mean_tr_DM = 0.0;
    double mean_tr2_DM = 0.0;
};

struct Theorem1Table
{
    std::vector<Theorem1Row> rows;        // sorted by (M, seed)
    std::vector<Theorem1Summary> summary; // one per M
};

// Scenario for one seed: echoes placed entirely inside the packet body, CNR
// calibrated over the packet's subcarriers.
PacketClutter theorem1_clutter(const Theorem1Params &params, int M, std::uint64_t master, int seed);

Theorem1Table theorem1_study(const Theorem1Params &params, const std::vector<int> &M_list, int seeds,
                             std::uint64_t master_seed, int workers = 1);

} // namespace coexist

#endif
