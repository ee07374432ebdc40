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

#ifndef COEXIST_CHANNEL_MODEL_HPP
#define COEXIST_CHANNEL_MODEL_HPP

#include "coexist/numerics.hpp"
#include "coexist/rng.hpp"

#include <string>
#include <vector>

namespace coexist
{

struct UserGeometry
{
    int user_id = 0;
    double distance_m = 100.0;
};

// Amplitude coefficient of the small-scale fading; channel power scales with beta^2.
struct LargeScaleCoefficient
{
    double beta = 1.0;
};

// Three-slope path loss with log-normal shadowing. Distances in meters.
struct PathLossParams
{
    double carrier_mhz = 3000.0;
    double bs_height_m = 15.0;
    double ms_height_m = 1.65;
    double near_breakpoint_m = 10.0;
    double far_breakpoint_m = 50.0;
    double mid_exponent = 2.0;   // slope between the breakpoints is 10*mid_exponent dB/decade
    double far_exponent = 3.5;
    double fixed_loss_db = -1.0; // < 0 selects the Hata-style value from the heights and carrier
    double shadowing_std_db = 8.0;
    double min_distance_m = 20.0;
    double max_distance_m = 500.0;

    double resolved_fixed_loss_db() const;
};

// Hata-style intercept L used by the three-slope model.
double hata_fixed_loss_db(double carrier_mhz, double bs_height_m, double ms_height_m);

// Entry m equals exp(-j 2 pi spacing_ratio sin(theta) m).
CVector steering_vector(double theta, int M, double spacing_ratio = 0.5);

// Linear power gain (<= 1) before shadowing.
double path_loss(double distance_m, const PathLossParams &params);

struct ChannelRealization
{
    int M = 0;
    int Q = 0;
    std::vector<double> beta;    // per user
    std::vector<CMatrix> blocks; // blocks[k] is M x Q, column q = h_k^{(q)}

    int users() const { return static_cast<int>(beta.size()); }
    CVector h(int k, int q) const { return blocks.at(k).col(q); }
    // M x K matrix of all user channels for block q.
    CMatrix block_matrix(int q) const;
};

std::vector<UserGeometry> random_geometry(int K, const PathLossParams &params, Rng &rng);

// Scenario file: JSON object {"users": [{"id": 0, "distance_m": 120.0}, ...]}
// or the short form {"user_distances_m": [120.0, ...]}.
std::vector<UserGeometry> load_geometry(const std::string &path);

// sqrt(path_loss(d) * 10^(s/10)), s ~ N(0, shadowing_std_db^2) drawn from rng.
double large_scale_beta(double distance_m, const PathLossParams &params, Rng &rng);

// beta_k = sqrt(path_loss * shadowing); one shadowing draw per user, then
// g_k^{(q)} ~ CN(0, I_M) independently per block.
ChannelRealization draw_channels(const std::vector<UserGeometry> &geometry, int M, int Q,
                                 const PathLossParams &params, Rng &rng);

// Same fading draws with externally supplied amplitudes.
ChannelRealization draw_channels_with_betas(const std::vector<double> &betas, int M, int Q, Rng &rng);

} // namespace coexist

#endif
