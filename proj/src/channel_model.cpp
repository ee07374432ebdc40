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

#include "coexist/channel_model.hpp"

#include <json.hpp>

#include <fstream>

namespace coexist
{

double hata_fixed_loss_db(double carrier_mhz, double bs_height_m, double ms_height_m)
{
    const double lf = std::log10(carrier_mhz);
    return 46.3 + 33.9 * lf - 13.82 * std::log10(bs_height_m) - (1.1 * lf - 0.7) * ms_height_m + (1.56 * lf - 0.8);
}

double PathLossParams::resolved_fixed_loss_db() const
{
    return fixed_loss_db >= 0.0 ? fixed_loss_db : hata_fixed_loss_db(carrier_mhz, bs_height_m, ms_height_m);
}

CVector steering_vector(double theta, int M, double spacing_ratio)
{
    if (M < 1)
        throw DimensionError("steering_vector: M must be at least 1");
    if (!std::isfinite(theta))
        throw Error("steering_vector: non-finite angle");
    const double phase = -2.0 * kPi * spacing_ratio * std::sin(theta);
    CVector b(M);
    for (int m = 0; m < M; ++m)
        b(m) = std::polar(1.0, phase * m);
    return b;
}

double path_loss(double distance_m, const PathLossParams &p)
{
    if (!(distance_m > 0.0))
        throw Error("path_loss: distance must be positive");
    // Distances enter in km, as in the reference formulation.
    const double d = distance_m / 1000.0;
    const double d0 = p.near_breakpoint_m / 1000.0;
    const double d1 = p.far_breakpoint_m / 1000.0;
    const double L = p.resolved_fixed_loss_db();
    const double far_slope = 10.0 * p.far_exponent;
    const double mid_slope = 10.0 * p.mid_exponent;
    // Anchor at d1 so the far and mid segments meet there.
    const double at_d1 = -L - far_slope * std::log10(d1);
    double pl_db;
    if (d > d1)
        pl_db = -L - far_slope * std::log10(d);
    else if (d > d0)
        pl_db = at_d1 - mid_slope * std::log10(d / d1);
    else
        pl_db = at_d1 - mid_slope * std::log10(d0 / d1);
    return db_to_linear(pl_db);
}

CMatrix ChannelRealization::block_matrix(int q) const
{
    CMatrix H(M, users());
    for (int k = 0; k < users(); ++k)
        H.col(k) = blocks[k].col(q);
    return H;
}

std::vector<UserGeometry> random_geometry(int K, const PathLossParams &params, Rng &rng)
{
    std::vector<UserGeometry> out(K);
    for (int k = 0; k < K; ++k)
        out[k] = {k, rng.uniform(params.min_distance_m, params.max_distance_m)};
    return out;
}

std::vector<UserGeometry> load_geometry(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("load_geometry: cannot open " + path);
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw Error("load_geometry: " + path + ": " + e.what());
    }
    std::vector<UserGeometry> out;
    if (j.contains("users"))
    {
        for (const auto &u : j.at("users"))
            out.push_back({u.value("id", static_cast<int>(out.size())), u.at("distance_m").get<double>()});
    }
    else if (j.contains("user_distances_m"))
    {
        for (const auto &d : j.at("user_distances_m"))
            out.push_back({static_cast<int>(out.size()), d.get<double>()});
    }
    else
    {
        throw Error("load_geometry: " + path + ": expected 'users' or 'user_distances_m'");
    }
    for (const auto &u : out)
        if (!(u.distance_m > 0.0))
            throw Error("load_geometry: non-positive distance for user " + std::to_string(u.user_id));
    return out;
}

ChannelRealization draw_channels_with_betas(const std::vector<double> &betas, int M, int Q, Rng &rng)
{
    if (M < 1 || Q < 1)
        throw DimensionError("draw_channels: M and Q must be positive");
    ChannelRealization out;
    out.M = M;
    out.Q = Q;
    out.beta = betas;
    out.blocks.reserve(betas.size());
    for (double b : betas)
        out.blocks.push_back(b * rng.complex_normal_matrix(M, Q));
    return out;
}

double large_scale_beta(double distance_m, const PathLossParams &params, Rng &rng)
{
    const double shadow_db = params.shadowing_std_db * rng.normal();
    return std::sqrt(path_loss(distance_m, params) * db_to_linear(shadow_db));
}

ChannelRealization draw_channels(const std::vector<UserGeometry> &geometry, int M, int Q,
                                 const PathLossParams &params, Rng &rng)
{
    std::vector<double> betas;
    betas.reserve(geometry.size());
    for (const auto &u : geometry)
        betas.push_back(large_scale_beta(u.distance_m, params, rng));
    return draw_channels_with_betas(betas, M, Q, rng);
}

} // namespace coexist
