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
#include "coexist/uplink_signal.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace coexist
{

namespace
{

// One call per config field, in a fixed order shared by every consumer.
template <class Cfg, class V> void visit_fields(Cfg &c, V &&v)
{
    v("profile", c.profile);
    v("M_list", c.M_list);
    v("se_M_list", c.se_M_list);
    v("K", c.K);
    v("spacing_ratio", c.spacing_ratio);
    v("N", c.N);
    v("C", c.C);
    v("T", c.T);
    v("N_pkt", c.N_pkt);
    v("N_cp", c.N_cp);
    v("subcarrier_spacing_hz", c.subcarrier_spacing_hz);
    v("Ts_s", c.Ts_s);
    v("carrier_hz", c.carrier_hz);
    v("L", c.L);
    v("prt_s", c.prt_s);
    v("radar_power_w", c.radar_power_w);
    v("N_s", c.N_s);
    v("Q_c", c.Q_c);
    v("min_range_m", c.min_range_m);
    v("max_range_m", c.max_range_m);
    v("delay_legs", c.delay_legs);
    v("data_power_w", c.data_power_w);
    v("pilot_power_w", c.pilot_power_w);
    v("noise_psd_dbm_hz", c.noise_psd_dbm_hz);
    v("noise_figure_db", c.noise_figure_db);
    v("min_distance_m", c.min_distance_m);
    v("max_distance_m", c.max_distance_m);
    v("shadowing_std_db", c.shadowing_std_db);
    v("bs_height_m", c.bs_height_m);
    v("ms_height_m", c.ms_height_m);
    v("near_breakpoint_m", c.near_breakpoint_m);
    v("far_breakpoint_m", c.far_breakpoint_m);
    v("fixed_loss_db", c.fixed_loss_db);
    v("cnr_db", c.cnr_db);
    v("estimators", c.estimators);
    v("detectors", c.detectors);
    v("pilot_policy", c.pilot_policy);
    v("pilot_energy", c.pilot_energy);
    v("symbols", c.symbols);
    v("bzf_P", c.bzf_P);
    v("aezf_R", c.aezf_R);
    v("aezf_multiplier", c.aezf_multiplier);
    v("eval_per_block", c.eval_per_block);
    v("trials", c.trials);
    v("drops", c.drops);
    v("seed", c.seed);
    v("geometry_file", c.geometry_file);
    v("ensemble_file", c.ensemble_file);
    v("waveform_file", c.waveform_file);
    v("theorem_N", c.theorem_N);
    v("theorem_C", c.theorem_C);
    v("theorem_taps", c.theorem_taps);
    v("theorem_scatterers", c.theorem_scatterers);
    v("theorem_code_length", c.theorem_code_length);
    v("theorem_cnr_db", c.theorem_cnr_db);
    v("theorem_snr_db", c.theorem_snr_db);
    v("theorem_M_list", c.theorem_M_list);
    v("theorem_seeds", c.theorem_seeds);
    v("theorem_clutter", c.theorem_clutter);
    v("allow_full_scale", c.allow_full_scale);
    v("appendix_trials", c.appendix_trials);
    v("appendix_tolerance", c.appendix_tolerance);
}

void read_value(const nlohmann::json &j, const std::string &path, int &out, std::vector<std::string> &err)
{
    if (!j.is_number_integer())
    {
        err.push_back("config key '" + path + "': expected an integer");
        return;
    }
    const auto v = j.get<long long>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    {
        err.push_back("config key '" + path + "': integer out of range");
        return;
    }
    out = static_cast<int>(v);
}

void read_value(const nlohmann::json &j, const std::string &path, std::uint64_t &out, std::vector<std::string> &err)
{
    if (j.is_number_unsigned())
        out = j.get<std::uint64_t>();
    else if (j.is_number_integer() && j.get<long long>() >= 0)
        out = static_cast<std::uint64_t>(j.get<long long>());
    else
        err.push_back("config key '" + path + "': expected a nonnegative integer");
}

void read_value(const nlohmann::json &j, const std::string &path, double &out, std::vector<std::string> &err)
{
    if (!j.is_number())
    {
        err.push_back("config key '" + path + "': expected a number");
        return;
    }
    out = j.get<double>();
}

void read_value(const nlohmann::json &j, const std::string &path, bool &out, std::vector<std::string> &err)
{
    if (!j.is_boolean())
    {
        err.push_back("config key '" + path + "': expected true or false");
        return;
    }
    out = j.get<bool>();
}

void read_value(const nlohmann::json &j, const std::string &path, std::string &out, std::vector<std::string> &err)
{
    if (!j.is_string())
    {
        err.push_back("config key '" + path + "': expected a string");
        return;
    }
    out = j.get<std::string>();
}

template <class T>
void read_value(const nlohmann::json &j, const std::string &path, std::vector<T> &out, std::vector<std::string> &err)
{
    if (!j.is_array())
    {
        err.push_back("config key '" + path + "': expected a list");
        return;
    }
    std::vector<T> tmp(j.size());
    const std::size_t before = err.size();
    for (std::size_t i = 0; i < j.size(); ++i)
        read_value(j[i], path + "[" + std::to_string(i) + "]", tmp[i], err);
    if (err.size() == before)
        out = std::move(tmp);
}

std::string join_errors(const std::vector<std::string> &errs)
{
    std::string out;
    for (const auto &e : errs)
        out += (out.empty() ? "" : "\n") + e;
    return out;
}

template <class T> bool ascending_positive(const std::vector<T> &v)
{
    if (v.empty())
        return false;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!(v[i] > 0) || (i && !(v[i] > v[i - 1])))
            return false;
    return true;
}

} // namespace

FrameTiming SystemConfig::timing() const
{
    FrameTiming t;
    t.N = N;
    t.N_cp = N_cp;
    t.N_pkt = N_pkt;
    t.Ts = Ts_s;
    return t;
}

PathLossParams SystemConfig::path_loss() const
{
    PathLossParams p;
    p.carrier_mhz = carrier_hz / 1e6;
    p.bs_height_m = bs_height_m;
    p.ms_height_m = ms_height_m;
    p.near_breakpoint_m = near_breakpoint_m;
    p.far_breakpoint_m = far_breakpoint_m;
    p.fixed_loss_db = fixed_loss_db;
    p.shadowing_std_db = shadowing_std_db;
    p.min_distance_m = min_distance_m;
    p.max_distance_m = max_distance_m;
    return p;
}

EnsembleParams SystemConfig::ensemble_params() const
{
    EnsembleParams e;
    e.count = N_s;
    e.taps = clutter_taps();
    e.min_range_m = min_range_m;
    e.max_range_m = max_range_m;
    e.delay_legs = delay_legs;
    return e;
}

// Noise over the occupied band N * delta_f; the isometric FFT keeps the per-sample variance.
double SystemConfig::sigma2_w() const
{
    return noise_variance(noise_psd_dbm_hz, N * subcarrier_spacing_hz, noise_figure_db);
}

SystemConfig full_profile() { return SystemConfig{}; }

SystemConfig desk_profile()
{
    SystemConfig c;
    c.profile = "desk";
    c.N = 64;
    c.C = 4;
    c.Q_c = 16;
    c.L = 8;
    c.N_cp = 5;
    // 14 packets of 69 samples still fill 0.5 ms, so delta_f stays near 30 kHz
    c.Ts_s = 0.5e-3 / (14.0 * 69.0);
    c.N_s = 100;
    c.trials = 500;
    c.drops = 500;
    return c;
}

std::vector<std::string> validate_config(const SystemConfig &c)
{
    std::vector<std::string> e;
    auto need = [&](bool ok, const std::string &msg) {
        if (!ok)
            e.push_back(msg);
    };
    need(c.profile == "full" || c.profile == "desk", "profile: expected 'full' or 'desk'");
    need(ascending_positive(c.M_list), "M_list: need a nonempty, strictly ascending list of positive sizes");
    need(ascending_positive(c.se_M_list), "se_M_list: need a nonempty, strictly ascending list of positive sizes");
    need(c.K >= 1, "K: need at least one user");
    need(c.spacing_ratio > 0.0, "spacing_ratio: must be positive");
    need(c.N >= 1, "N: must be positive");
    need(c.C >= 1, "C: must be positive");
    need(c.C >= 1 && c.N % c.C == 0, "C: must divide N");
    need(c.T >= 1, "T: need at least one training packet");
    need(c.N_pkt >= 1, "N_pkt: must be positive");
    need(c.T < c.N_pkt, "T: must leave at least one data packet (T < N_pkt)");
    need(c.N_cp >= 0, "N_cp: must be nonnegative");
    need(c.subcarrier_spacing_hz > 0.0, "subcarrier_spacing_hz: must be positive");
    need(c.Ts_s > 0.0, "Ts_s: must be positive");
    need(c.carrier_hz > 0.0, "carrier_hz: must be positive");
    need(c.L >= 1, "L: must be positive");
    need(c.prt_s > 0.0, "prt_s: must be positive");
    need(c.radar_power_w >= 0.0, "radar_power_w: must be nonnegative");
    need(c.N_s >= 0, "N_s: must be nonnegative");
    need(c.Q_c >= 0, "Q_c: must be nonnegative (0 selects N / C)");
    need(c.min_range_m > 0.0 && c.min_range_m <= c.max_range_m, "min_range_m/max_range_m: need 0 < min <= max");
    need(c.delay_legs > 0.0, "delay_legs: must be positive");
    need(c.data_power_w > 0.0, "data_power_w: must be positive");
    need(c.pilot_power_w > 0.0, "pilot_power_w: must be positive");
    need(std::isfinite(c.noise_psd_dbm_hz), "noise_psd_dbm_hz: must be finite");
    need(std::isfinite(c.noise_figure_db), "noise_figure_db: must be finite");
    need(c.min_distance_m > 0.0 && c.min_distance_m <= c.max_distance_m,
         "min_distance_m/max_distance_m: need 0 < min <= max");
    need(c.shadowing_std_db >= 0.0, "shadowing_std_db: must be nonnegative");
    need(c.bs_height_m > 0.0 && c.ms_height_m > 0.0, "bs_height_m/ms_height_m: must be positive");
    need(c.near_breakpoint_m > 0.0 && c.near_breakpoint_m < c.far_breakpoint_m,
         "near_breakpoint_m/far_breakpoint_m: need 0 < near < far");
    need(!c.cnr_db.empty(), "cnr_db: need at least one value");
    for (std::size_t i = 0; i < c.cnr_db.size(); ++i)
        need(std::isfinite(c.cnr_db[i]), "cnr_db[" + std::to_string(i) + "]: must be finite");
    need(!c.estimators.empty(), "estimators: need at least one");
    for (std::size_t i = 0; i < c.estimators.size(); ++i)
        try
        {
            parse_estimator(c.estimators[i]);
        }
        catch (const Error &ex)
        {
            e.push_back("estimators[" + std::to_string(i) + "]: " + ex.what());
        }
    need(!c.detectors.empty(), "detectors: need at least one");
    for (std::size_t i = 0; i < c.detectors.size(); ++i)
        try
        {
            parse_detector(c.detectors[i]);
        }
        catch (const Error &ex)
        {
            e.push_back("detectors[" + std::to_string(i) + "]: " + ex.what());
        }
    try
    {
        if (parse_pilot_policy(c.pilot_policy) == PilotPolicy::Orthogonal)
            need(c.K <= c.T * c.C, "K: orthogonal pilots need K <= T * C");
    }
    catch (const Error &ex)
    {
        e.push_back(std::string("pilot_policy: ") + ex.what());
    }
    try
    {
        parse_symbol_alphabet(c.symbols);
    }
    catch (const Error &ex)
    {
        e.push_back(std::string("symbols: ") + ex.what());
    }
    need(c.bzf_P >= 0, "bzf_P: must be nonnegative");
    need(c.aezf_R >= 2, "aezf_R: need at least 2 grid points");
    need(std::isfinite(c.aezf_multiplier), "aezf_multiplier: must be finite");
    need(c.eval_per_block >= 0 && c.eval_per_block <= c.C, "eval_per_block: need 0 <= value <= C");
    need(c.trials >= 1, "trials: must be positive");
    need(c.drops >= 1, "drops: must be positive");
    need(c.theorem_N >= 1 && c.theorem_C >= 1 && c.theorem_N % c.theorem_C == 0,
         "theorem_N/theorem_C: need positive values with C dividing N");
    need(c.theorem_taps >= 1, "theorem_taps: must be positive");
    need(c.theorem_scatterers >= 0, "theorem_scatterers: must be nonnegative");
    need(c.theorem_code_length >= 1, "theorem_code_length: must be positive");
    need(c.theorem_N - c.theorem_code_length - c.theorem_taps + 1 >= 1,
         "theorem_N: packet too short for theorem_code_length + theorem_taps");
    need(std::isfinite(c.theorem_cnr_db) && std::isfinite(c.theorem_snr_db),
         "theorem_cnr_db/theorem_snr_db: must be finite");
    need(ascending_positive(c.theorem_M_list), "theorem_M_list: need a nonempty, strictly ascending list");
    need(c.theorem_seeds >= 1, "theorem_seeds: must be positive");
    need(c.appendix_trials >= 1, "appendix_trials: must be positive");
    need(c.appendix_tolerance > 0.0, "appendix_tolerance: must be positive");
    return e;
}

nlohmann::json config_to_json(const SystemConfig &cfg)
{
    nlohmann::json j = nlohmann::json::object();
    visit_fields(cfg, [&](const char *key, const auto &value) { j[key] = value; });
    return j;
}

std::vector<std::string> config_keys()
{
    std::vector<std::string> keys;
    SystemConfig c;
    visit_fields(c, [&](const char *key, const auto &) { keys.emplace_back(key); });
    return keys;
}

SystemConfig config_from_json(const nlohmann::json &j)
{
    if (j.is_null())
        return full_profile();
    if (!j.is_object())
        throw ConfigError("config: top level must be an object");
    std::vector<std::string> err;
    SystemConfig cfg = full_profile();
    if (j.contains("profile"))
    {
        std::string p;
        read_value(j.at("profile"), "profile", p, err);
        if (p == "desk")
            cfg = desk_profile();
        else if (!p.empty() && p != "full")
            err.push_back("config key 'profile': expected 'full' or 'desk', got '" + p + "'");
    }
    for (auto it = j.begin(); it != j.end(); ++it)
    {
        const std::string &key = it.key();
        if (key == "profile")
            continue;
        bool found = false;
        visit_fields(cfg, [&](const char *name, auto &field) {
            if (key == name)
            {
                found = true;
                read_value(it.value(), key, field, err);
            }
        });
        if (!found)
            err.push_back("unknown config key '" + key + "'");
    }
    if (!err.empty())
        throw ConfigError(join_errors(err));
    const auto bad = validate_config(cfg);
    if (!bad.empty())
        throw ConfigError(join_errors(bad));
    return cfg;
}

SystemConfig load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        return full_profile();
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(text);
    }
    catch (const nlohmann::json::exception &e)
    {
        throw ConfigError("config: " + path + ": " + e.what());
    }
    return config_from_json(j);
}

void save_config(const SystemConfig &cfg, const std::string &path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("config: cannot write " + path);
    out << config_to_json(cfg).dump(2) << "\n";
}

std::string config_hash(const SystemConfig &cfg)
{
    const std::string text = config_to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text)
    {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

nlohmann::json parse_override(const std::string &key, const std::string &text)
{
    const nlohmann::json defaults = config_to_json(SystemConfig{});
    if (!defaults.contains(key))
        throw ConfigError("unknown config key '" + key + "'");
    const auto &proto = defaults.at(key);
    if (proto.is_string())
        return text;
    if (proto.is_array())
    {
        if (!text.empty() && text.front() == '[')
            return nlohmann::json::parse(text, nullptr, false);
        nlohmann::json arr = nlohmann::json::array();
        std::stringstream ss(text);
        std::string item;
        const bool strings = !proto.empty() && proto.front().is_string();
        while (std::getline(ss, item, ','))
        {
            if (item.empty())
                continue;
            if (strings)
                arr.push_back(item);
            else
                arr.push_back(nlohmann::json::parse(item, nullptr, false));
        }
        return arr;
    }
    auto v = nlohmann::json::parse(text, nullptr, false);
    if (v.is_discarded())
        throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
    return v;
}

} // namespace coexist
