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

#ifndef COEXIST_HARNESS_HPP
#define COEXIST_HARNESS_HPP

#include "coexist/channel_model.hpp"
#include "coexist/metrics_se.hpp"
#include "coexist/radar_clutter.hpp"
#include "coexist/receivers.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace coexist
{

inline constexpr const char *kCodeVersion = "0.1.0";

class ConfigError : public Error
{
  public:
    using Error::Error;
};

// Every scenario knob. JSON keys equal the member names.
struct SystemConfig
{
    std::string profile = "full"; // "full" or "desk"; selects the defaults the file is applied over

    // array and users
    std::vector<int> M_list = {16, 64, 128};        // sinr-vs-cnr
    std::vector<int> se_M_list = {8, 16, 32, 64, 128}; // se-vs-m
    int K = 10;
    double spacing_ratio = 0.5; // d / lambda

    // frame
    int N = 4096;
    int C = 16;
    int T = 7;
    int N_pkt = 14;
    int N_cp = 288;
    double subcarrier_spacing_hz = 30e3;
    double Ts_s = 8.146e-9;
    double carrier_hz = 3e9;

    // radar and scatterers
    int L = 32;
    double prt_s = 1e-3;
    double radar_power_w = 1.0;
    int N_s = 100;
    int Q_c = 0; // <= 0 means N / C
    double min_range_m = 1e3;
    double max_range_m = 150e3;
    double delay_legs = 2.0;

    // powers and noise
    double data_power_w = 0.1;
    double pilot_power_w = 0.1;
    double noise_psd_dbm_hz = -174.0;
    double noise_figure_db = 3.0;

    // users' large-scale fading
    double min_distance_m = 20.0;
    double max_distance_m = 500.0;
    double shadowing_std_db = 8.0;
    double bs_height_m = 15.0;
    double ms_height_m = 1.65;
    double near_breakpoint_m = 10.0;
    double far_breakpoint_m = 50.0;
    double fixed_loss_db = -1.0; // < 0: derived from carrier and heights

    // sweeps and processing
    std::vector<double> cnr_db = {0, 10, 20, 30, 40};
    std::vector<std::string> estimators = {"perfect", "pm", "mmse"};
    std::vector<std::string> detectors = {"cm", "zf", "fzf", "lmmse", "bzf", "aezf"};
    std::string pilot_policy = "orthogonal";
    double pilot_energy = 0.0; // <= 0 means T*C
    std::string symbols = "qpsk";
    int bzf_P = 35;
    int aezf_R = 500;
    double aezf_multiplier = 2.0;
    int eval_per_block = 0; // subcarriers evaluated per coherence block and data packet; 0 = all C

    // Monte Carlo
    int trials = 1000; // drops for sinr-vs-cnr
    int drops = 500;   // drops for se-vs-m
    std::uint64_t seed = 1;

    // optional scenario files
    std::string geometry_file;
    std::string ensemble_file;
    std::string waveform_file;

    // mutual-information study
    int theorem_N = 32;
    int theorem_C = 4;
    int theorem_taps = 8;
    int theorem_scatterers = 4;
    int theorem_code_length = 8;
    double theorem_cnr_db = 30.0;
    double theorem_snr_db = 0.0;
    std::vector<int> theorem_M_list = {8, 16, 32, 64, 128, 256};
    int theorem_seeds = 20;
    bool theorem_clutter = true;
    bool allow_full_scale = false;

    // closed-form versus Monte Carlo suite
    int appendix_trials = 100000;
    double appendix_tolerance = 0.05;

    int Q() const { return N / C; }
    int clutter_taps() const { return Q_c > 0 ? Q_c : N / C; }
    FrameTiming timing() const;
    PathLossParams path_loss() const;
    EnsembleParams ensemble_params() const;
    double sigma2_w() const;
};

SystemConfig full_profile();
SystemConfig desk_profile();

// Every violated constraint, one message each.
std::vector<std::string> validate_config(const SystemConfig &cfg);

nlohmann::json config_to_json(const SystemConfig &cfg);
// Keys are applied over the defaults of the selected profile; unknown keys and
// type mismatches raise ConfigError naming the key path. Validation runs last.
SystemConfig config_from_json(const nlohmann::json &j);
SystemConfig load_config(const std::string &path);
void save_config(const SystemConfig &cfg, const std::string &path);
// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const SystemConfig &cfg);

// Converts a command-line value to JSON following the type of `key`: numbers,
// booleans and strings as written, lists as JSON arrays or comma-separated items.
nlohmann::json parse_override(const std::string &key, const std::string &text);
std::vector<std::string> config_keys();

// ---- results ----------------------------------------------------------------

using Cell = std::variant<std::int64_t, double, std::string>;

struct ExperimentResult
{
    std::string experiment;
    nlohmann::ordered_json metadata;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    int column(const std::string &name) const;
    double number(std::size_t row, const std::string &col) const;
    std::string text(std::size_t row, const std::string &col) const;
};

enum class OutputFormat
{
    Csv,
    Json
};
OutputFormat parse_output_format(const std::string &name);
std::string to_csv(const ExperimentResult &r);
std::string to_json_text(const ExperimentResult &r);
// Empty path or "-" writes to stdout.
void emit_results(const ExperimentResult &r, const std::string &path, OutputFormat format);

// ---- experiments ------------------------------------------------------------

// Mean SINR^~ per (M, CNR, estimator, detector), averaged over users, data
// packets, evaluated subcarriers and drops.
ExperimentResult run_sinr_vs_cnr(const SystemConfig &cfg, int workers = 1);
// Closed-form UatF SE per (M, CNR, estimator) for CM combining.
ExperimentResult run_se_vs_m(const SystemConfig &cfg, int workers = 1);
ExperimentResult run_theorem1(const SystemConfig &cfg, int workers = 1);

// Small instance used to check the closed forms against Monte Carlo.
struct AppendixCase
{
    Estimator estimator = Estimator::PM;
    bool clutter = true;
    PilotPolicy pilots = PilotPolicy::Orthogonal;
    int K = 1;
    int M = 8;
    std::string name() const;
};
std::vector<AppendixCase> appendix_cases();
UatfScenario appendix_scenario(const AppendixCase &c, std::uint64_t seed);

struct AppendixReport
{
    ExperimentResult table;
    bool passed = true;
    int failures = 0;
};
AppendixReport run_validate_appendix(const SystemConfig &cfg, int workers = 1);

} // namespace coexist

#endif
