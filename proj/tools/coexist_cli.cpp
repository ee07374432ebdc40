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

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

using namespace coexist;

namespace
{

struct Common
{
    std::string config_path;
    std::string out = "-";
    std::string format = "csv";
    std::string save_config;
    int workers = 1;
    std::map<std::string, std::string> overrides;
};

void add_common(CLI::App *sub, Common &c)
{
    sub->add_option("--config", c.config_path, "JSON config file; missing keys take the profile defaults");
    sub->add_option("--out,-o", c.out, "output path, '-' for stdout");
    sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--workers,-j", c.workers, "worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
    sub->add_option("--save-config", c.save_config, "write the resolved config here");
    for (const auto &key : config_keys())
    {
        auto *opt = sub->add_option_function<std::string>(
            "--" + key, [&c, key](const std::string &v) { c.overrides[key] = v; }, "config key " + key);
        opt->group("Config overrides");
    }
}

SystemConfig resolve(const Common &c)
{
    nlohmann::json j = nlohmann::json::object();
    if (!c.config_path.empty())
    {
        std::ifstream in(c.config_path);
        if (!in)
            throw ConfigError("config: cannot open " + c.config_path);
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        if (text.find_first_not_of(" \t\r\n") != std::string::npos)
        {
            try
            {
                j = nlohmann::json::parse(text);
            }
            catch (const nlohmann::json::exception &e)
            {
                throw ConfigError("config: " + c.config_path + ": " + e.what());
            }
            if (!j.is_object())
                throw ConfigError("config: top level must be an object");
        }
    }
    for (const auto &[key, value] : c.overrides)
        j[key] = parse_override(key, value);
    const SystemConfig cfg = config_from_json(j);
    if (!c.save_config.empty())
        save_config(cfg, c.save_config);
    return cfg;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Radar-clutter uplink massive MIMO simulator"};
    app.require_subcommand(1);
    Common common;
    auto *cnr = app.add_subcommand("sinr-vs-cnr", "mean SINR per detector and estimator over a CNR grid");
    auto *sem = app.add_subcommand("se-vs-m", "closed-form UatF spectral efficiency versus array size");
    auto *thm = app.add_subcommand("theorem1", "normalized mutual-information gap versus array size");
    auto *app_val = app.add_subcommand("validate-appendix", "closed forms against Monte Carlo; nonzero exit on failure");
    for (auto *s : {cnr, sem, thm, app_val})
        add_common(s, common);

    CLI11_PARSE(app, argc, argv);

    try
    {
        const SystemConfig cfg = resolve(common);
        const OutputFormat fmt = parse_output_format(common.format);
        if (cnr->parsed())
            emit_results(run_sinr_vs_cnr(cfg, common.workers), common.out, fmt);
        else if (sem->parsed())
            emit_results(run_se_vs_m(cfg, common.workers), common.out, fmt);
        else if (thm->parsed())
            emit_results(run_theorem1(cfg, common.workers), common.out, fmt);
        else if (app_val->parsed())
        {
            const auto rep = run_validate_appendix(cfg, common.workers);
            emit_results(rep.table, common.out, fmt);
            std::cerr << (rep.passed ? "validate-appendix: all checks passed\n"
                                     : "validate-appendix: " + std::to_string(rep.failures) + " checks failed\n");
            return rep.passed ? 0 : 1;
        }
    }
    catch (const ConfigError &e)
    {
        std::cerr << "config error:\n" << e.what() << "\n";
        return 2;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
