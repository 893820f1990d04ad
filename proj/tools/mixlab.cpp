// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command line front end. Exit codes: 0 ok, 1 usage, 2 bad config, 3 runtime failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mixlab/experiment.hpp"

namespace {

struct Overrides {
    std::string config;
    std::string out;
    std::string algorithm;
    std::vector<std::uint64_t> seeds;
    std::size_t jobs = 0;
    bool jobs_set = false;
};

void add_common(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--config", o.config, "JSON experiment config");
    cmd->add_option("--out", o.out, "output root directory");
    cmd->add_option("--seeds", o.seeds, "training seeds");
    cmd->add_option("--algorithm", o.algorithm, "none, powmix, multimix or manifold");
    cmd->add_option("--jobs", o.jobs, "worker threads (0 = all cores)")->each([&](std::string const&) {
        o.jobs_set = true;
    });
}

auto resolve(Overrides const& o) -> mixlab::ExperimentConfig
{
    mixlab::ExperimentConfig c = o.config.empty() ? mixlab::parse_config_text("") : mixlab::load_config(o.config);
    if (!o.out.empty()) {
        c.output_dir = o.out;
    }
    if (!o.seeds.empty()) {
        c.seeds = o.seeds;
    }
    if (!o.algorithm.empty()) {
        try {
            c.train.algorithm = mixlab::parse_algorithm(o.algorithm);
        } catch (mixlab::ParameterError const& e) {
            throw mixlab::ConfigError(std::string("--algorithm: ") + e.what());
        }
    }
    if (o.jobs_set) {
        c.jobs = o.jobs;
    }
    return c;
}

auto parse_ranges(std::vector<std::string> const& specs) -> std::vector<std::pair<double, double>>
{
    std::vector<std::pair<double, double>> out;
    for (auto const& s : specs) {
        auto colon = s.find(':');
        if (colon == std::string::npos) {
            throw mixlab::ConfigError("--p-ranges: expected lo:hi, got '" + s + "'");
        }
        try {
            out.emplace_back(std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1)));
        } catch (std::exception const&) {
            throw mixlab::ConfigError("--p-ranges: bad number in '" + s + "'");
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"mixlab: multimodal mixing experiments on synthetic data"};
    app.require_subcommand(1);
    Overrides o;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset CSV");
    std::string gen_out;
    bool create_dirs = false;
    gen->add_option("--config", o.config, "JSON experiment config");
    gen->add_option("--out", gen_out, "dataset CSV path")->required();
    gen->add_flag("--create-dirs", create_dirs, "create missing parent directories");
    std::uint64_t data_seed = 0;
    bool data_seed_set = false;
    gen->add_option("--seed", data_seed, "data seed")->each([&](std::string const&) { data_seed_set = true; });

    auto* train = app.add_subcommand("train", "train and evaluate over seeds");
    add_common(train, o);
    auto* ablate = app.add_subcommand("ablate", "PowMix component ablations");
    add_common(ablate, o);
    std::vector<std::string> p_ranges;
    ablate->add_option("--p-ranges", p_ranges, "extra sub-grid over the mask range, e.g. 2:4,4:6")->delimiter(',');
    auto* robust = app.add_subcommand("robustness", "random feature-drop robustness curves");
    add_common(robust, o);
    auto* dom = app.add_subcommand("dominance", "text-modality corruption curves");
    add_common(dom, o);
    auto* limited = app.add_subcommand("limited", "limited-data sweep against the baseline");
    add_common(limited, o);
    auto* sweep = app.add_subcommand("nO-sweep", "sweep the mixed batch size");
    add_common(sweep, o);
    auto* probe = app.add_subcommand("probe", "linear probes on frozen encoders");
    add_common(probe, o);

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        mixlab::ExperimentConfig cfg = resolve(o);
        if (gen->parsed()) {
            if (data_seed_set) {
                cfg.data.seed = data_seed;
            }
            auto s = mixlab::cmd_gen_data(cfg, gen_out, create_dirs);
            std::cout << "N=" << s.n << " dims=";
            for (std::size_t m = 0; m < s.dims.size(); ++m) {
                std::cout << (m ? "," : "") << s.dims[m];
            }
            std::cout << " train=" << s.train << " val=" << s.val << " test=" << s.test << "\n";
            return 0;
        }
        std::filesystem::path dir;
        if (train->parsed()) {
            dir = mixlab::cmd_train(cfg);
        } else if (ablate->parsed()) {
            if (!p_ranges.empty()) {
                cfg.eval.p_ranges = parse_ranges(p_ranges);
            }
            dir = mixlab::cmd_ablate(cfg, !p_ranges.empty());
        } else if (robust->parsed()) {
            dir = mixlab::cmd_robustness(cfg);
        } else if (dom->parsed()) {
            dir = mixlab::cmd_dominance(cfg);
        } else if (limited->parsed()) {
            dir = mixlab::cmd_limited(cfg);
        } else if (sweep->parsed()) {
            dir = mixlab::cmd_n_out_sweep(cfg);
        } else if (probe->parsed()) {
            dir = mixlab::cmd_probe(cfg);
        }
        std::cout << dir.string() << "\n";
        return 0;
    } catch (mixlab::ConfigError const& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (mixlab::ParameterError const& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
