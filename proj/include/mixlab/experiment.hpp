// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration, content hashing, result files and the protocol
// runners behind the `mixlab` command line tool.
//
// Output layout: <output_dir>/<command>/<config-hash>/ holding
// config.resolved, results.csv, results.jsonl and any checkpoints/logs.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mixlab/evaluation.hpp"
#include "mixlab/training.hpp"

namespace mixlab {

/// Invalid or unknown configuration keys (exit code 2 at the CLI).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

struct EvalConfig {
    Vector noise_grid = default_noise_grid();
    std::size_t noise_runs = 15;
    std::size_t probe_runs = 3;
    Vector fractions = default_fractions();
    std::vector<std::size_t> n_out_grid{16, 32, 64, 128, 256, 512, 1024, 2048};
    std::vector<std::pair<double, double>> p_ranges{{2, 4}, {4, 6}, {6, 8}, {2, 8}, {2, 16}};
};

struct ExperimentConfig {
    DataGenConfig data;
    std::string data_path;                // load this CSV instead of generating
    std::optional<std::size_t> train_size; // keep only this many train examples
    TrainConfig train;
    EvalConfig eval;
    std::string output_dir = "results";
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::size_t jobs = 0; // 0: one per hardware thread
};

namespace detail {

/// Reads keys out of one JSON object and rejects any it did not consume.
class Section {
public:
    Section(Json const& obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object()) {
            throw ConfigError(where() + ": expected an object");
        }
    }

    template <typename T>
    void get(std::string const& key, T& out)
    {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) {
            return;
        }
        try {
            out = it->template get<T>();
        } catch (nlohmann::json::exception const& e) {
            throw ConfigError(where(key) + ": " + e.what());
        }
    }

    auto sub(std::string const& key) -> std::optional<Section>
    {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) {
            return std::nullopt;
        }
        return Section(*it, path_.empty() ? key : path_ + "." + key);
    }

    void finish() const
    {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!seen_.contains(it.key())) {
                throw ConfigError(where(it.key()) + ": unknown key");
            }
        }
    }

    [[nodiscard]] auto where(std::string const& key = {}) const -> std::string
    {
        std::string p = path_;
        if (!key.empty()) {
            p += (p.empty() ? "" : ".") + key;
        }
        return p.empty() ? "config" : p;
    }

private:
    Json const& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename T>
void require(bool ok, Section const& s, std::string const& key, T const& msg)
{
    if (!ok) {
        throw ConfigError(s.where(key) + ": " + msg);
    }
}

} // namespace detail

inline auto parse_config(Json const& j) -> ExperimentConfig
{
    ExperimentConfig c;
    detail::Section root(j, "");
    if (auto s = root.sub("data")) {
        s->get("path", c.data_path);
        s->get("n_examples", c.data.n_examples);
        s->get("dims", c.data.dims);
        s->get("informativeness", c.data.informativeness);
        std::vector<double> range{c.data.label_lo, c.data.label_hi};
        s->get("label_range", range);
        detail::require(range.size() == 2, *s, "label_range", "expected [lo, hi]");
        c.data.label_lo = range[0];
        c.data.label_hi = range[1];
        s->get("label_noise", c.data.label_noise);
        s->get("seed", c.data.seed);
        std::size_t train_size = 0;
        s->get("train_size", train_size);
        if (train_size > 0) {
            c.train_size = train_size;
        }
        s->finish();
    }
    if (auto s = root.sub("model")) {
        std::string fusion{to_string(c.train.model.mode)};
        s->get("fusion", fusion);
        try {
            c.train.model.mode = parse_fusion_mode(fusion);
        } catch (ParameterError const& e) {
            throw ConfigError(s->where("fusion") + ": " + e.what());
        }
        s->get("hidden", c.train.model.hidden);
        s->get("embed", c.train.model.embed);
        s->get("fusion_hidden", c.train.model.fusion_hidden);
        s->get("cross", c.train.model.cross);
        s->finish();
    }
    if (auto s = root.sub("train")) {
        s->get("epochs", c.train.epochs);
        s->get("batch_size", c.train.batch_size);
        s->get("patience", c.train.patience);
        std::string opt = c.train.optimizer.kind == OptimizerKind::adam ? "adam" : "sgd";
        s->get("optimizer", opt);
        detail::require(opt == "adam" || opt == "sgd", *s, "optimizer", "expected 'adam' or 'sgd'");
        c.train.optimizer.kind = opt == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
        s->get("learning_rate", c.train.optimizer.learning_rate);
        s->get("beta1", c.train.optimizer.beta1);
        s->get("beta2", c.train.optimizer.beta2);
        s->get("epsilon", c.train.optimizer.epsilon);
        std::string algo{to_string(c.train.algorithm)};
        s->get("algorithm", algo);
        try {
            c.train.algorithm = parse_algorithm(algo);
        } catch (ParameterError const& e) {
            throw ConfigError(s->where("algorithm") + ": " + e.what());
        }
        s->get("add_clean_loss", c.train.add_clean_loss);
        s->finish();
    }
    if (auto s = root.sub("mix")) {
        auto& m = c.train.mix;
        s->get("n_out", m.n_out);
        s->get("p_mix", m.p_mix);
        std::vector<double> alpha{m.alpha_lo, m.alpha_hi};
        s->get("alpha_range", alpha);
        detail::require(alpha.size() == 2, *s, "alpha_range", "expected [lo, hi]");
        m.alpha_lo = alpha[0];
        m.alpha_hi = alpha[1];
        std::vector<double> p{m.p_lo, m.p_hi};
        s->get("p_range", p);
        detail::require(p.size() == 2, *s, "p_range", "expected [lo, hi]");
        m.p_lo = p[0];
        m.p_hi = p[1];
        s->get("anisotropic", m.anisotropic);
        s->get("reweight", m.reweight);
        s->get("mask_share", m.mask_share);
        s->get("dynamic_mix", m.dynamic_mix);
        s->get("warmup_epochs", m.warmup_epochs);
        s->get("manifold_alpha", m.manifold_alpha);
        s->finish();
    }
    if (auto s = root.sub("eval")) {
        auto& e = c.eval;
        s->get("noise_grid", e.noise_grid);
        s->get("noise_runs", e.noise_runs);
        s->get("probe_runs", e.probe_runs);
        s->get("fractions", e.fractions);
        s->get("n_out_grid", e.n_out_grid);
        std::vector<std::vector<double>> ranges;
        for (auto const& [lo, hi] : e.p_ranges) {
            ranges.push_back({lo, hi});
        }
        s->get("p_ranges", ranges);
        e.p_ranges.clear();
        for (auto const& r : ranges) {
            detail::require(r.size() == 2, *s, "p_ranges", "each range must be [lo, hi]");
            e.p_ranges.emplace_back(r[0], r[1]);
        }
        s->get("exclude_zero_predictions", c.train.metrics.exclude_zero_predictions);
        s->get("weighted_f1", c.train.metrics.weighted_f1);
        s->finish();
    }
    root.get("output_dir", c.output_dir);
    root.get("seeds", c.seeds);
    root.get("jobs", c.jobs);
    root.finish();

    try {
        c.data.validate();
        c.train.validate();
    } catch (ParameterError const& e) {
        throw ConfigError(e.what());
    }
    if (c.seeds.empty()) {
        throw ConfigError("seeds: at least one seed is required");
    }
    for (double p : c.eval.noise_grid) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ConfigError("eval.noise_grid: intensities must lie in [0, 1]");
        }
    }
    for (double f : c.eval.fractions) {
        if (!(f > 0.0 && f <= 1.0)) {
            throw ConfigError("eval.fractions: fractions must lie in (0, 1]");
        }
    }
    if (c.eval.noise_runs == 0 || c.eval.probe_runs == 0) {
        throw ConfigError("eval: run counts must be positive");
    }
    return c;
}

inline auto parse_config_text(std::string const& text) -> ExperimentConfig
{
    Json j;
    try {
        j = text.empty() ? Json::object() : Json::parse(text);
    } catch (nlohmann::json::parse_error const& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

inline auto load_config(std::string const& path) -> ExperimentConfig
{
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot read config file '" + path + "'");
    }
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

/// Fully resolved configuration, defaults included.
inline auto to_json(ExperimentConfig const& c) -> Json
{
    auto const& t = c.train;
    auto const& m = t.mix;
    Json ranges = Json::array();
    for (auto const& [lo, hi] : c.eval.p_ranges) {
        ranges.push_back({lo, hi});
    }
    Json j;
    j["data"] = {{"path", c.data_path},
                 {"n_examples", c.data.n_examples},
                 {"dims", c.data.dims},
                 {"informativeness", c.data.informativeness},
                 {"label_range", {c.data.label_lo, c.data.label_hi}},
                 {"label_noise", c.data.label_noise},
                 {"seed", c.data.seed},
                 {"train_size", c.train_size.value_or(0)}};
    j["model"] = {{"fusion", to_string(t.model.mode)},
                  {"hidden", t.model.hidden},
                  {"embed", t.model.embed},
                  {"fusion_hidden", t.model.fusion_hidden},
                  {"cross", t.model.cross}};
    j["train"] = {{"epochs", t.epochs},
                  {"batch_size", t.batch_size},
                  {"patience", t.patience},
                  {"optimizer", t.optimizer.kind == OptimizerKind::adam ? "adam" : "sgd"},
                  {"learning_rate", t.optimizer.learning_rate},
                  {"beta1", t.optimizer.beta1},
                  {"beta2", t.optimizer.beta2},
                  {"epsilon", t.optimizer.epsilon},
                  {"algorithm", to_string(t.algorithm)},
                  {"add_clean_loss", t.add_clean_loss}};
    j["mix"] = {{"n_out", m.n_out},
                {"p_mix", m.p_mix},
                {"alpha_range", {m.alpha_lo, m.alpha_hi}},
                {"p_range", {m.p_lo, m.p_hi}},
                {"anisotropic", m.anisotropic},
                {"reweight", m.reweight},
                {"mask_share", m.mask_share},
                {"dynamic_mix", m.dynamic_mix},
                {"warmup_epochs", m.warmup_epochs},
                {"manifold_alpha", m.manifold_alpha}};
    j["eval"] = {{"noise_grid", c.eval.noise_grid},
                 {"noise_runs", c.eval.noise_runs},
                 {"probe_runs", c.eval.probe_runs},
                 {"fractions", c.eval.fractions},
                 {"n_out_grid", c.eval.n_out_grid},
                 {"p_ranges", ranges},
                 {"exclude_zero_predictions", c.train.metrics.exclude_zero_predictions},
                 {"weighted_f1", c.train.metrics.weighted_f1}};
    j["output_dir"] = c.output_dir;
    j["seeds"] = c.seeds;
    j["jobs"] = c.jobs;
    return j;
}

/// Content hash of everything that affects results. Objects serialize with
/// sorted keys, so key order in the input file does not matter; output_dir
/// and jobs are excluded.
inline auto experiment_hash(Json resolved, std::string_view command = {}) -> std::string
{
    resolved.erase("output_dir");
    resolved.erase("jobs");
    if (!command.empty()) {
        resolved["command"] = command;
    }
    return hex64(detail::fnv1a64(resolved.dump()));
}

inline auto experiment_hash(ExperimentConfig const& c, std::string_view command = {}) -> std::string
{
    return experiment_hash(to_json(c), command);
}

/// Worker count honoring MIXLAB_DETERMINISTIC=1.
inline auto effective_jobs(std::size_t requested) -> std::size_t
{
    if (char const* env = std::getenv("MIXLAB_DETERMINISTIC"); env != nullptr && std::string_view(env) == "1") {
        return 1;
    }
    if (requested == 0) {
        return std::max(1U, std::thread::hardware_concurrency());
    }
    return requested;
}

/// The dataset an experiment runs on; input files are only read.
inline auto experiment_dataset(ExperimentConfig const& c) -> Dataset
{
    Dataset ds = c.data_path.empty() ? generate(c.data) : load_dataset(c.data_path);
    ds.validate();
    if (c.train_size) {
        ds = subsample_train_count(ds, *c.train_size, c.data.seed);
    }
    return ds;
}

/// Model shape with input widths taken from the dataset.
inline auto train_config_for(ExperimentConfig const& c, Dataset const& ds) -> TrainConfig
{
    TrainConfig t = c.train;
    t.model.input_dims.clear();
    for (auto const& f : ds.features) {
        t.model.input_dims.push_back(f.cols());
    }
    return t;
}

namespace detail {

inline auto csv_number(double v) -> std::string { return std::isfinite(v) ? format_double(v) : "NA"; }

/// CSV files report accuracies and F1 as percentages.
inline auto display_scale(std::string_view metric) -> double
{
    return metric == "acc2" || metric == "f1" || metric == "acc5" || metric == "acc7" ? 100.0 : 1.0;
}

inline auto csv_metric(std::string_view metric, double v) -> std::string { return csv_number(v * display_scale(metric)); }

inline auto metrics_json(MetricReport const& r) -> Json
{
    Json j = {{"mae", r.mae},       {"acc2", r.acc2},          {"f1", r.f1},
              {"acc5", r.acc5},     {"acc7", r.acc7},          {"binary_count", r.binary_count},
              {"excluded_count", r.excluded_count}};
    j["corr"] = r.corr ? Json(*r.corr) : Json(nullptr);
    return j;
}

inline auto metric_csv_cells(MetricReport const& r) -> std::string
{
    std::string out;
    for (auto name : kMetricNames) {
        out += "," + csv_metric(name, metric_value(r, name));
    }
    return out;
}

inline auto metric_csv_header() -> std::string
{
    std::string out;
    for (auto name : kMetricNames) {
        out += "," + std::string(name);
    }
    return out;
}

} // namespace detail

/// Collects rows in memory and writes the run directory in one place.
class RunWriter {
public:
    RunWriter(ExperimentConfig const& cfg, std::string command)
        : command_(std::move(command)), resolved_(to_json(cfg)), hash_(experiment_hash(resolved_, command_)),
          dir_(std::filesystem::path(cfg.output_dir) / command_ / hash_)
    {
        std::filesystem::create_directories(dir_);
    }

    [[nodiscard]] auto hash() const -> std::string const& { return hash_; }
    [[nodiscard]] auto dir() const -> std::filesystem::path const& { return dir_; }

    void csv_header(std::string line) { csv_ = std::move(line) + "\n"; }
    void csv_row(std::string const& line) { csv_ += line + "\n"; }
    void record(Json rec)
    {
        rec["command"] = command_;
        rec["config_hash"] = hash_;
        jsonl_ += rec.dump() + "\n";
    }

    void write_text(std::string const& name, std::string const& text) const
    {
        std::ofstream os(dir_ / name, std::ios::binary);
        os << text;
        if (!os) {
            throw std::runtime_error("failed writing " + (dir_ / name).string());
        }
    }

    void finish() const
    {
        write_text("config.resolved", resolved_.dump(2) + "\n");
        write_text("results.csv", csv_);
        write_text("results.jsonl", jsonl_);
    }

private:
    std::string command_;
    Json resolved_;
    std::string hash_;
    std::filesystem::path dir_;
    std::string csv_;
    std::string jsonl_;
};

// ---------------------------------------------------------------------------
// Commands. Each returns the run directory; errors propagate as exceptions.
// ---------------------------------------------------------------------------

struct GenDataSummary {
    std::size_t n = 0;
    std::vector<std::size_t> dims;
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

inline auto cmd_gen_data(ExperimentConfig const& cfg, std::filesystem::path const& out, bool create_dirs)
    -> GenDataSummary
{
    if (out.has_parent_path() && !std::filesystem::exists(out.parent_path())) {
        if (!create_dirs) {
            throw ConfigError("output directory '" + out.parent_path().string() +
                              "' does not exist (pass --create-dirs to create it)");
        }
        std::filesystem::create_directories(out.parent_path());
    }
    Dataset ds = generate(cfg.data);
    save_dataset(ds, out.string());
    GenDataSummary s;
    s.n = ds.size();
    for (auto const& f : ds.features) {
        s.dims.push_back(f.cols());
    }
    s.train = ds.indices(Split::train).size();
    s.val = ds.indices(Split::val).size();
    s.test = ds.indices(Split::test).size();
    return s;
}

inline void write_seed_aggregate_rows(RunWriter& w, std::string const& prefix, SeedAggregate const& agg)
{
    for (auto const& run : agg.runs) {
        w.csv_row(prefix + std::to_string(run.seed) + "," + std::to_string(run.result.best_epoch) + "," +
                  detail::csv_number(run.result.best_val_mae) + detail::metric_csv_cells(run.test));
    }
    std::string mean_row = prefix + "mean,," + detail::csv_number(agg.best_val_mae.mean);
    std::string std_row = prefix + "std,," + detail::csv_number(agg.best_val_mae.std);
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        mean_row += "," + detail::csv_metric(kMetricNames[k], agg.test[k].mean);
        std_row += "," + detail::csv_metric(kMetricNames[k], agg.test[k].std);
    }
    w.csv_row(mean_row);
    w.csv_row(std_row);
}

inline auto cmd_train(ExperimentConfig const& cfg) -> std::filesystem::path
{
    Dataset const ds = experiment_dataset(cfg);
    TrainConfig const tc = train_config_for(cfg, ds);
    RunWriter w(cfg, "train");
    auto agg = run_seeds(ds, tc, cfg.seeds, effective_jobs(cfg.jobs));

    w.csv_header("algorithm,seed,best_epoch,val_mae" + detail::metric_csv_header());
    write_seed_aggregate_rows(w, std::string(to_string(tc.algorithm)) + ",", agg);

    std::string log;
    for (auto const& run : agg.runs) {
        TrainConfig seeded = tc;
        seeded.seed = run.seed;
        std::string const run_hash = config_hash(seeded);
        for (auto const& e : run.result.epochs) {
            Json rec = {{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"val", detail::metrics_json(e.val)},
                        {"mixing_steps", e.mixing_steps},
                        {"seed", run.seed},
                        {"config_hash", run_hash}};
            log += rec.dump() + "\n";
        }
        std::string const ckpt = "checkpoint.seed" + std::to_string(run.seed) + ".txt";
        std::ostringstream os;
        write_checkpoint(run.result.best_params, os);
        w.write_text(ckpt, os.str());
        w.record({{"seed", run.seed},
                  {"algorithm", to_string(tc.algorithm)},
                  {"metrics", detail::metrics_json(run.test)},
                  {"best_epoch", run.result.best_epoch},
                  {"total_steps", run.result.total_steps},
                  {"mixing_steps", run.result.mixing_steps},
                  {"wall_seconds", run.result.wall_seconds},
                  {"artifacts", {ckpt, "train_log.jsonl"}}});
    }
    Json mean = Json::object();
    Json stdev = Json::object();
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        mean[std::string(kMetricNames[k])] = agg.test[k].mean;
        stdev[std::string(kMetricNames[k])] = agg.test[k].std;
    }
    w.record({{"seed", "aggregate"}, {"algorithm", to_string(tc.algorithm)}, {"mean", mean}, {"std", stdev}});
    w.write_text("train_log.jsonl", log);
    w.finish();
    return w.dir();
}

struct AblationVariant {
    std::string name;
    bool anisotropic;
    bool reweight;
    bool mask_share;
    bool dynamic_mix;
};

/// Full PowMix and the four ablated configurations.
inline auto ablation_variants() -> std::vector<AblationVariant>
{
    return {{"full", true, true, true, true},
            {"-aniso", false, true, true, true},
            {"-reweight", true, false, true, true},
            {"-mask_share", true, true, false, true},
            {"-dynamic_mix", true, true, false, false}};
}

inline auto cmd_ablate(ExperimentConfig const& cfg, bool with_p_ranges) -> std::filesystem::path
{
    Dataset const ds = experiment_dataset(cfg);
    TrainConfig base = train_config_for(cfg, ds);
    base.algorithm = MixAlgorithm::powmix;
    std::size_t const jobs = effective_jobs(cfg.jobs);
    RunWriter w(cfg, "ablate");

    auto summary_cells = [](SeedAggregate const& agg) {
        std::string out;
        for (auto name : {"acc2", "acc5", "mae"}) {
            auto k = static_cast<std::size_t>(
                std::find(kMetricNames.begin(), kMetricNames.end(), std::string_view(name)) - kMetricNames.begin());
            out += "," + detail::csv_metric(name, agg.test[k].mean) + "," + detail::csv_metric(name, agg.test[k].std);
        }
        return out;
    };

    w.csv_header("variant,anisotropic,reweight,mask_share,dynamic_mix,toggles,config_hash,acc2_mean,acc2_std,"
                 "acc5_mean,acc5_std,mae_mean,mae_std");
    for (auto const& v : ablation_variants()) {
        TrainConfig tc = base;
        tc.mix.anisotropic = v.anisotropic;
        tc.mix.reweight = v.reweight;
        tc.mix.mask_share = v.mask_share;
        tc.mix.dynamic_mix = v.dynamic_mix;
        auto agg = run_seeds(ds, tc, cfg.seeds, jobs);
        std::string const hash = config_hash(tc);
        w.csv_row(v.name + "," + std::to_string(int(v.anisotropic)) + "," + std::to_string(int(v.reweight)) + "," +
                  std::to_string(int(v.mask_share)) + "," + std::to_string(int(v.dynamic_mix)) + "," +
                  std::to_string(tc.mix.toggle_bits()) + "," + hash + summary_cells(agg));
        for (auto const& run : agg.runs) {
            w.record({{"variant", v.name},
                      {"toggles", tc.mix.toggle_bits()},
                      {"variant_hash", hash},
                      {"seed", run.seed},
                      {"metrics", detail::metrics_json(run.test)},
                      {"wall_seconds", run.result.wall_seconds}});
        }
    }

    if (with_p_ranges) {
        std::string csv = "p_range,config_hash,acc2_mean,acc2_std,acc5_mean,acc5_std,mae_mean,mae_std\n";
        for (auto const& [lo, hi] : cfg.eval.p_ranges) {
            TrainConfig tc = base;
            tc.mix.p_lo = lo;
            tc.mix.p_hi = hi;
            auto agg = run_seeds(ds, tc, cfg.seeds, jobs);
            csv += detail::csv_number(lo) + ":" + detail::csv_number(hi) + "," + config_hash(tc) + summary_cells(agg) +
                   "\n";
        }
        w.write_text("p_ranges.csv", csv);
    }
    w.finish();
    return w.dir();
}

/// Trains the no-mixing baseline and, if configured, the mixing model, and
/// evaluates each checkpoint under the given noise kinds.
inline auto run_noise_protocol(ExperimentConfig const& cfg, std::string const& command,
                               std::vector<NoiseKind> const& kinds) -> std::filesystem::path
{
    Dataset const ds = experiment_dataset(cfg);
    TrainConfig const tc = train_config_for(cfg, ds);
    std::size_t const jobs = effective_jobs(cfg.jobs);
    RunWriter w(cfg, command);

    std::string kind_label;
    for (auto k : kinds) {
        kind_label += (kind_label.empty() ? "" : "+") + std::string(to_string(k));
    }
    std::vector<MixAlgorithm> algorithms{MixAlgorithm::none};
    if (tc.algorithm != MixAlgorithm::none) {
        algorithms.push_back(tc.algorithm);
    }
    Vector grid{0.0};
    for (double p : cfg.eval.noise_grid) {
        if (p != 0.0) {
            grid.push_back(p);
        }
    }

    w.csv_header("algorithm,seed,noise,p" + detail::metric_csv_header());
    std::string trend = "algorithm,seed,spearman_p_f1\n";
    for (auto algo : algorithms) {
        TrainConfig t = tc;
        t.algorithm = algo;
        auto agg = run_seeds(ds, t, cfg.seeds, jobs);
        for (auto const& run : agg.runs) {
            auto rows = robustness_curve(run.result.best_params, ds, kinds, grid, cfg.eval.noise_runs, run.seed, jobs,
                                         tc.metrics);
            Vector ps;
            Vector f1s;
            for (auto const& row : rows) {
                w.csv_row(std::string(to_string(algo)) + "," + std::to_string(run.seed) + "," + kind_label + "," +
                          detail::csv_number(row.p) + detail::metric_csv_cells(row.metrics));
                w.record({{"algorithm", to_string(algo)},
                          {"seed", run.seed},
                          {"noise", kind_label},
                          {"p", row.p},
                          {"runs", cfg.eval.noise_runs},
                          {"metrics", detail::metrics_json(row.metrics)}});
                if (row.p > 0.0) {
                    ps.push_back(row.p);
                    f1s.push_back(row.metrics.f1);
                }
            }
            auto rho = spearman_correlation(ps, f1s);
            trend += std::string(to_string(algo)) + "," + std::to_string(run.seed) + "," +
                     detail::csv_number(rho.value_or(std::numeric_limits<double>::quiet_NaN())) + "\n";
        }
    }
    w.write_text("trend.csv", trend);
    w.finish();
    return w.dir();
}

inline auto cmd_robustness(ExperimentConfig const& cfg) -> std::filesystem::path
{
    return run_noise_protocol(cfg, "robustness",
                              {NoiseKind::feature_drop_aligned, NoiseKind::feature_drop_independent});
}

inline auto cmd_dominance(ExperimentConfig const& cfg) -> std::filesystem::path
{
    return run_noise_protocol(cfg, "dominance", {NoiseKind::text_drop, NoiseKind::text_mean_replace});
}

inline auto cmd_limited(ExperimentConfig const& cfg) -> std::filesystem::path
{
    Dataset const ds = experiment_dataset(cfg);
    TrainConfig tc = train_config_for(cfg, ds);
    if (tc.algorithm == MixAlgorithm::none) {
        tc.algorithm = MixAlgorithm::powmix;
    }
    RunWriter w(cfg, "limited");
    auto rows = limited_data_sweep(ds, tc, cfg.eval.fractions, cfg.seeds, cfg.data.seed, effective_jobs(cfg.jobs));
    w.csv_header("fraction,train_size,metric,baseline_mean,baseline_std,mixed_mean,mixed_std,gap_mean,gap_std");
    for (auto const& row : rows) {
        for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
            auto const name = kMetricNames[k];
            w.csv_row(detail::csv_number(row.fraction) + "," + std::to_string(row.train_size) + "," +
                      std::string(name) + "," + detail::csv_metric(name, row.baseline.test[k].mean) + "," +
                      detail::csv_metric(name, row.baseline.test[k].std) + "," +
                      detail::csv_metric(name, row.mixed.test[k].mean) + "," +
                      detail::csv_metric(name, row.mixed.test[k].std) + "," + detail::csv_metric(name, row.gap[k].mean) +
                      "," + detail::csv_metric(name, row.gap[k].std));
        }
        for (std::size_t i = 0; i < row.mixed.runs.size(); ++i) {
            w.record({{"fraction", row.fraction},
                      {"train_size", row.train_size},
                      {"seed", row.mixed.runs[i].seed},
                      {"algorithm", to_string(tc.algorithm)},
                      {"baseline", detail::metrics_json(row.baseline.runs[i].test)},
                      {"mixed", detail::metrics_json(row.mixed.runs[i].test)}});
        }
    }
    w.finish();
    return w.dir();
}

inline auto cmd_n_out_sweep(ExperimentConfig const& cfg) -> std::filesystem::path
{
    Dataset const ds = experiment_dataset(cfg);
    TrainConfig tc = train_config_for(cfg, ds);
    if (tc.algorithm == MixAlgorithm::none) {
        tc.algorithm = MixAlgorithm::powmix;
    }
    std::size_t const jobs = effective_jobs(cfg.jobs);
    RunWriter w(cfg, "nO-sweep");

    std::string header = "algorithm,n_O";
    for (auto name : kMetricNames) {
        header += "," + std::string(name) + "_mean," + std::string(name) + "_std";
    }
    w.csv_header(header);
    auto emit = [&](std::string const& algo, std::string const& n_out, SeedAggregate const& agg) {
        std::string line = algo + "," + n_out;
        for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
            line += "," + detail::csv_metric(kMetricNames[k], agg.test[k].mean) + "," +
                    detail::csv_metric(kMetricNames[k], agg.test[k].std);
        }
        w.csv_row(line);
        for (auto const& run : agg.runs) {
            w.record({{"algorithm", algo}, {"n_O", n_out}, {"seed", run.seed}, {"metrics", detail::metrics_json(run.test)}});
        }
    };
    TrainConfig base = tc;
    base.algorithm = MixAlgorithm::none;
    emit("none", "", run_seeds(ds, base, cfg.seeds, jobs));
    for (auto n : cfg.eval.n_out_grid) {
        TrainConfig t = tc;
        t.mix.n_out = n;
        emit(std::string(to_string(t.algorithm)), std::to_string(n), run_seeds(ds, t, cfg.seeds, jobs));
    }
    w.finish();
    return w.dir();
}

inline auto cmd_probe(ExperimentConfig const& cfg) -> std::filesystem::path
{
    Dataset const ds = experiment_dataset(cfg);
    TrainConfig const tc = train_config_for(cfg, ds);
    std::size_t const jobs = effective_jobs(cfg.jobs);
    std::vector<std::uint64_t> seeds(cfg.seeds.begin(),
                                     cfg.seeds.begin() + static_cast<std::ptrdiff_t>(
                                                             std::min(cfg.seeds.size(), cfg.eval.probe_runs)));
    RunWriter w(cfg, "probe");
    w.csv_header("algorithm,head" + detail::metric_csv_header());
    std::vector<MixAlgorithm> algorithms{MixAlgorithm::none};
    if (tc.algorithm != MixAlgorithm::none) {
        algorithms.push_back(tc.algorithm);
    }
    for (auto algo : algorithms) {
        TrainConfig t = tc;
        t.algorithm = algo;
        auto rep = unimodal_evaluation(ds, t, seeds, jobs);
        for (std::size_t m = 0; m < rep.modalities.size(); ++m) {
            std::string const head = "modality" + std::to_string(m);
            w.csv_row(std::string(to_string(algo)) + "," + head + detail::metric_csv_cells(rep.modalities[m]));
            w.record({{"algorithm", to_string(algo)}, {"head", head}, {"metrics", detail::metrics_json(rep.modalities[m])}});
        }
        w.csv_row(std::string(to_string(algo)) + ",fusion" + detail::metric_csv_cells(rep.fusion));
        w.record({{"algorithm", to_string(algo)}, {"head", "fusion"}, {"metrics", detail::metrics_json(rep.fusion)}});
    }
    w.finish();
    return w.dir();
}

} // namespace mixlab
