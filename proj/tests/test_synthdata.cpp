// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "mixlab/evaluation.hpp"
#include "mixlab/synthdata.hpp"

using namespace mixlab;

namespace {

auto roundtrip(Dataset const& ds) -> Dataset
{
    std::stringstream ss;
    write_dataset(ds, ss);
    return read_dataset(ss);
}

auto parse(std::string const& text) -> Dataset
{
    std::istringstream is(text);
    return read_dataset(is);
}

auto probe_mae(Dataset const& ds, std::size_t m, Split fit, Split score) -> double
{
    auto fit_idx = ds.indices(fit);
    auto score_idx = ds.indices(score);
    auto x_fit = gather_rows(ds.features, fit_idx)[m];
    auto x_score = gather_rows(ds.features, score_idx)[m];
    auto head = fit_ridge(x_fit, gather(ds.labels, fit_idx));
    auto pred = head.predict(x_score);
    auto y = gather(ds.labels, score_idx);
    double mae = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        mae += std::abs(pred[i] - y[i]);
    }
    return mae / static_cast<double>(y.size());
}

} // namespace

TEST_CASE("default dataset shape and split sizes")
{
    Dataset ds = generate(DataGenConfig{});
    CHECK(ds.size() == 2000);
    REQUIRE(ds.modality_count() == 3);
    CHECK(ds.features[0].cols() == 16);
    CHECK(ds.features[1].cols() == 8);
    CHECK(ds.features[2].cols() == 8);
    CHECK(ds.indices(Split::train).size() == 1400);
    CHECK(ds.indices(Split::val).size() == 200);
    CHECK(ds.indices(Split::test).size() == 400);
}

TEST_CASE("generation is deterministic and labels stay in range")
{
    DataGenConfig cfg;
    cfg.seed = 5;
    CHECK(generate(cfg) == generate(cfg));
    cfg.seed = 6;
    Dataset other = generate(cfg);
    CHECK_FALSE(other == generate(DataGenConfig{}));
    for (double y : other.labels) {
        CHECK(y >= cfg.label_lo - 5 * cfg.label_noise);
        CHECK(y <= cfg.label_hi + 5 * cfg.label_noise);
    }
    CHECK(assign_splits(100, 3) == assign_splits(100, 3));
}

TEST_CASE("noiseless modalities are linearly decodable")
{
    DataGenConfig cfg;
    cfg.n_examples = 500;
    cfg.informativeness = {1.0, 1.0, 1.0};
    cfg.label_noise = 0.0;
    Dataset ds = generate(cfg);
    for (std::size_t m = 0; m < 3; ++m) {
        CHECK(probe_mae(ds, m, Split::train, Split::train) < 0.1);
    }
}

TEST_CASE("the first modality dominates")
{
    double mae[3] = {0, 0, 0};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        DataGenConfig cfg;
        cfg.seed = seed;
        Dataset ds = generate(cfg);
        for (std::size_t m = 0; m < 3; ++m) {
            mae[m] += probe_mae(ds, m, Split::train, Split::val) / 5.0;
        }
    }
    CHECK(mae[0] < mae[1]);
    CHECK(mae[0] < mae[2]);
}

TEST_CASE("config validation")
{
    DataGenConfig cfg;
    cfg.informativeness = {0.5, 0.0, 0.5};
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = DataGenConfig{};
    cfg.dims = {16, 0, 8};
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = DataGenConfig{};
    cfg.n_examples = 0;
    CHECK_THROWS_AS(generate(cfg), ParameterError);
}

TEST_CASE("CSV round trip is exact")
{
    DataGenConfig cfg;
    cfg.n_examples = 150;
    Dataset ds = generate(cfg);
    CHECK(roundtrip(ds) == ds);

    auto path = std::filesystem::temp_directory_path() / "mixlab_roundtrip.csv";
    save_dataset(ds, path.string());
    CHECK(load_dataset(path.string()) == ds);
    std::filesystem::remove(path);

    std::stringstream ss;
    write_dataset(ds, ss);
    CHECK(ss.str().starts_with("modality_dims=16;8;8,label_range=-3;3\n"));
}

TEST_CASE("malformed files raise parse errors with context")
{
    using Catch::Matchers::ContainsSubstring;
    CHECK_THROWS_AS(parse(""), ParseError);
    CHECK_THROWS_WITH(parse("dims=1,label_range=-3;3\n"), ContainsSubstring("line 1"));
    // two declared modalities but rows hold only one feature
    CHECK_THROWS_WITH(parse("modality_dims=1;1,label_range=-3;3\n0.5,1,train\n"),
                      ContainsSubstring("line 2") && ContainsSubstring("fields"));
    CHECK_THROWS_WITH(parse("modality_dims=1,label_range=-3;3\nabc,1,train\n"),
                      ContainsSubstring("line 2, field 1"));
    CHECK_THROWS_WITH(parse("modality_dims=1,label_range=-3;3\n0.5,1,dev\n"), ContainsSubstring("split"));
    CHECK_THROWS_WITH(parse("modality_dims=1,label_range=-3;3\n0.5,1,train\n0.25,2,te"),
                      ContainsSubstring("truncated"));
    CHECK_THROWS_AS(parse("modality_dims=1,label_range=-3;3\nnan,1,train\n"), ParseError);
    CHECK(parse("modality_dims=1,label_range=-3;3\n0.5,1,train\n").size() == 1);
    CHECK_THROWS_AS(load_dataset("/nonexistent/mixlab.csv"), std::runtime_error);
}
