#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "parcon/cli.hpp"
#include "parcon/engine.hpp"
#include "parcon/validation.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace parcon;

namespace {

SolutionSpec make_spec(ProblemKind problem, std::size_t L, std::size_t K = 1, std::uint64_t seed = 1) {
    SolutionSpec spec;
    spec.problem = problem;
    spec.partitioner.L = L;
    spec.partitioner.base_seed = seed;
    spec.K = K;
    spec.params.edges = {0, 1, 2, 3, 4, 5, 6};
    spec.params.query = {3.0};
    spec.params.k = 7;
    spec.params.mu0 = 3.0;
    return spec;
}

std::string dump(const ResultValue& r) { return result_to_json(r).dump(); }

RunReport run_with(const SolutionSpec& spec, const EmpiricalMeasure& m, EngineOptions options = {}) {
    MemorySource source(m);
    Engine engine(source, options);
    return engine.run(spec);
}

ResultValue direct(const SolutionSpec& spec, const EmpiricalMeasure& m) {
    switch (spec.problem) {
    case ProblemKind::Mean: return rho_mean(m);
    case ProblemKind::Sort: return rho_sort(m);
    case ProblemKind::Extremes: return rho_extremes(m);
    case ProblemKind::Histogram: return rho_histogram(m, spec.params.edges, 0);
    case ProblemKind::Test: return rho_test(m, spec.params.mu0, spec.params.sigma);
    case ProblemKind::Mle: return rho_mle(m, mle_settings(spec.params));
    case ProblemKind::Knn: return rho_knn(m, spec.params.query, spec.params.k);
    case ProblemKind::Outlier: return rho_outlier(m, spec.combiner.c);
    }
    return rho_mean(m);
}

}  // namespace

TEST_CASE("one part and one repetition reproduce rho on the full data") {
    const auto m = testdata::gaussian(3000, 1, 12);
    for (auto problem : {ProblemKind::Mean, ProblemKind::Extremes, ProblemKind::Histogram, ProblemKind::Test,
                         ProblemKind::Mle, ProblemKind::Knn, ProblemKind::Outlier, ProblemKind::Sort}) {
        auto spec = make_spec(problem, 1);
        if (problem == ProblemKind::Sort) {
            spec.partitioner.scheme = PartitionScheme::RangeBounded;
            spec.partitioner.bounds = {-100, 100};
        }
        const auto report = run_with(spec, m);
        INFO(to_string(problem));
        REQUIRE_FALSE(report.error);
        auto expected = direct(spec, m);
        if (problem == ProblemKind::Mle) std::get<MleResult>(expected).loglik = measure_loglik(MleSettings{}, std::get<MleResult>(expected).theta, m);
        CHECK(dump(*report.final) == dump(expected));
    }
}

TEST_CASE("partitioned mean stays within 8 ulps of a one-pass oracle") {
    const auto m = testdata::gaussian(10000, 1, 99);
    long double total = 0.0L;
    for (double x : m.rows()) total += x;
    const double oracle = static_cast<double>(total / 10000.0L);
    const auto report = run_with(make_spec(ProblemKind::Mean, 4), m);
    CHECK(testdata::ulps(std::get<MeanResult>(*report.final).mean[0], oracle) <= 8);
}

TEST_CASE("results do not depend on the worker count") {
    const auto m = testdata::gaussian(20000, 1, 5);
    for (auto problem : {ProblemKind::Test, ProblemKind::Knn, ProblemKind::Outlier, ProblemKind::Mle}) {
        const auto spec = make_spec(problem, 3, 5, 77);
        EngineOptions one;
        one.chunk_size = 10000;
        EngineOptions eight = one;
        eight.workers = 8;
        const auto a = run_with(spec, m, one);
        const auto b = run_with(spec, m, eight);
        INFO(to_string(problem), " ", a.error ? a.error->message : "");
        REQUIRE_FALSE(a.error);
        CHECK(dump(*a.final) == dump(*b.final));
        RunConfig config;
        config.spec = spec;
        CHECK(report_to_json(a, config, false).dump() == report_to_json(b, config, false).dump());
    }
}

TEST_CASE("full-data log-likelihood streaming") {
    MleSettings gaussian;
    const std::vector<double> theta{0.0, 1.0};
    MemorySource zero(EmpiricalMeasure({0.0}, 1));
    CHECK(full_pass_evaluate(theta, gaussian, zero) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));

    const auto m = testdata::gaussian(1000, 1, 6, 0.5, 1.5);
    std::vector<double> twice(m.rows().begin(), m.rows().end());
    twice.insert(twice.end(), m.rows().begin(), m.rows().end());
    MemorySource once(m);
    MemorySource doubled(EmpiricalMeasure(twice, 1));
    const std::vector<double> fit{0.4, 2.0};
    const double single = full_pass_evaluate(fit, gaussian, once, 64);
    CHECK(full_pass_evaluate(fit, gaussian, doubled, 100) == 2.0 * single);

    double in_memory = 0.0;
    for (double x : m.rows()) in_memory += -0.5 * std::log(2.0 * std::numbers::pi * 2.0) - (x - 0.4) * (x - 0.4) / 4.0;
    CHECK(std::abs(single - in_memory) <= 1e-10 * std::abs(in_memory));
}

TEST_CASE("routing delivers every index to the sampled parts") {
    const auto m = testdata::uniform(100000, 1, 2);
    PartitionerSpec spec;
    spec.L = 2;
    spec.base_seed = 4;
    MemorySource source(m);
    const auto dir = std::filesystem::temp_directory_path() / "parcon-route-test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    RouteOptions options;
    options.chunk_size = 1000;
    options.spill_dir = dir;
    const auto routed = route_to_parts(spec, 0, source, options);
    const auto assignment = sample_partition(spec, m, 0);
    for (std::size_t l = 0; l < 2; ++l) {
        const auto part = read_spill_file(*routed.parts[l].spill_path, 1);
        std::vector<std::size_t> indices;
        for (std::size_t i = 0; i < part.size(); ++i) {
            indices.push_back(part.parent_index(i));
            CHECK(part.at(i, 0) == m.at(part.parent_index(i), 0));
        }
        CHECK(indices == assignment.parts[l]);
    }
    std::filesystem::remove_all(dir);

    PartitionerSpec sub;
    sub.scheme = PartitionScheme::Subsample;
    sub.L = 3;
    sub.part_size = 50;
    MemorySource small(testdata::uniform(10, 1, 3));
    const auto drawn = route_to_parts(sub, 1, small, RouteOptions{});
    const auto expected = sample_partition(sub, small.measure(), 1);
    for (std::size_t l = 0; l < 3; ++l) CHECK(drawn.parts[l].indices == expected.parts[l]);
}

TEST_CASE("spilled parts give the same answers as in-memory parts") {
    const auto m = testdata::gaussian(5000, 1, 44);
    for (auto problem : {ProblemKind::Knn, ProblemKind::Outlier, ProblemKind::Mle}) {
        const auto spec = make_spec(problem, 4, 2, 8);
        EngineOptions spill;
        spill.force_spill = true;
        spill.chunk_size = 2000;
        const auto a = run_with(spec, m);
        const auto b = run_with(spec, m, spill);
        REQUIRE_FALSE(b.error);
        CHECK(dump(*a.final) == dump(*b.final));
    }
}

TEST_CASE("resident points stay within the chunk budget") {
    const auto m = testdata::gaussian(100000, 2, 1);
    for (std::size_t workers : {1u, 4u}) {
        EngineOptions options;
        options.workers = workers;
        options.memory_budget = 1 << 20;
        MemorySource source(m);
        Engine engine(source, options);
        auto spec = make_spec(ProblemKind::Knn, 16);
        spec.params.query = {3.0, 3.0};
        const auto report = engine.run(spec);
        REQUIRE_FALSE(report.error);
        CHECK(report.peak_resident_points <= engine.chunk_size() * (workers + 1));
        CHECK(report.peak_resident_points > 0);
    }
}

TEST_CASE("oversized sort parts fail with advice to raise L") {
    const auto m = testdata::uniform(5000, 1, 1);
    auto spec = make_spec(ProblemKind::Sort, 2);
    spec.partitioner.scheme = PartitionScheme::RangeBounded;
    spec.partitioner.bounds = {-1, 0.5, 2};
    EngineOptions options;
    options.chunk_size = 1000;
    const auto report = run_with(spec, m, options);
    REQUIRE(report.error);
    CHECK(report.error->code == ErrorCode::InsufficientMemory);
    CHECK(report.error->message.find("raise L") != std::string::npos);
    CHECK(report.error->message.find("k=0") != std::string::npos);
    CHECK_FALSE(report.final);

    spec.partitioner.L = 8;
    spec.partitioner.bounds = {-1, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 2};
    const auto ok = run_with(spec, m, options);
    REQUIRE_FALSE(ok.error);
    std::vector<double> sorted(m.rows().begin(), m.rows().end());
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::get<SortedResult>(*ok.final).rows == sorted);
}

TEST_CASE("errors carry the repetition and part") {
    const auto m = testdata::uniform(100, 1, 1);
    auto spec = make_spec(ProblemKind::Histogram, 3);
    spec.partitioner.scheme = PartitionScheme::RangeBounded;
    spec.partitioner.bounds = {-1, 0.5, 0.5000001, 2};
    const auto report = run_with(spec, m);
    REQUIRE(report.error);
    CHECK(report.error->code == ErrorCode::EmptyPart);
    CHECK(report.error->message.find("l=1") != std::string::npos);
}

TEST_CASE("failing MLE parts become warnings") {
    const auto m = EmpiricalMeasure({1, 1, 2, 5}, 1);
    auto spec = make_spec(ProblemKind::Mle, 2);
    spec.partitioner.scheme = PartitionScheme::RangeBounded;
    spec.partitioner.bounds = {0, 1.5, 6};
    spec.params.model = MleModel::GaussianMeanVar;
    // Part 0 = {1, 1}: zero variance still has n = 2, so it is a valid (degenerate) candidate.
    const auto report = run_with(spec, m);
    REQUIRE_FALSE(report.error);

    const auto tiny = EmpiricalMeasure({1, 3, 4}, 1);
    spec.partitioner.bounds = {0, 2, 6};
    const auto excluded = run_with(spec, tiny);
    REQUIRE_FALSE(excluded.error);
    CHECK(std::get<MleResult>(*excluded.final).theta[0] == 3.5);
    CHECK_FALSE(excluded.warnings.empty());
}

TEST_CASE("extend appends repetitions like a longer run") {
    const auto m = testdata::gaussian(2000, 1, 3);
    const auto spec = make_spec(ProblemKind::Test, 4, 2, 9);
    MemorySource source(m);
    Engine engine(source, EngineOptions{});
    auto report = engine.run(spec);
    engine.extend(report, 3);
    auto longer = spec;
    longer.K = 5;
    const auto full = run_with(longer, m);
    CHECK(report.per_rep.size() == 5);
    CHECK(report.spec.K == 5);
    CHECK(dump(*report.final) == dump(*full.final));
    CHECK(report.seeds == full.seeds);
}

TEST_CASE("chunk size derives from the budget") {
    CHECK(derive_chunk_size(64 << 20, 1, 1) == (64u << 20) / 32);
    CHECK(derive_chunk_size(1, 8, 3) == 1);
}

TEST_CASE("resource failures in mle parts are not downgraded to warnings") {
    const auto m = testdata::gaussian(4000, 1, 12);
    EngineOptions options;
    options.chunk_size = 500;
    const auto report = run_with(make_spec(ProblemKind::Mle, 2), m, options);
    REQUIRE(report.error);
    CHECK(report.error->code == ErrorCode::InsufficientMemory);
}
