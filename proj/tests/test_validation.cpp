#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "parcon/validation.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>

using namespace parcon;

namespace {

SolutionSpec mean_spec(std::size_t L) {
    SolutionSpec spec;
    spec.partitioner.L = L;
    return spec;
}

SolutionSpec subsampled_mean() {
    SolutionSpec spec;
    spec.partitioner.scheme = PartitionScheme::Subsample;
    spec.partitioner.L = 1;
    spec.partitioner.part_size = 100;
    return spec;
}

}  // namespace

TEST_CASE("oracle examples") {
    const auto m = EmpiricalMeasure({1, 2, 3}, 1);
    const auto mean = std::get<MeanResult>(oracle(mean_spec(1), m));
    CHECK(mean.mean[0] == 2.0);
    CHECK(mean.count == 3);

    SolutionSpec sort;
    sort.problem = ProblemKind::Sort;
    sort.partitioner.scheme = PartitionScheme::RangeBounded;
    sort.partitioner.bounds = {0, 10};
    CHECK(std::get<SortedResult>(oracle(sort, EmpiricalMeasure({3, 1, 2}, 1))).rows == std::vector<double>{1, 2, 3});
}

TEST_CASE("knn oracle agrees with partitioned combine and a squared-distance scan") {
    const auto m = testdata::uniform(200, 2, 71);
    SolutionSpec spec;
    spec.problem = ProblemKind::Knn;
    spec.params.k = 9;
    spec.params.query = {0.5, 0.5};
    const auto full = std::get<KnnResult>(oracle(spec, m));

    std::vector<std::pair<double, std::size_t>> scan;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double dx = m.at(i, 0) - 0.5, dy = m.at(i, 1) - 0.5;
        scan.emplace_back(dx * dx + dy * dy, i);
    }
    std::sort(scan.begin(), scan.end());
    for (std::size_t j = 0; j < 9; ++j) CHECK(full.neighbors[j].index == scan[j].second);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        spec.partitioner.L = 6;
        spec.partitioner.base_seed = seed;
        std::vector<KnnResult> lists;
        for (const auto& part : sample_partition(spec.partitioner, m, 0).parts)
            lists.push_back(rho_knn(restrict(m, part), spec.params.query, 9));
        const auto combined = combine_knn(lists, 9);
        for (std::size_t j = 0; j < 9; ++j) CHECK(combined.neighbors[j].index == full.neighbors[j].index);
    }
}

TEST_CASE("oracle refuses data beyond the in-memory limit") {
    MemorySource big(EmpiricalMeasure(std::vector<double>(kOracleLimit + 1, 1.0), 1));
    CHECK_THROWS_WITH_AS(oracle(mean_spec(1), big), doctest::Contains("TooLargeForOracle"), Error);
}

TEST_CASE("exact combiners have zero bias") {
    MemorySource source(testdata::gaussian(5000, 2, 8));
    const auto mean = estimate_viability(mean_spec(8), source, 40, 3);
    CHECK(mean.verdict == Verdict::Viable);
    for (double b : mean.bias.values) CHECK(b == 0.0);

    SolutionSpec sort;
    sort.problem = ProblemKind::Sort;
    sort.partitioner.scheme = PartitionScheme::RangeBounded;
    sort.partitioner.L = 4;
    sort.partitioner.bounds = {-100, 2, 3, 4, 100};
    const auto s = estimate_viability(sort, source, 30, 3);
    CHECK(s.verdict == Verdict::Viable);
    for (double b : s.bias.values) CHECK(b == 0.0);

    SolutionSpec extremes = mean_spec(5);
    extremes.problem = ProblemKind::Extremes;
    CHECK(estimate_viability(extremes, source, 30, 1).verdict == Verdict::Viable);
    SolutionSpec knn = mean_spec(5);
    knn.problem = ProblemKind::Knn;
    knn.params.k = 4;
    knn.params.query = {3, 3};
    const auto k = estimate_viability(knn, source, 30, 1);
    for (double b : k.bias.values) CHECK(b == 0.0);
}

TEST_CASE("min-combined p-values are biased low on null data") {
    MemorySource source(testdata::gaussian(600, 1, 123, 0.0, 1.0));
    SolutionSpec test = mean_spec(4);
    test.problem = ProblemKind::Test;
    test.params.mu0 = 0.0;
    const auto report = estimate_viability(test, source, 200, 5);
    CHECK(report.bias[0] < 0.0);
    CHECK(report.verdict == Verdict::NotViable);
    CHECK(estimate_viability(test, source, 200, 5).estimate == report.estimate);
}

TEST_CASE("verdict rules") {
    CHECK(viability_verdict(EvalVector{{0.0}}, EvalVector{{0.0}}, 5) == Verdict::Viable);
    CHECK(viability_verdict(EvalVector{{0.1}}, EvalVector{{0.0}}, 5) == Verdict::Inconclusive);
    CHECK(viability_verdict(EvalVector{{0.1}}, EvalVector{{0.0}}, 50) == Verdict::NotViable);
    CHECK(viability_verdict(EvalVector{{0.1}}, EvalVector{{0.04}}, 50) == Verdict::Viable);
    CHECK(viability_verdict(EvalVector{{0.2}}, EvalVector{{0.04}}, 50) == Verdict::NotViable);
}

TEST_CASE("standard error shrinks like one over root K") {
    MemorySource source(testdata::gaussian(10000, 1, 64));
    double small = 0.0, large = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        small += estimate_viability(subsampled_mean(), source, 30, seed).se[0];
        large += estimate_viability(subsampled_mean(), source, 120, seed + 1000).se[0];
    }
    const double ratio = large / small;
    CHECK(ratio >= 0.35);
    CHECK(ratio <= 0.65);
}

TEST_CASE("convergence traces") {
    MemorySource source(testdata::gaussian(10000, 1, 65));
    const auto exact = trace_convergence(mean_spec(4), source, 10, ConvergenceCombiner::MeanOfEv, 1);
    CHECK(exact.distances.size() == 10);
    for (double d : exact.distances) CHECK(d == 0.0);

    for (auto combiner : {ConvergenceCombiner::OracleArgmin, ConvergenceCombiner::MedianOfEv}) {
        const auto t = trace_convergence(subsampled_mean(), source, 30, combiner, 2);
        for (double d : t.distances) CHECK(d >= 0.0);
        if (combiner == ConvergenceCombiner::OracleArgmin)
            for (std::size_t k = 1; k < t.distances.size(); ++k) CHECK(t.distances[k] <= t.distances[k - 1]);
    }

    int improved = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto t = trace_convergence(subsampled_mean(), source, 400, ConvergenceCombiner::MeanOfEv, seed);
        if (t.distances[399] < t.distances[3]) ++improved;
    }
    CHECK(improved >= 18);
    CHECK_THROWS_AS(trace_convergence(mean_spec(1), source, 1, ConvergenceCombiner::MeanOfEv, 0), Error);
}

TEST_CASE("ev combiners") {
    const std::vector<EvalVector> evs{EvalVector{{1.0, 4.0}}, EvalVector{{3.0, 2.0}}, EvalVector{{2.0, 9.0}},
                                      EvalVector{{10.0, 0.0}}};
    const EvalVector target{{2.0, 2.0}};
    CHECK(combine_ev(ConvergenceCombiner::MeanOfEv, evs, target).values == std::vector<double>{4.0, 3.75});
    CHECK(combine_ev(ConvergenceCombiner::MedianOfEv, evs, target).values == std::vector<double>{2.5, 3.0});
    CHECK(combine_ev(ConvergenceCombiner::OracleArgmin, evs, target).values == std::vector<double>{3.0, 2.0});
    CHECK(parse_convergence_combiner("oracle_argmin") == ConvergenceCombiner::OracleArgmin);
}
