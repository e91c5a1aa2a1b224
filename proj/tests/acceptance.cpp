// Acceptance suite: one PASS/FAIL line per criterion.
#include "parcon/cli.hpp"
#include "support.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace parcon;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail << what;
        pass = pass && ok;
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SolutionSpec spec_for(ProblemKind kind, std::size_t L, const EmpiricalMeasure& m) {
    SolutionSpec spec;
    spec.problem = kind;
    spec.partitioner.L = L;
    switch (kind) {
    case ProblemKind::Sort:
        spec.partitioner.scheme = PartitionScheme::RangeBounded;
        spec.partitioner.bounds = quantile_bounds(m, L, 0, 100000, 1).bounds;
        spec.partitioner.L = spec.partitioner.bounds.size() - 1;
        break;
    case ProblemKind::Histogram:
        for (int i = 0; i <= 20; ++i) spec.params.edges.push_back(-1.0 + 0.4 * i);
        break;
    case ProblemKind::Knn:
        spec.params.k = 7;
        spec.params.query.assign(m.dim(), 3.0);
        break;
    case ProblemKind::Test:
        spec.params.mu0 = 3.0;
        break;
    default: break;
    }
    return spec;
}

ResultValue run_once(const SolutionSpec& spec, ChunkSource& source, EngineOptions options = {}) {
    Engine engine(source, options);
    const auto report = engine.run(spec);
    if (report.error) throw std::runtime_error(report.error->message);
    return *report.final;
}

bool same_result(ProblemKind kind, const ResultValue& a, const ResultValue& b, std::string& why) {
    switch (kind) {
    case ProblemKind::Mean: {
        const auto& x = std::get<MeanResult>(a);
        const auto& y = std::get<MeanResult>(b);
        for (std::size_t j = 0; j < x.mean.size(); ++j)
            if (testdata::ulps(x.mean[j], y.mean[j]) > 8) return why = "mean differs by more than 8 ulps", false;
        return x.count == y.count;
    }
    case ProblemKind::Extremes: {
        const auto& x = std::get<ExtremesResult>(a);
        const auto& y = std::get<ExtremesResult>(b);
        if (x.min != y.min || x.max != y.max || x.min_index != y.min_index || x.max_index != y.max_index)
            return why = "extremes differ", false;
        return true;
    }
    case ProblemKind::Histogram:
        if (std::get<HistogramResult>(a).counts != std::get<HistogramResult>(b).counts)
            return why = "histogram counts differ", false;
        return true;
    case ProblemKind::Sort: {
        const auto& x = std::get<SortedResult>(a);
        const auto& y = std::get<SortedResult>(b);
        if (x.indices != y.indices || x.rows != y.rows) return why = "sorted order differs", false;
        return true;
    }
    case ProblemKind::Knn: {
        std::set<std::size_t> x, y;
        for (const auto& nb : std::get<KnnResult>(a).neighbors) x.insert(nb.index);
        for (const auto& nb : std::get<KnnResult>(b).neighbors) y.insert(nb.index);
        if (x != y) return why = "neighbour sets differ", false;
        return true;
    }
    default: return false;
    }
}

void ac1(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto m = testdata::gaussian(10000, 2, 2024);
    MemorySource source(m);
    std::size_t cases = 0;
    for (auto kind : {ProblemKind::Mean, ProblemKind::Extremes, ProblemKind::Histogram, ProblemKind::Sort,
                      ProblemKind::Knn}) {
        for (std::size_t L : {1, 4, 16}) {
            const auto spec = spec_for(kind, L, m);
            std::string why;
            const bool ok = same_result(kind, run_once(spec, source), oracle(spec, m), why);
            o.require(ok, std::string(to_string(kind)) + " L=" + std::to_string(L) + ": " + why);
            ++cases;
        }
    }
    const double elapsed = seconds_since(t0);
    o.require(elapsed < 10.0, "took " + std::to_string(elapsed) + " s");
    o.detail << cases << " problem/L cases match the oracle in " << elapsed << " s";
}

void ac2(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto m = testdata::gaussian(10000, 1, 77);
    MemorySource source(m);
    for (auto kind : {ProblemKind::Mean, ProblemKind::Sort}) {
        const auto report = estimate_viability(spec_for(kind, 8, m), source, 100, 11);
        bool zero = true;
        for (double b : report.bias.values) zero = zero && b == 0.0;
        o.require(report.verdict == Verdict::Viable && zero, std::string(to_string(kind)) + " not exactly viable");
    }
    SolutionSpec sub;
    sub.partitioner.scheme = PartitionScheme::Subsample;
    sub.partitioner.L = 1;
    sub.partitioner.part_size = 100;
    int covered = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto r = estimate_viability(sub, source, 100, seed);
        if (std::abs(r.bias[0]) <= 3.0 * r.se[0]) ++covered;
    }
    o.require(covered >= 19, "subsampled mean within 3 se in only " + std::to_string(covered) + "/20 seeds");
    const double elapsed = seconds_since(t0);
    o.require(elapsed < 60.0, "took " + std::to_string(elapsed) + " s");
    o.detail << "exact combiners have zero bias; subsampled mean covered in " << covered << "/20 seeds; "
             << elapsed << " s";
}

void ac3(Outcome& o) {
    const auto m = testdata::gaussian(2000, 1, 303);
    MemorySource source(m);
    std::size_t violations = 0, traces = 0;
    for (auto kind : {ProblemKind::Mean, ProblemKind::Sort, ProblemKind::Extremes, ProblemKind::Histogram,
                      ProblemKind::Test, ProblemKind::Mle, ProblemKind::Knn, ProblemKind::Outlier}) {
        auto spec = spec_for(kind, 4, m);
        if (kind == ProblemKind::Mean) {
            spec.partitioner.scheme = PartitionScheme::Subsample;
            spec.partitioner.L = 2;
            spec.partitioner.part_size = 50;
        }
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto t = trace_convergence(spec, source, 50, ConvergenceCombiner::OracleArgmin, seed);
            for (std::size_t k = 1; k < t.distances.size(); ++k)
                if (!(t.distances[k] <= t.distances[k - 1])) ++violations;
            ++traces;
        }
    }
    o.require(violations == 0, std::to_string(violations) + " increases in oracle_argmin traces");

    const auto big = testdata::gaussian(10000, 1, 304);
    MemorySource big_source(big);
    SolutionSpec sub;
    sub.partitioner.scheme = PartitionScheme::Subsample;
    sub.partitioner.L = 1;
    sub.partitioner.part_size = 100;
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto t = trace_convergence(sub, big_source, 400, ConvergenceCombiner::MeanOfEv, seed);
        if (t.distances[399] < t.distances[3]) ++improved;
    }
    o.require(improved >= 18, "mean_of_ev improved in only " + std::to_string(improved) + "/20 seeds");
    o.detail << traces << " oracle_argmin traces, " << violations << " violations; mean_of_ev K=400 below K=4 in "
             << improved << "/20 seeds";
}

double euclid(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

void ac4(Outcome& o) {
    const auto m = testdata::gaussian(10000, 1, 404, 5.0, 2.0);
    MemorySource source(m);
    auto spec = spec_for(ProblemKind::Mle, 8, m);
    EngineOptions options;
    options.retain_parts = true;
    Engine engine(source, options);
    const auto report = engine.run(spec);
    o.require(!report.error && report.per_part.size() == 1 && report.per_part[0].size() == 8, "run failed");
    if (!o.pass) return;
    const MleSettings settings = mle_settings(spec.params);
    const auto combined = std::get<MleResult>(*report.final);
    const auto closed = rho_mle(m, settings);
    const double best = measure_loglik(settings, combined.theta, m);
    double worst_gap = 0.0;
    for (const auto& part : report.per_part[0]) {
        const auto& candidate = std::get<MleResult>(part);
        o.require(best >= measure_loglik(settings, candidate.theta, m), "a candidate beats the combined estimate");
        worst_gap = std::max(worst_gap, euclid(candidate.theta, closed.theta));
    }
    const double gap = euclid(combined.theta, closed.theta);
    o.require(gap <= worst_gap, "combined estimate further from the closed form than every candidate");

    const auto fixture = testdata::logistic_fixture();
    MleSettings logistic;
    logistic.model = MleModel::LogisticRegression;
    logistic.key_dim = 0;
    logistic.tol = 1e-12;
    logistic.max_iter = 1000;
    const auto nr = rho_mle(fixture, logistic);
    const auto gd = testdata::logistic_by_gradient_ascent(fixture);
    double diff = 0.0;
    for (std::size_t j = 0; j < gd.size(); ++j) diff = std::max(diff, std::abs(nr.theta[j] - gd[j]));
    o.require(diff <= 1e-6, "logistic differs from gradient ascent by " + std::to_string(diff));
    o.detail << "combined gap " << gap << " <= max candidate gap " << worst_gap << "; logistic max diff " << diff;
}

void ac5(Outcome& o) {
    const std::vector<double> ps{0.3, 0.05, 0.7};
    o.require(combine_test({ps}, PValueAdjust::None).p == 0.05, "min of (0.3, 0.05, 0.7)");
    o.require(std::abs(combine_test({ps}, PValueAdjust::Bonferroni).p - 0.15) < 1e-15, "Bonferroni 3 x 0.05");
    o.require(combine_test({{0.5, 0.6}}, PValueAdjust::Bonferroni).p == 1.0, "Bonferroni clamps at 1");
    o.require(combine_test({{0.05}, {0.1}, {0.2}}, PValueAdjust::None).p == 0.1, "median of (0.05, 0.1, 0.2)");
    o.require(combine_test({{0.1}, {0.4}, {0.2}, {0.3}}, PValueAdjust::None).p == (0.2 + 0.3) / 2,
              "even median is the mean of the middle pair");

    std::mt19937_64 gen(505);
    std::uniform_real_distribution<double> u;
    std::vector<std::vector<double>> grid(6, std::vector<double>(5));
    for (auto& rep : grid)
        for (auto& p : rep) p = u(gen);
    int broken = 0;
    for (auto adjust : {PValueAdjust::None, PValueAdjust::Bonferroni}) {
        const double reference = combine_test(grid, adjust).p;
        for (int t = 0; t < 1000; ++t) {
            auto shuffled = grid;
            for (auto& rep : shuffled) std::shuffle(rep.begin(), rep.end(), gen);
            std::shuffle(shuffled.begin(), shuffled.end(), gen);
            if (combine_test(shuffled, adjust).p != reference) ++broken;
        }
    }
    o.require(broken == 0, std::to_string(broken) + " shuffles changed the result");
    o.detail << "grid examples reproduced; 2000 shuffles, " << broken << " changes";
}

struct Scratch {
    std::filesystem::path dir;
    Scratch() {
        dir = std::filesystem::temp_directory_path() / ("parcon-acceptance-" + std::to_string(::getpid()));
        std::filesystem::create_directories(dir);
    }
    ~Scratch() { std::filesystem::remove_all(dir); }
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void ac6(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    Scratch scratch;
    write_f64le(scratch.dir / "small.bin", testdata::gaussian(100000, 2, 606));
    std::ofstream(scratch.dir / "small.json") << R"({"data":{"path":"small.bin","format":"f64le","dim":2},
        "problem":{"id":"mle"},"partitioner":{"scheme":"random_balanced","L":8,"base_seed":6},"K":3,
        "engine":{"chunk_size":20000}})";
    std::string reports[2];
    const std::size_t worker_counts[2] = {1, 8};
    for (int i = 0; i < 2; ++i) {
        CommandOptions opts;
        opts.workers = worker_counts[i];
        opts.diagnostics = false;
        opts.out = (scratch.dir / ("w" + std::to_string(worker_counts[i]) + ".json")).string();
        std::ostringstream out, err;
        o.require(execute(Command::Run, scratch.dir / "small.json", opts, out, err) == 0, "run failed: " + err.str());
        reports[i] = slurp(*opts.out);
    }
    o.require(!reports[0].empty() && reports[0] == reports[1], "reports differ between 1 and 8 workers");

    const std::size_t dim = 2, budget = std::size_t{64} << 20;
    write_f64le(scratch.dir / "large.bin", testdata::gaussian(1000000, dim, 607));
    std::ofstream(scratch.dir / "large.json") << R"({"data":{"path":"large.bin","format":"f64le","dim":2},
        "problem":{"id":"knn","k":7,"query":[3,3]},"partitioner":{"scheme":"random_balanced","L":16},
        "engine":{"workers":2,"memory_budget":"64MiB"}})";
    CommandOptions opts;
    opts.out = (scratch.dir / "large.out.json").string();
    std::ostringstream out, err;
    o.require(execute(Command::Run, scratch.dir / "large.json", opts, out, err) == 0, "large run failed: " + err.str());
    std::size_t peak = 0, chunk = 0;
    if (o.pass) {
        const auto doc = nlohmann::json::parse(slurp(*opts.out));
        peak = doc["resources"]["peak_resident_points"].get<std::size_t>();
        chunk = doc["resources"]["chunk_size"].get<std::size_t>();
        const std::size_t bytes_per_point = 8 * (dim + 1);
        o.require(peak > 0 && peak * bytes_per_point <= budget + chunk * bytes_per_point,
                  "peak resident points " + std::to_string(peak) + " over budget");
    }
    const double elapsed = seconds_since(t0);
    o.require(elapsed < 120.0, "took " + std::to_string(elapsed) + " s");
    o.detail << "1 vs 8 workers byte-identical; 1e6-point peak " << peak << " points (chunk " << chunk << "); "
             << elapsed << " s";
}

void ac7(Outcome& o) {
    std::mt19937_64 gen(707);
    std::size_t violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t n = 1 + gen() % 200;
        const std::size_t L = 1 + gen() % n;
        PartitionerSpec spec;
        spec.L = L;
        spec.base_seed = gen();
        const auto m = testdata::uniform(n, 1, trial);
        const auto a = sample_partition(spec, m, trial % 3);
        const auto b = sample_partition(spec, m, trial % 3);
        std::vector<int> seen(n, 0);
        std::size_t lo = n, hi = 0;
        for (const auto& part : a.parts) {
            for (auto i : part) ++seen[i];
            lo = std::min(lo, part.size());
            hi = std::max(hi, part.size());
        }
        const bool cover = a.parts.size() == L && std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
        if (!cover || hi - lo > 1 || a.parts != b.parts) ++violations;
    }
    o.require(violations == 0, std::to_string(violations) + " violating trials");
    o.detail << "10000 trials, " << violations << " violations";
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<void(Outcome&)>> criteria[] = {
        {"AC1 exact-solution equivalence", ac1}, {"AC2 viability verdicts", ac2},
        {"AC3 convergence harness", ac3},        {"AC4 MLE combiner contract", ac4},
        {"AC5 testing combiner arithmetic", ac5}, {"AC6 determinism and memory", ac6},
        {"AC7 partition invariants", ac7},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            check(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " exception: " << e.what();
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail.str() << std::endl;
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
