#include "parcon/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace parcon {

namespace {

void require_oracle_size(std::size_t n) {
    if (n > kOracleLimit)
        fail(ErrorCode::TooLargeForOracle,
             "oracle needs the data in memory; n=" + std::to_string(n) + " exceeds " + std::to_string(kOracleLimit));
}

void require_same_length(const EvalVector& a, const EvalVector& b) {
    if (a.size() != b.size())
        fail(ErrorCode::DimensionMismatch, "ev lengths differ: " + std::to_string(a.size()) + " vs " +
                                               std::to_string(b.size()));
}

SolutionSpec reseeded(SolutionSpec spec, std::uint64_t seed) {
    spec.partitioner.base_seed = seed;
    return spec;
}

}  // namespace

ResultValue oracle(const SolutionSpec& spec, const EmpiricalMeasure& m) {
    require_oracle_size(m.size());
    spec.validate_for(m.dim());
    const auto& p = spec.params;
    switch (spec.problem) {
    case ProblemKind::Mean: return rho_mean(m);
    case ProblemKind::Sort: return rho_sort(m);
    case ProblemKind::Extremes: return rho_extremes(m);
    case ProblemKind::Histogram: return rho_histogram(m, p.edges, p.key_dim);
    case ProblemKind::Test: return rho_test(m, p.mu0, p.sigma, p.key_dim);
    case ProblemKind::Mle: {
        MleSettings settings = mle_settings(p);
        if (settings.model == MleModel::LogisticRegression) {
            settings.tol = std::min(settings.tol, 1e-12);
            settings.max_iter = std::max<std::size_t>(settings.max_iter, 1000);
        }
        return rho_mle(m, settings);
    }
    case ProblemKind::Knn: return rho_knn(m, p.query, p.k, p.label_dim);
    case ProblemKind::Outlier: return rho_outlier(m, spec.combiner.c, p.key_dim);
    }
    fail(ErrorCode::InvalidSpec, "unknown problem");
}

ResultValue oracle(const SolutionSpec& spec, ChunkSource& source) {
    require_oracle_size(source.size());
    return oracle(spec, load_all(source));
}

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
    case Verdict::Viable: return "Viable";
    case Verdict::NotViable: return "NotViable";
    case Verdict::Inconclusive: return "Inconclusive";
    }
    return "?";
}

Verdict viability_verdict(const EvalVector& bias, const EvalVector& se, std::size_t K) {
    require_same_length(bias, se);
    bool viable = true;
    bool unresolved = false;
    for (std::size_t j = 0; j < bias.size(); ++j) {
        const double b = std::abs(bias[j]);
        if (!std::isfinite(se[j]) || !(b <= 3.0 * se[j])) viable = false;
        if (se[j] == 0.0 && b != 0.0) unresolved = true;
    }
    if (viable) return Verdict::Viable;
    if (unresolved && K < kMinViabilityDraws) return Verdict::Inconclusive;
    return Verdict::NotViable;
}

ViabilityReport estimate_viability(const SolutionSpec& spec, ChunkSource& source, std::size_t K, std::uint64_t seed,
                                   const EngineOptions& options) {
    if (K < 1) fail(ErrorCode::InvalidSpec, "viability needs at least one draw");
    ViabilityReport report;
    report.problem = spec.problem;
    report.K = K;
    report.target = ev(oracle(spec, source));
    if (K < kMinViabilityDraws)
        report.warnings.push_back("K=" + std::to_string(K) + " is below " + std::to_string(kMinViabilityDraws) +
                                  "; standard errors are unreliable");

    const SolutionSpec draw_spec = reseeded(spec, seed);
    Engine engine(source, options);
    const std::size_t N = report.target.size();
    std::vector<double> mean(N, 0.0);
    std::vector<double> m2(N, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        auto outcome = engine.run_repetition(draw_spec, k);
        for (auto& w : outcome.warnings) report.warnings.push_back("draw " + std::to_string(k) + ": " + w);
        const EvalVector x = ev(outcome.combined);
        require_same_length(x, report.target);
        const double count = static_cast<double>(k + 1);
        for (std::size_t j = 0; j < N; ++j) {
            const double delta = x[j] - mean[j];
            mean[j] += delta / count;
            m2[j] += delta * (x[j] - mean[j]);
        }
    }

    report.estimate.values = mean;
    report.bias.values.resize(N);
    report.se.values.resize(N);
    for (std::size_t j = 0; j < N; ++j) {
        report.bias.values[j] = mean[j] - report.target[j];
        // One draw carries no spread information; se 0 leaves a nonzero bias Inconclusive.
        const double variance = K > 1 ? std::max(0.0, m2[j]) / static_cast<double>(K - 1) : 0.0;
        report.se.values[j] = std::sqrt(variance / static_cast<double>(K));
    }
    report.verdict = viability_verdict(report.bias, report.se, K);
    return report;
}

std::string_view to_string(ConvergenceCombiner combiner) {
    switch (combiner) {
    case ConvergenceCombiner::MeanOfEv: return "mean_of_ev";
    case ConvergenceCombiner::MedianOfEv: return "median_of_ev";
    case ConvergenceCombiner::OracleArgmin: return "oracle_argmin";
    }
    return "?";
}

ConvergenceCombiner parse_convergence_combiner(std::string_view name) {
    if (name == "mean_of_ev") return ConvergenceCombiner::MeanOfEv;
    if (name == "median_of_ev") return ConvergenceCombiner::MedianOfEv;
    if (name == "oracle_argmin") return ConvergenceCombiner::OracleArgmin;
    fail(ErrorCode::InvalidSpec, "unknown convergence combiner '" + std::string(name) +
                                     "' (expected mean_of_ev, median_of_ev or oracle_argmin)");
}

EvalVector combine_ev(ConvergenceCombiner combiner, std::span<const EvalVector> evs, const EvalVector& target) {
    if (evs.empty()) fail(ErrorCode::EmptyInput, "no repetitions to combine");
    for (const auto& e : evs) require_same_length(e, target);
    const std::size_t N = target.size();
    EvalVector out;
    switch (combiner) {
    case ConvergenceCombiner::MeanOfEv: {
        out.values.assign(N, 0.0);
        for (std::size_t k = 0; k < evs.size(); ++k)
            for (std::size_t j = 0; j < N; ++j)
                out.values[j] += (evs[k][j] - out.values[j]) / static_cast<double>(k + 1);
        return out;
    }
    case ConvergenceCombiner::MedianOfEv: {
        out.values.resize(N);
        std::vector<double> column(evs.size());
        for (std::size_t j = 0; j < N; ++j) {
            for (std::size_t k = 0; k < evs.size(); ++k) column[k] = evs[k][j];
            std::sort(column.begin(), column.end());
            const std::size_t h = column.size() / 2;
            out.values[j] = column.size() % 2 ? column[h] : 0.5 * (column[h - 1] + column[h]);
        }
        return out;
    }
    case ConvergenceCombiner::OracleArgmin: {
        std::size_t best = 0;
        double best_distance = eval_distance(evs[0], target);
        for (std::size_t k = 1; k < evs.size(); ++k) {
            const double d = eval_distance(evs[k], target);
            if (d < best_distance) {
                best = k;
                best_distance = d;
            }
        }
        return evs[best];
    }
    }
    fail(ErrorCode::InvalidSpec, "unknown convergence combiner");
}

ConvergenceTrace trace_convergence(const SolutionSpec& spec, ChunkSource& source, std::size_t K_max,
                                   ConvergenceCombiner combiner, std::uint64_t seed, const EngineOptions& options) {
    if (K_max < 2) fail(ErrorCode::InvalidSpec, "convergence trace needs K_max >= 2");
    ConvergenceTrace trace;
    trace.combiner = combiner;
    trace.target = ev(oracle(spec, source));

    const SolutionSpec draw_spec = reseeded(spec, seed);
    Engine engine(source, options);
    std::vector<EvalVector> evs;
    evs.reserve(K_max);
    trace.distances.reserve(K_max);
    for (std::size_t k = 0; k < K_max; ++k) {
        evs.push_back(ev(engine.run_repetition(draw_spec, k).combined));
        const EvalVector z = combine_ev(combiner, evs, trace.target);
        trace.distances.push_back(eval_distance(z, trace.target));
    }
    return trace;
}

}  // namespace parcon
