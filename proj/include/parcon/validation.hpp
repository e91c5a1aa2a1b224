#pragma once

#include "parcon/engine.hpp"
#include "parcon/measure.hpp"
#include "parcon/result.hpp"
#include "parcon/solutions.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace parcon {

inline constexpr std::size_t kOracleLimit = 1'000'000;
inline constexpr std::size_t kMinViabilityDraws = 30;

// Direct full-data computation R* = rho(m). Logistic fits run Newton-Raphson
// to a much tighter tolerance than the per-part default.
ResultValue oracle(const SolutionSpec& spec, const EmpiricalMeasure& m);
// Loads the source first; throws TooLargeForOracle above kOracleLimit points.
ResultValue oracle(const SolutionSpec& spec, ChunkSource& source);

enum class Verdict { Viable, NotViable, Inconclusive };
std::string_view to_string(Verdict verdict);

struct ViabilityReport {
    ProblemKind problem = ProblemKind::Mean;
    EvalVector estimate;
    EvalVector target;
    EvalVector bias;
    EvalVector se;
    std::size_t K = 0;
    Verdict verdict = Verdict::Inconclusive;
    std::vector<std::string> warnings;
};

// Viable when every |bias_j| <= 3 se_j; Inconclusive when fewer than
// kMinViabilityDraws draws left some se_j at 0 with bias_j != 0.
Verdict viability_verdict(const EvalVector& bias, const EvalVector& se, std::size_t K);

// Monte Carlo estimate of E[ev(C1_L(rho^L(H_L(m))))] over K assignments drawn
// from `seed`, compared against ev(rho(m)).
ViabilityReport estimate_viability(const SolutionSpec& spec, ChunkSource& source, std::size_t K, std::uint64_t seed,
                                   const EngineOptions& options = {});

enum class ConvergenceCombiner { MeanOfEv, MedianOfEv, OracleArgmin };
std::string_view to_string(ConvergenceCombiner combiner);
ConvergenceCombiner parse_convergence_combiner(std::string_view name);

struct ConvergenceTrace {
    ConvergenceCombiner combiner = ConvergenceCombiner::MeanOfEv;
    EvalVector target;
    // distances[K-1] = || Z_K - target || after K repetitions.
    std::vector<double> distances;
};

// Second-stage value Z_K in ev space for the first K repetitions.
EvalVector combine_ev(ConvergenceCombiner combiner, std::span<const EvalVector> evs, const EvalVector& target);

ConvergenceTrace trace_convergence(const SolutionSpec& spec, ChunkSource& source, std::size_t K_max,
                                   ConvergenceCombiner combiner, std::uint64_t seed,
                                   const EngineOptions& options = {});

}  // namespace parcon
