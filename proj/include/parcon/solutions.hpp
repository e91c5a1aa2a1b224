#pragma once

#include "parcon/exact_sum.hpp"
#include "parcon/measure.hpp"
#include "parcon/partition.hpp"
#include "parcon/result.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace parcon {

enum class ProblemKind { Mean, Sort, Extremes, Histogram, Test, Mle, Knn, Outlier };
enum class MleModel { GaussianMeanVar, LogisticRegression };
enum class PValueAdjust { None, Bonferroni };

std::string_view to_string(ProblemKind kind);
std::string_view to_string(MleModel model);
std::string_view to_string(PValueAdjust adjust);
// Also recognises the reserved identifiers "cluster" and "decision_tree",
// which are rejected as not shipped.
ProblemKind parse_problem(std::string_view name);
MleModel parse_model(std::string_view name);
PValueAdjust parse_adjust(std::string_view name);

// Streaming problems fold points into an accumulator while data is routed;
// the others need the part materialised.
bool is_streaming(ProblemKind kind);

struct ProblemParams {
    // Coordinate read by the one-dimensional problems (histogram, test,
    // Gaussian MLE, outlier).
    std::size_t key_dim = 0;
    std::vector<double> edges;
    double mu0 = 0.0;
    double sigma = 1.0;
    MleModel model = MleModel::GaussianMeanVar;
    std::vector<double> init;
    std::size_t max_iter = 100;
    double tol = 1e-10;
    std::size_t k = 1;
    std::vector<double> query;
    std::optional<std::size_t> label_dim;

    friend bool operator==(const ProblemParams&, const ProblemParams&) = default;
};

struct CombinerOptions {
    PValueAdjust adjust = PValueAdjust::None;
    double c = 3.5;
    double tau = 0.5;
    // Pooled re-detection: a surviving-outlier cluster at least
    // max(pool_min, ceil(pool_fraction * n)) large is demoted to data.
    double pool_fraction = 0.02;
    std::size_t pool_min = 3;

    friend bool operator==(const CombinerOptions&, const CombinerOptions&) = default;
};

struct SolutionSpec {
    ProblemKind problem = ProblemKind::Mean;
    ProblemParams params;
    PartitionerSpec partitioner;
    std::size_t K = 1;
    CombinerOptions combiner;

    // Data-independent checks.
    void validate() const;
    // Checks that need the data dimension (key columns, query length, ...).
    void validate_for(std::size_t dim) const;

    friend bool operator==(const SolutionSpec&, const SolutionSpec&) = default;
};

// Length N of ev for this spec on d-dimensional data.
std::size_t eval_length(const SolutionSpec& spec, std::size_t dim);
EvalVector ev(const ResultValue& result);

// ---- mean -----------------------------------------------------------------

class MeanAccumulator {
public:
    explicit MeanAccumulator(std::size_t dim) : sums_(dim) {}
    void add(std::span<const double> point);
    MeanResult finish() const;

private:
    std::vector<ExactSum> sums_;
    std::uint64_t count_ = 0;
};

MeanResult rho_mean(const EmpiricalMeasure& part);
MeanResult combine_mean_L(std::span<const MeanResult> results);
// Pooled mean of the repetitions; count is the per-repetition average.
MeanResult combine_mean_K(std::span<const MeanResult> results);

// ---- sort -----------------------------------------------------------------

SortedResult rho_sort(const EmpiricalMeasure& part);
// Concatenation is only valid for range partitions on the leading coordinate.
SortedResult combine_sort_L(std::span<const SortedResult> results, const PartitionerSpec& partitioner);

// ---- extremes / histogram ---------------------------------------------------

class ExtremesAccumulator {
public:
    void add(std::size_t index, std::span<const double> point);
    ExtremesResult finish() const;

private:
    ExtremesResult state_;
};

ExtremesResult rho_extremes(const EmpiricalMeasure& part);
ExtremesResult combine_extremes(std::span<const ExtremesResult> results);

// Values below the first edge count in the first bin, values at or above the
// last edge in the last bin.
class HistogramAccumulator {
public:
    HistogramAccumulator(std::vector<double> edges, std::size_t key_dim);
    void add(std::span<const double> point);
    HistogramResult finish() const { return result_; }

private:
    HistogramResult result_;
    std::size_t key_dim_;
};

HistogramResult rho_histogram(const EmpiricalMeasure& part, const std::vector<double>& edges, std::size_t key_dim);
HistogramResult combine_histogram(std::span<const HistogramResult> results);

// ---- testing ----------------------------------------------------------------

// Two-sided known-sigma z-test p-value for H0: mean == mu0.
double z_test_pvalue(double mean, std::uint64_t n, double mu0, double sigma);

class TestAccumulator {
public:
    TestAccumulator(double mu0, double sigma, std::size_t key_dim) : mu0_(mu0), sigma_(sigma), key_dim_(key_dim) {}
    void add(std::span<const double> point);
    PValueResult finish() const;

private:
    double mu0_;
    double sigma_;
    std::size_t key_dim_;
    ExactSum sum_;
    std::uint64_t count_ = 0;
};

PValueResult rho_test(const EmpiricalMeasure& part, double mu0, double sigma, std::size_t key_dim = 0);
PValueResult combine_test_L(std::span<const double> p_values, PValueAdjust adjust);
PValueResult combine_test_K(std::span<const double> per_repetition);
PValueResult combine_test(const std::vector<std::vector<double>>& per_rep, PValueAdjust adjust);

// ---- maximum likelihood -----------------------------------------------------

struct MleSettings {
    MleModel model = MleModel::GaussianMeanVar;
    std::size_t key_dim = 0;
    std::vector<double> init;
    std::size_t max_iter = 100;
    double tol = 1e-10;
};

MleSettings mle_settings(const ProblemParams& params);
std::size_t mle_parameter_count(MleModel model, std::size_t dim);

// Per-point log-likelihood of theta. Gaussian variance is floored at 1e-12.
double point_loglik(const MleSettings& settings, std::span<const double> theta, std::span<const double> point);
double measure_loglik(const MleSettings& settings, std::span<const double> theta, const EmpiricalMeasure& m);

// Gaussian: closed-form (mean, biased variance). Logistic: Newton-Raphson on
// (intercept, features...) with the label in the last coordinate.
MleResult rho_mle(const EmpiricalMeasure& part, const MleSettings& settings);

struct MleCandidate {
    std::size_t part = 0;
    MleResult result;
};

// First stage: re-scores every candidate on the full data and keeps the
// argmax (ties go to the earliest candidate). Candidates whose evaluation
// throws or is not finite are dropped with a note.
MleResult combine_mle(std::span<const MleCandidate> candidates,
                      const std::function<double(std::span<const double>)>& full_loglik,
                      std::vector<std::string>* notes = nullptr);
// Second stage: argmax of the repetition winners' full-data log-likelihood.
MleResult combine_mle_K(std::span<const MleResult> winners);

// ---- k nearest neighbours ---------------------------------------------------

// Euclidean distance over every coordinate except label_dim.
double feature_distance(std::span<const double> point, std::span<const double> query,
                        std::optional<std::size_t> label_dim);

KnnResult rho_knn(const EmpiricalMeasure& part, std::span<const double> query, std::size_t k,
                  std::optional<std::size_t> label_dim = std::nullopt);
// Global k nearest among the per-part lists, ordered by (distance, index).
// A parent index appearing in several lists is kept once.
KnnResult combine_knn(std::span<const KnnResult> lists, std::size_t k);
// Majority label; ties go to the smaller summed distance, then the smaller label.
std::int64_t classify_knn(std::span<const Neighbor> neighbors, std::optional<std::size_t> label_dim);

// ---- outliers ---------------------------------------------------------------

struct RobustScale {
    double median = 0.0;
    double mad = 0.0;
};

RobustScale robust_scale(std::vector<double> values);
// |x - median| / (1.4826 * MAD); zero when MAD is zero.
double robust_score(double x, const RobustScale& scale);

OutlierResult rho_outlier(const EmpiricalMeasure& part, double c, std::size_t key_dim = 0);
OutlierResult combine_outlier_L(std::span<const OutlierResult> parts, const CombinerOptions& options,
                                std::size_t n_total);
OutlierResult combine_outlier_K(std::span<const OutlierResult> repetitions, double tau);

}  // namespace parcon
