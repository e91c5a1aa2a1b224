#include "parcon/solutions.hpp"

#include "parcon/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace parcon {

std::string_view to_string(ProblemKind kind) {
    switch (kind) {
    case ProblemKind::Mean: return "mean";
    case ProblemKind::Sort: return "sort";
    case ProblemKind::Extremes: return "extremes";
    case ProblemKind::Histogram: return "histogram";
    case ProblemKind::Test: return "test";
    case ProblemKind::Mle: return "mle";
    case ProblemKind::Knn: return "knn";
    case ProblemKind::Outlier: return "outlier";
    }
    return "unknown";
}

std::string_view to_string(MleModel model) {
    return model == MleModel::GaussianMeanVar ? "gaussian" : "logistic";
}

std::string_view to_string(PValueAdjust adjust) { return adjust == PValueAdjust::None ? "none" : "bonferroni"; }

ProblemKind parse_problem(std::string_view name) {
    for (auto kind : {ProblemKind::Mean, ProblemKind::Sort, ProblemKind::Extremes, ProblemKind::Histogram,
                      ProblemKind::Test, ProblemKind::Mle, ProblemKind::Knn, ProblemKind::Outlier}) {
        if (to_string(kind) == name) return kind;
    }
    if (name == "cluster" || name == "decision_tree")
        fail(ErrorCode::InvalidSpec, "problem '" + std::string(name) + "' is reserved but not shipped");
    fail(ErrorCode::InvalidSpec, "unknown problem '" + std::string(name) + "'");
}

MleModel parse_model(std::string_view name) {
    if (name == "gaussian") return MleModel::GaussianMeanVar;
    if (name == "logistic") return MleModel::LogisticRegression;
    fail(ErrorCode::InvalidSpec, "unknown mle model '" + std::string(name) + "'");
}

PValueAdjust parse_adjust(std::string_view name) {
    if (name == "none") return PValueAdjust::None;
    if (name == "bonferroni") return PValueAdjust::Bonferroni;
    fail(ErrorCode::InvalidSpec, "unknown p-value adjustment '" + std::string(name) + "'");
}

bool is_streaming(ProblemKind kind) {
    return kind == ProblemKind::Mean || kind == ProblemKind::Extremes || kind == ProblemKind::Histogram ||
           kind == ProblemKind::Test;
}

void SolutionSpec::validate() const {
    if (K < 1) fail(ErrorCode::InvalidSpec, "K must be at least 1");
    partitioner.validate();
    const auto& p = params;
    switch (problem) {
    case ProblemKind::Sort:
        if (partitioner.scheme != PartitionScheme::RangeBounded || partitioner.key_dim != 0)
            fail(ErrorCode::NonViableCombiner,
                 "sort concatenation needs a range_bounded partitioner on coordinate 0");
        break;
    case ProblemKind::Histogram:
        if (p.edges.size() < 2) fail(ErrorCode::InvalidSpec, "histogram needs at least two edges");
        for (std::size_t i = 1; i < p.edges.size(); ++i)
            if (!(p.edges[i - 1] < p.edges[i])) fail(ErrorCode::InvalidSpec, "histogram edges must be ascending");
        break;
    case ProblemKind::Test:
        if (!std::isfinite(p.mu0)) fail(ErrorCode::InvalidSpec, "mu0 must be finite");
        if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) fail(ErrorCode::InvalidSpec, "sigma must be positive");
        break;
    case ProblemKind::Mle:
        if (!(p.tol > 0.0)) fail(ErrorCode::InvalidSpec, "tol must be positive");
        if (p.max_iter < 1) fail(ErrorCode::InvalidSpec, "max_iter must be at least 1");
        break;
    case ProblemKind::Knn:
        if (p.k < 1) fail(ErrorCode::InvalidK, "k must be at least 1");
        if (p.query.empty()) fail(ErrorCode::InvalidSpec, "knn needs a query point");
        break;
    case ProblemKind::Outlier:
        if (!(combiner.c > 0.0)) fail(ErrorCode::InvalidSpec, "outlier threshold c must be positive");
        if (!(combiner.tau > 0.0 && combiner.tau <= 1.0)) fail(ErrorCode::InvalidSpec, "tau must lie in (0, 1]");
        break;
    case ProblemKind::Mean:
    case ProblemKind::Extremes: break;
    }
}

void SolutionSpec::validate_for(std::size_t dim) const {
    validate();
    if (partitioner.scheme == PartitionScheme::RangeBounded && partitioner.key_dim >= dim)
        fail(ErrorCode::InvalidSpec, "partitioner key_dim out of range for d=" + std::to_string(dim));
    const bool one_dimensional = problem == ProblemKind::Histogram || problem == ProblemKind::Test ||
                                 problem == ProblemKind::Outlier ||
                                 (problem == ProblemKind::Mle && params.model == MleModel::GaussianMeanVar);
    if (one_dimensional && params.key_dim >= dim)
        fail(ErrorCode::InvalidSpec, "key_dim " + std::to_string(params.key_dim) + " out of range for d=" +
                                         std::to_string(dim));
    if (params.label_dim && *params.label_dim >= dim)
        fail(ErrorCode::InvalidSpec, "label_dim out of range for d=" + std::to_string(dim));
    if (problem == ProblemKind::Knn) {
        const std::size_t features = dim - (params.label_dim ? 1 : 0);
        if (params.query.size() != features)
            fail(ErrorCode::DimensionMismatch, "query has " + std::to_string(params.query.size()) +
                                                   " coordinates, data has " + std::to_string(features) +
                                                   " features");
    }
    if (problem == ProblemKind::Mle && !params.init.empty() &&
        params.init.size() != mle_parameter_count(params.model, dim))
        fail(ErrorCode::DimensionMismatch, "init has the wrong number of parameters");
}

std::size_t eval_length(const SolutionSpec& spec, std::size_t dim) {
    switch (spec.problem) {
    case ProblemKind::Mean: return dim + 1;
    case ProblemKind::Sort: return 4;
    case ProblemKind::Extremes: return 2 * dim;
    case ProblemKind::Histogram: return spec.params.edges.size() - 1;
    case ProblemKind::Test: return 1;
    case ProblemKind::Mle: return mle_parameter_count(spec.params.model, dim) + 1;
    case ProblemKind::Knn: return spec.params.k;
    case ProblemKind::Outlier: return 2;
    }
    return 0;
}

namespace {

struct EvOf {
    EvalVector operator()(const MeanResult& r) const {
        EvalVector out{r.mean};
        out.values.push_back(static_cast<double>(r.count));
        return out;
    }

    // (count, first key, last key, rank-weighted mean of the key); the last
    // component is sensitive to the order of the run.
    EvalVector operator()(const SortedResult& r) const {
        const std::size_t n = r.size();
        if (n == 0) return EvalVector{{0.0, 0.0, 0.0, 0.0}};
        ExactSum weighted;
        for (std::size_t j = 0; j < n; ++j) weighted.add_product(static_cast<double>(j + 1), r.point(j)[0]);
        const double total_weight = 0.5 * static_cast<double>(n) * static_cast<double>(n + 1);
        return EvalVector{{static_cast<double>(n), r.point(0)[0], r.point(n - 1)[0], weighted.value() / total_weight}};
    }

    EvalVector operator()(const ExtremesResult& r) const {
        EvalVector out{r.min};
        out.values.insert(out.values.end(), r.max.begin(), r.max.end());
        return out;
    }

    EvalVector operator()(const HistogramResult& r) const {
        EvalVector out;
        for (auto c : r.counts) out.values.push_back(static_cast<double>(c));
        return out;
    }

    EvalVector operator()(const PValueResult& r) const { return EvalVector{{r.p}}; }

    EvalVector operator()(const MleResult& r) const {
        EvalVector out{r.theta};
        out.values.push_back(r.loglik);
        return out;
    }

    EvalVector operator()(const KnnResult& r) const {
        EvalVector out;
        for (const auto& nb : r.neighbors) out.values.push_back(nb.distance);
        return out;
    }

    EvalVector operator()(const OutlierResult& r) const {
        ExactSum sum;
        for (double v : r.outlier_values) sum.add(v);
        const double count = static_cast<double>(r.outlier_idx.size());
        return EvalVector{{count, count > 0 ? sum.value() / count : 0.0}};
    }
};

}  // namespace

EvalVector ev(const ResultValue& result) { return std::visit(EvOf{}, result); }

// ---- mean -------------------------------------------------------------------

void MeanAccumulator::add(std::span<const double> point) {
    if (point.size() != sums_.size()) fail(ErrorCode::DimensionMismatch, "point dimension differs from accumulator");
    for (std::size_t j = 0; j < point.size(); ++j) sums_[j].add(point[j]);
    ++count_;
}

MeanResult MeanAccumulator::finish() const {
    if (count_ == 0) fail(ErrorCode::EmptyPart, "mean of an empty part");
    MeanResult r;
    r.count = count_;
    r.sums = sums_;
    r.mean.reserve(sums_.size());
    for (const auto& s : sums_) r.mean.push_back(s.quotient(count_));
    return r;
}

MeanResult rho_mean(const EmpiricalMeasure& part) {
    MeanAccumulator acc(part.dim());
    for (std::size_t i = 0; i < part.size(); ++i) acc.add(part.point(i));
    return acc.finish();
}

namespace {

std::vector<ExactSum> sums_of(const MeanResult& r) {
    if (!r.sums.empty()) return r.sums;
    return MeanResult::from_mean(r.mean, r.count).sums;
}

MeanResult pooled_mean(std::span<const MeanResult> results) {
    if (results.empty()) fail(ErrorCode::EmptyInput, "no mean results to combine");
    const std::size_t dim = results.front().mean.size();
    std::vector<ExactSum> total(dim);
    std::uint64_t count = 0;
    for (const auto& r : results) {
        if (r.mean.size() != dim) fail(ErrorCode::DimensionMismatch, "mean results differ in dimension");
        const auto sums = sums_of(r);
        for (std::size_t j = 0; j < dim; ++j) total[j] += sums[j];
        count += r.count;
    }
    if (count == 0) fail(ErrorCode::InvariantViolation, "combined mean count is zero");
    MeanResult out;
    out.count = count;
    out.sums = std::move(total);
    for (const auto& s : out.sums) out.mean.push_back(s.quotient(count));
    return out;
}

}  // namespace

MeanResult combine_mean_L(std::span<const MeanResult> results) { return pooled_mean(results); }

MeanResult combine_mean_K(std::span<const MeanResult> results) {
    MeanResult out = pooled_mean(results);
    out.count /= results.size();
    return out;
}

// ---- sort -------------------------------------------------------------------

SortedResult rho_sort(const EmpiricalMeasure& part) {
    std::vector<std::size_t> order(part.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto pa = part.point(a);
        const auto pb = part.point(b);
        if (lex_less(pa, pb)) return true;
        if (lex_less(pb, pa)) return false;
        return part.parent_index(a) < part.parent_index(b);
    });
    SortedResult out;
    out.dim = part.dim();
    out.rows.reserve(part.size() * part.dim());
    out.indices.reserve(part.size());
    for (auto i : order) {
        const auto p = part.point(i);
        out.rows.insert(out.rows.end(), p.begin(), p.end());
        out.indices.push_back(part.parent_index(i));
    }
    return out;
}

SortedResult combine_sort_L(std::span<const SortedResult> results, const PartitionerSpec& partitioner) {
    if (partitioner.scheme != PartitionScheme::RangeBounded || partitioner.key_dim != 0)
        fail(ErrorCode::NonViableCombiner, "concatenating sorted parts requires a range_bounded partition on "
                                           "coordinate 0");
    if (results.empty()) fail(ErrorCode::EmptyInput, "no sorted runs to combine");
    SortedResult out;
    out.dim = results.front().dim;
    for (const auto& r : results) {
        if (r.dim != out.dim) fail(ErrorCode::DimensionMismatch, "sorted runs differ in dimension");
        if (out.size() > 0 && r.size() > 0 && lex_less(r.point(0), out.point(out.size() - 1)))
            fail(ErrorCode::NonViableCombiner, "sorted runs overlap; parts are not range ordered");
        out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
        out.indices.insert(out.indices.end(), r.indices.begin(), r.indices.end());
    }
    return out;
}

// ---- extremes ---------------------------------------------------------------

void ExtremesAccumulator::add(std::size_t index, std::span<const double> point) {
    if (state_.count == 0) {
        state_.min.assign(point.begin(), point.end());
        state_.max = state_.min;
        state_.min_index = state_.max_index = index;
    } else {
        if (point.size() != state_.min.size()) fail(ErrorCode::DimensionMismatch, "extremes dimension mismatch");
        if (lex_less(point, state_.min) || (!lex_less(state_.min, point) && index < state_.min_index)) {
            state_.min.assign(point.begin(), point.end());
            state_.min_index = index;
        }
        if (lex_less(state_.max, point) || (!lex_less(point, state_.max) && index < state_.max_index)) {
            state_.max.assign(point.begin(), point.end());
            state_.max_index = index;
        }
    }
    ++state_.count;
}

ExtremesResult ExtremesAccumulator::finish() const {
    if (state_.count == 0) fail(ErrorCode::EmptyPart, "extremes of an empty part");
    return state_;
}

ExtremesResult rho_extremes(const EmpiricalMeasure& part) {
    ExtremesAccumulator acc;
    for (std::size_t i = 0; i < part.size(); ++i) acc.add(part.parent_index(i), part.point(i));
    return acc.finish();
}

ExtremesResult combine_extremes(std::span<const ExtremesResult> results) {
    if (results.empty()) fail(ErrorCode::EmptyInput, "no extremes to combine");
    ExtremesAccumulator acc;
    std::uint64_t count = 0;
    for (const auto& r : results) {
        acc.add(r.min_index, r.min);
        acc.add(r.max_index, r.max);
        count += r.count;
    }
    auto out = acc.finish();
    out.count = count;
    return out;
}

// ---- histogram --------------------------------------------------------------

HistogramAccumulator::HistogramAccumulator(std::vector<double> edges, std::size_t key_dim) : key_dim_(key_dim) {
    if (edges.size() < 2) fail(ErrorCode::InvalidSpec, "histogram needs at least two edges");
    result_.counts.assign(edges.size() - 1, 0);
    result_.edges = std::move(edges);
}

void HistogramAccumulator::add(std::span<const double> point) {
    if (key_dim_ >= point.size()) fail(ErrorCode::IndexOutOfRange, "histogram key_dim out of range");
    const double x = point[key_dim_];
    const auto& e = result_.edges;
    const auto it = std::upper_bound(e.begin(), e.end(), x);
    std::size_t bin = it == e.begin() ? 0 : static_cast<std::size_t>(it - e.begin()) - 1;
    bin = std::min(bin, result_.counts.size() - 1);
    ++result_.counts[bin];
}

HistogramResult rho_histogram(const EmpiricalMeasure& part, const std::vector<double>& edges, std::size_t key_dim) {
    HistogramAccumulator acc(edges, key_dim);
    for (std::size_t i = 0; i < part.size(); ++i) acc.add(part.point(i));
    return acc.finish();
}

HistogramResult combine_histogram(std::span<const HistogramResult> results) {
    if (results.empty()) fail(ErrorCode::EmptyInput, "no histograms to combine");
    HistogramResult out = results.front();
    for (std::size_t i = 1; i < results.size(); ++i) {
        if (results[i].edges != out.edges) fail(ErrorCode::BinMismatch, "parts report different histogram edges");
        for (std::size_t b = 0; b < out.counts.size(); ++b) out.counts[b] += results[i].counts[b];
    }
    return out;
}

// ---- testing ----------------------------------------------------------------

double z_test_pvalue(double mean, std::uint64_t n, double mu0, double sigma) {
    const double z = std::sqrt(static_cast<double>(n)) * (mean - mu0) / sigma;
    // 2 * (1 - Phi(|z|)) == erfc(|z| / sqrt(2)), without cancellation in the tail.
    const double p = std::erfc(std::abs(z) / std::sqrt(2.0));
    return std::clamp(p, 0.0, 1.0);
}

void TestAccumulator::add(std::span<const double> point) {
    if (key_dim_ >= point.size()) fail(ErrorCode::IndexOutOfRange, "test key_dim out of range");
    sum_.add(point[key_dim_]);
    ++count_;
}

PValueResult TestAccumulator::finish() const {
    if (count_ == 0) fail(ErrorCode::EmptyPart, "test on an empty part");
    const double mean = sum_.value() / static_cast<double>(count_);
    return PValueResult{z_test_pvalue(mean, count_, mu0_, sigma_)};
}

PValueResult rho_test(const EmpiricalMeasure& part, double mu0, double sigma, std::size_t key_dim) {
    TestAccumulator acc(mu0, sigma, key_dim);
    for (std::size_t i = 0; i < part.size(); ++i) acc.add(part.point(i));
    return acc.finish();
}

namespace {

void check_pvalues(std::span<const double> ps) {
    for (double p : ps)
        if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::InvariantViolation, "p-value " + std::to_string(p) + " outside [0,1]");
}

}  // namespace

PValueResult combine_test_L(std::span<const double> p_values, PValueAdjust adjust) {
    if (p_values.empty()) fail(ErrorCode::EmptyInput, "no p-values to combine");
    check_pvalues(p_values);
    double p = *std::min_element(p_values.begin(), p_values.end());
    if (adjust == PValueAdjust::Bonferroni) p = std::min(1.0, p * static_cast<double>(p_values.size()));
    return PValueResult{p};
}

PValueResult combine_test_K(std::span<const double> per_repetition) {
    if (per_repetition.empty()) fail(ErrorCode::EmptyInput, "no repetition p-values to combine");
    check_pvalues(per_repetition);
    std::vector<double> sorted(per_repetition.begin(), per_repetition.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    const double median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    return PValueResult{median};
}

PValueResult combine_test(const std::vector<std::vector<double>>& per_rep, PValueAdjust adjust) {
    std::vector<double> firsts;
    firsts.reserve(per_rep.size());
    for (const auto& ps : per_rep) firsts.push_back(combine_test_L(ps, adjust).p);
    return combine_test_K(firsts);
}

}  // namespace parcon
