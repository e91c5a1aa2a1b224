#include "parcon/result.hpp"

#include "parcon/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

namespace parcon {

MeanResult MeanResult::from_mean(std::vector<double> mean, std::uint64_t count) {
    MeanResult r;
    r.count = count;
    r.sums.resize(mean.size());
    for (std::size_t j = 0; j < mean.size(); ++j) r.sums[j].add_product(mean[j], static_cast<double>(count));
    r.mean = std::move(mean);
    return r;
}

std::string_view result_kind(const ResultValue& r) {
    static constexpr std::string_view names[] = {"mean", "sort", "extremes", "histogram",
                                                 "test", "mle",  "knn",      "outlier"};
    return names[r.index()];
}

namespace {

void violated(const std::string& what) { fail(ErrorCode::InvariantViolation, what); }

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct Checker {
    std::size_t part_size;

    void operator()(const MeanResult& r) const {
        if (r.count == 0) violated("mean count must be positive");
        if (!all_finite(r.mean)) violated("mean has non-finite coordinates");
        if (!r.sums.empty() && r.sums.size() != r.mean.size()) violated("mean sums/coordinates length mismatch");
    }

    void operator()(const SortedResult& r) const {
        if (r.dim == 0 || r.rows.size() != r.indices.size() * r.dim) violated("sorted run shape mismatch");
        for (std::size_t i = 1; i < r.size(); ++i) {
            if (lex_less(r.point(i), r.point(i - 1))) violated("sorted run decreases at position " + std::to_string(i));
        }
    }

    void operator()(const ExtremesResult& r) const {
        if (r.min.size() != r.max.size() || r.min.empty()) violated("extremes dimension mismatch");
        if (lex_less(r.max, r.min)) violated("extremes min exceeds max");
    }

    void operator()(const HistogramResult& r) const {
        if (r.edges.size() < 2 || r.counts.size() + 1 != r.edges.size()) violated("histogram edges/counts mismatch");
        for (std::size_t i = 1; i < r.edges.size(); ++i)
            if (!(r.edges[i - 1] < r.edges[i])) violated("histogram edges not ascending");
        const auto total = std::accumulate(r.counts.begin(), r.counts.end(), std::uint64_t{0});
        if (part_size != 0 && total != part_size)
            violated("histogram counts sum to " + std::to_string(total) + ", expected " + std::to_string(part_size));
    }

    void operator()(const PValueResult& r) const {
        if (!(r.p >= 0.0 && r.p <= 1.0)) violated("p-value outside [0,1]");
    }

    void operator()(const MleResult& r) const {
        if (r.theta.empty() || !all_finite(r.theta)) violated("mle theta empty or non-finite");
        if (std::isnan(r.loglik)) violated("mle log-likelihood is NaN");
    }

    void operator()(const KnnResult& r) const {
        for (std::size_t i = 0; i < r.neighbors.size(); ++i) {
            const double dist = r.neighbors[i].distance;
            if (!(dist >= 0.0) || !std::isfinite(dist)) violated("knn distance negative or non-finite");
            if (i > 0 && dist < r.neighbors[i - 1].distance) violated("knn distances not ascending");
        }
    }

    void operator()(const OutlierResult& r) const {
        if (r.data_idx.size() != r.data_values.size() || r.outlier_idx.size() != r.outlier_values.size())
            violated("outlier index/value arrays differ in length");
        std::unordered_set<std::size_t> data(r.data_idx.begin(), r.data_idx.end());
        for (auto i : r.outlier_idx)
            if (data.count(i) != 0) violated("index " + std::to_string(i) + " is both data and outlier");
        if (part_size != 0) {
            std::unordered_set<std::size_t> all = data;
            all.insert(r.outlier_idx.begin(), r.outlier_idx.end());
            if (all.size() != part_size) violated("outlier split does not cover the part");
        }
    }
};

}  // namespace

void check_invariants(const ResultValue& r, std::size_t part_size) { std::visit(Checker{part_size}, r); }

}  // namespace parcon
