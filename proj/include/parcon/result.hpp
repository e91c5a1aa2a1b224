#pragma once

#include "parcon/exact_sum.hpp"
#include "parcon/measure.hpp"

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

namespace parcon {

struct MeanResult {
    std::vector<double> mean;
    std::uint64_t count = 0;
    // Exact per-coordinate sums backing `mean`; combiners work on these so a
    // partitioned mean rounds exactly like the single-pass mean.
    std::vector<ExactSum> sums;

    static MeanResult from_mean(std::vector<double> mean, std::uint64_t count);
};

// Points in ascending lexicographic order, ties broken by parent index.
struct SortedResult {
    std::size_t dim = 1;
    std::vector<double> rows;
    std::vector<std::size_t> indices;

    std::size_t size() const noexcept { return indices.size(); }
    std::span<const double> point(std::size_t i) const { return {rows.data() + i * dim, dim}; }
};

struct ExtremesResult {
    DataPoint min;
    DataPoint max;
    std::size_t min_index = 0;
    std::size_t max_index = 0;
    std::uint64_t count = 0;
};

struct HistogramResult {
    std::vector<double> edges;
    std::vector<std::uint64_t> counts;
};

struct PValueResult {
    double p = 1.0;
};

struct MleResult {
    std::vector<double> theta;
    double loglik = 0.0;
    bool converged = true;
    std::size_t iterations = 0;
};

struct Neighbor {
    std::size_t index = 0;
    DataPoint point;
    double distance = 0.0;
};

struct KnnResult {
    std::vector<Neighbor> neighbors;
    // Set when a part held fewer than k points and returned all of them.
    bool truncated = false;
};

// Disjoint split of a part into data and outlier sections. The value arrays
// run parallel to the index arrays and hold the detector's coordinate.
struct OutlierResult {
    std::vector<std::size_t> data_idx;
    std::vector<std::size_t> outlier_idx;
    std::vector<double> data_values;
    std::vector<double> outlier_values;
};

using ResultValue = std::variant<MeanResult, SortedResult, ExtremesResult, HistogramResult, PValueResult, MleResult,
                                 KnnResult, OutlierResult>;

std::string_view result_kind(const ResultValue& r);

// Throws InvariantViolation when the declared invariant of the variant does
// not hold. `part_size`, when non-zero, is the n_i the result must account for
// (histogram totals, outlier cover).
void check_invariants(const ResultValue& r, std::size_t part_size = 0);

}  // namespace parcon
