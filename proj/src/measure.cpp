#include "parcon/measure.hpp"

#include "parcon/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace parcon {

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> rows, std::size_t dim, std::vector<std::size_t> parent_indices)
    : rows_(std::move(rows)), dim_(dim), parent_(std::move(parent_indices)) {
    if (dim_ == 0) fail(ErrorCode::DimensionMismatch, "dimension must be at least 1");
    if (rows_.empty()) fail(ErrorCode::EmptyInput, "a measure needs at least one point");
    if (rows_.size() % dim_ != 0)
        fail(ErrorCode::DimensionMismatch,
             "buffer of " + std::to_string(rows_.size()) + " values is not a multiple of d=" + std::to_string(dim_));
    n_ = rows_.size() / dim_;
    if (!parent_.empty() && parent_.size() != n_)
        fail(ErrorCode::DimensionMismatch, "parent index map length differs from point count");
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (!std::isfinite(rows_[i]))
            fail(ErrorCode::NonfiniteValue,
                 "point " + std::to_string(i / dim_) + " coordinate " + std::to_string(i % dim_) + " is not finite");
    }
}

std::vector<DataPoint> EmpiricalMeasure::points() const {
    std::vector<DataPoint> out;
    out.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        auto p = point(i);
        out.emplace_back(p.begin(), p.end());
    }
    return out;
}

std::vector<double> EmpiricalMeasure::column(std::size_t coord) const {
    if (coord >= dim_) fail(ErrorCode::IndexOutOfRange, "column " + std::to_string(coord) + " >= d");
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = at(i, coord);
    return out;
}

bool operator==(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    if (a.dim_ != b.dim_ || a.rows_ != b.rows_) return false;
    for (std::size_t i = 0; i < a.n_; ++i)
        if (a.parent_index(i) != b.parent_index(i)) return false;
    return true;
}

EmpiricalMeasure measure_from_points(std::span<const DataPoint> points) {
    if (points.empty()) fail(ErrorCode::EmptyInput, "no points given");
    const std::size_t dim = points.front().size();
    if (dim == 0) fail(ErrorCode::DimensionMismatch, "points must have at least one coordinate");
    std::vector<double> rows;
    rows.reserve(points.size() * dim);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].size() != dim)
            fail(ErrorCode::DimensionMismatch, "point " + std::to_string(i) + " has " +
                                                   std::to_string(points[i].size()) + " coordinates, expected " +
                                                   std::to_string(dim));
        rows.insert(rows.end(), points[i].begin(), points[i].end());
    }
    return EmpiricalMeasure(std::move(rows), dim);
}

double eval_distance(const EvalVector& a, const EvalVector& b) {
    if (a.size() != b.size())
        fail(ErrorCode::DimensionMismatch,
             "eval vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

bool lex_less(std::span<const double> a, std::span<const double> b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace parcon
