#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace parcon {

using DataPoint = std::vector<double>;

// A dataset viewed as a uniformly weighted finite measure: n points of common
// dimension d, each carrying mass 1/n. Points are stored row-major. A measure
// obtained by restricting a parent carries the parent index of every point;
// a root measure's parent indices are 0..n-1.
class EmpiricalMeasure {
public:
    // Takes ownership of a row-major buffer. Validates shape and finiteness.
    EmpiricalMeasure(std::vector<double> rows, std::size_t dim, std::vector<std::size_t> parent_indices = {});

    std::size_t size() const noexcept { return n_; }
    std::size_t dim() const noexcept { return dim_; }

    std::span<const double> point(std::size_t i) const { return {rows_.data() + i * dim_, dim_}; }
    double at(std::size_t i, std::size_t coord) const { return rows_[i * dim_ + coord]; }
    std::size_t parent_index(std::size_t i) const { return parent_.empty() ? i : parent_[i]; }
    bool has_parent_map() const noexcept { return !parent_.empty(); }

    std::span<const double> rows() const noexcept { return rows_; }
    std::vector<DataPoint> points() const;
    std::vector<double> column(std::size_t coord) const;

    // Same points in the same order with the same parent indices.
    friend bool operator==(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

private:
    std::vector<double> rows_;
    std::size_t dim_ = 0;
    std::size_t n_ = 0;
    std::vector<std::size_t> parent_;
};

EmpiricalMeasure measure_from_points(std::span<const DataPoint> points);

struct EvalVector {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    friend bool operator==(const EvalVector&, const EvalVector&) = default;
};

// Euclidean distance in evaluation space.
double eval_distance(const EvalVector& a, const EvalVector& b);

// Lexicographic comparison of two points of equal dimension.
bool lex_less(std::span<const double> a, std::span<const double> b);

}  // namespace parcon
