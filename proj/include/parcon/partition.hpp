#pragma once

#include "parcon/measure.hpp"
#include "parcon/random.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace parcon {

enum class PartitionScheme { RandomBalanced, RangeBounded, Subsample };

// Partition: disjoint cover of all indices. Subsample: overlapping draws.
enum class PartitionMode { Partition, Subsample };

std::string_view to_string(PartitionScheme scheme);
PartitionScheme parse_scheme(std::string_view name);

struct PartitionerSpec {
    PartitionScheme scheme = PartitionScheme::RandomBalanced;
    std::size_t L = 1;
    std::uint64_t base_seed = 0;
    // RangeBounded: L+1 strictly increasing bounds applied to coordinate key_dim.
    std::vector<double> bounds;
    std::size_t key_dim = 0;
    // Subsample: draws per part, with replacement.
    std::size_t part_size = 0;

    PartitionMode mode() const noexcept {
        return scheme == PartitionScheme::Subsample ? PartitionMode::Subsample : PartitionMode::Partition;
    }
    // Throws InvalidSpec on shape errors that do not depend on the data.
    void validate() const;

    friend bool operator==(const PartitionerSpec&, const PartitionerSpec&) = default;
};

struct PartitionAssignment {
    std::vector<std::vector<std::size_t>> parts;  // each sorted ascending
    PartitionMode mode = PartitionMode::Partition;
    std::size_t L = 0;
    std::uint64_t seed = 0;
};

// Streams points (in ascending index order) to the parts of one sampled
// partitioning. RandomBalanced evaluates a keyed permutation per index and
// RangeBounded reads the key coordinate, so neither stores an index table;
// Subsample keeps the L * part_size drawn indices.
class PartRouter {
public:
    PartRouter(const PartitionerSpec& spec, std::size_t n, std::size_t repetition);

    std::size_t parts() const noexcept { return L_; }
    std::uint64_t seed() const noexcept { return seed_; }
    PartitionMode mode() const noexcept { return mode_; }

    // Calls deliver(part) once per delivery of point `index`: exactly once in
    // Partition mode, with multiplicity (possibly zero) in Subsample mode.
    // Indices must be visited in increasing order between calls to restart().
    template <class Deliver>
    void route(std::size_t index, std::span<const double> point, Deliver&& deliver) {
        switch (scheme_) {
        case PartitionScheme::RandomBalanced:
            deliver(balanced_part(index));
            break;
        case PartitionScheme::RangeBounded:
            deliver(range_part(index, point));
            break;
        case PartitionScheme::Subsample:
            while (cursor_ < draws_.size() && draws_[cursor_].first < index) ++cursor_;
            while (cursor_ < draws_.size() && draws_[cursor_].first == index) deliver(draws_[cursor_++].second);
            break;
        }
    }

    void restart() noexcept { cursor_ = 0; }

private:
    std::size_t balanced_part(std::size_t index) const;
    std::size_t range_part(std::size_t index, std::span<const double> point) const;

    PartitionScheme scheme_;
    PartitionMode mode_;
    std::size_t n_;
    std::size_t L_;
    std::uint64_t seed_;
    IndexPermutation permutation_;
    std::vector<double> bounds_;
    std::size_t key_dim_ = 0;
    std::vector<std::pair<std::size_t, std::size_t>> draws_;  // (index, part), sorted
    std::size_t cursor_ = 0;
};

PartitionAssignment sample_partition(const PartitionerSpec& spec, const EmpiricalMeasure& m,
                                     std::size_t repetition_index);

struct QuantileBounds {
    std::vector<double> bounds;
    std::size_t requested_L = 0;
    std::size_t effective_L() const noexcept { return bounds.size() - 1; }
    bool collapsed() const noexcept { return effective_L() < requested_L; }
};

// Single-pass collector behind quantile_bounds: tracks the exact range and a
// seeded uniform reservoir of at most `budget` key values.
class QuantileSketch {
public:
    QuantileSketch(std::size_t budget, std::uint64_t seed);

    void offer(double value);
    std::size_t seen() const noexcept { return seen_; }
    QuantileBounds finish(std::size_t L) const;

private:
    std::size_t budget_;
    Rng rng_;
    std::size_t seen_ = 0;
    double min_ = 0.0;
    double max_ = 0.0;
    std::vector<double> reservoir_;
};

QuantileBounds quantile_bounds(const EmpiricalMeasure& m, std::size_t L, std::size_t key_dim,
                               std::size_t sample_budget, std::uint64_t seed);

EmpiricalMeasure restrict(const EmpiricalMeasure& m, std::span<const std::size_t> part);

}  // namespace parcon
