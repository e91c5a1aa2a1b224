#include "parcon/partition.hpp"

#include "parcon/error.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <string>

namespace parcon {

std::string_view to_string(PartitionScheme scheme) {
    switch (scheme) {
    case PartitionScheme::RandomBalanced: return "random_balanced";
    case PartitionScheme::RangeBounded: return "range_bounded";
    case PartitionScheme::Subsample: return "subsample";
    }
    return "unknown";
}

PartitionScheme parse_scheme(std::string_view name) {
    if (name == "random_balanced") return PartitionScheme::RandomBalanced;
    if (name == "range_bounded") return PartitionScheme::RangeBounded;
    if (name == "subsample") return PartitionScheme::Subsample;
    fail(ErrorCode::InvalidSpec, "unknown partition scheme '" + std::string(name) + "'");
}

void PartitionerSpec::validate() const {
    if (L < 1) fail(ErrorCode::InvalidPartitionCount, "L must be at least 1");
    switch (scheme) {
    case PartitionScheme::RandomBalanced: break;
    case PartitionScheme::RangeBounded:
        if (bounds.size() != L + 1)
            fail(ErrorCode::InvalidSpec, "range_bounded needs L+1=" + std::to_string(L + 1) + " bounds, got " +
                                             std::to_string(bounds.size()));
        for (std::size_t i = 0; i < bounds.size(); ++i) {
            if (!std::isfinite(bounds[i])) fail(ErrorCode::InvalidSpec, "bounds must be finite");
            if (i > 0 && !(bounds[i - 1] < bounds[i]))
                fail(ErrorCode::InvalidSpec, "bounds must be strictly increasing (position " + std::to_string(i) + ")");
        }
        break;
    case PartitionScheme::Subsample:
        if (part_size < 1) fail(ErrorCode::InvalidSpec, "subsample part_size must be at least 1");
        break;
    }
}

PartRouter::PartRouter(const PartitionerSpec& spec, std::size_t n, std::size_t repetition)
    : scheme_(spec.scheme),
      mode_(spec.mode()),
      n_(n),
      L_(spec.L),
      seed_(spec.scheme == PartitionScheme::RangeBounded ? spec.base_seed
                                                          : repetition_seed(spec.base_seed, repetition)),
      permutation_(spec.scheme == PartitionScheme::RandomBalanced ? n : 1, seed_),
      bounds_(spec.bounds),
      key_dim_(spec.key_dim) {
    spec.validate();
    if (n_ == 0) fail(ErrorCode::EmptyInput, "cannot partition an empty measure");
    if (mode_ == PartitionMode::Partition && L_ > n_)
        fail(ErrorCode::InvalidPartitionCount,
             "L=" + std::to_string(L_) + " exceeds n=" + std::to_string(n_) + " in partition mode");
    if (scheme_ == PartitionScheme::Subsample) {
        Rng rng(seed_);
        draws_.reserve(L_ * spec.part_size);
        for (std::size_t part = 0; part < L_; ++part)
            for (std::size_t j = 0; j < spec.part_size; ++j) draws_.emplace_back(rng.below(n_), part);
        std::sort(draws_.begin(), draws_.end());
    }
}

std::size_t PartRouter::balanced_part(std::size_t index) const {
    const std::size_t position = permutation_(index);
    const std::size_t base = n_ / L_;
    const std::size_t extra = n_ % L_;
    const std::size_t big_span = extra * (base + 1);
    if (position < big_span) return position / (base + 1);
    return extra + (position - big_span) / base;
}

std::size_t PartRouter::range_part(std::size_t index, std::span<const double> point) const {
    if (key_dim_ >= point.size())
        fail(ErrorCode::IndexOutOfRange, "key_dim " + std::to_string(key_dim_) + " >= d=" + std::to_string(point.size()));
    const double key = point[key_dim_];
    if (key < bounds_.front() || !(key < bounds_.back()))
        fail(ErrorCode::BoundsDoNotCover, "point " + std::to_string(index) + " key " + std::to_string(key) +
                                              " outside [" + std::to_string(bounds_.front()) + ", " +
                                              std::to_string(bounds_.back()) + ")");
    const auto it = std::upper_bound(bounds_.begin(), bounds_.end(), key);
    return static_cast<std::size_t>(it - bounds_.begin()) - 1;
}

PartitionAssignment sample_partition(const PartitionerSpec& spec, const EmpiricalMeasure& m,
                                     std::size_t repetition_index) {
    PartRouter router(spec, m.size(), repetition_index);
    PartitionAssignment out;
    out.mode = spec.mode();
    out.L = spec.L;
    out.seed = router.seed();
    out.parts.resize(spec.L);
    for (std::size_t i = 0; i < m.size(); ++i)
        router.route(i, m.point(i), [&](std::size_t part) { out.parts[part].push_back(i); });
    for (std::size_t l = 0; l < out.parts.size(); ++l) {
        if (out.parts[l].empty()) fail(ErrorCode::EmptyPart, "part " + std::to_string(l) + " received no points");
    }
    return out;
}

QuantileSketch::QuantileSketch(std::size_t budget, std::uint64_t seed) : budget_(budget), rng_(seed) {
    if (budget_ < 1) fail(ErrorCode::InvalidSpec, "sample budget must be positive");
}

void QuantileSketch::offer(double value) {
    if (seen_ == 0) {
        min_ = max_ = value;
    } else {
        min_ = std::min(min_, value);
        max_ = std::max(max_, value);
    }
    ++seen_;
    if (reservoir_.size() < budget_) {
        reservoir_.push_back(value);
    } else {
        const std::size_t slot = rng_.below(seen_);
        if (slot < budget_) reservoir_[slot] = value;
    }
}

QuantileBounds QuantileSketch::finish(std::size_t L) const {
    if (seen_ == 0) fail(ErrorCode::EmptyInput, "no values to compute quantile bounds from");
    if (L < 1) fail(ErrorCode::InvalidPartitionCount, "L must be at least 1");

    std::vector<double> sample = reservoir_;
    std::sort(sample.begin(), sample.end());
    const double scale = std::max({std::abs(min_), std::abs(max_), 1.0});
    const double margin = scale * 16.0 * DBL_EPSILON;
    const double lo = min_ - margin;
    const double hi = max_ + margin;

    // Interpolated sample quantiles at j/L (linear between order statistics).
    std::vector<double> bounds{lo};
    const double last = static_cast<double>(sample.size() - 1);
    for (std::size_t j = 1; j < L; ++j) {
        const double h = last * static_cast<double>(j) / static_cast<double>(L);
        const auto below = static_cast<std::size_t>(std::floor(h));
        const std::size_t above = std::min(below + 1, sample.size() - 1);
        const double q = sample[below] + (h - static_cast<double>(below)) * (sample[above] - sample[below]);
        if (q > bounds.back() && q < hi) bounds.push_back(q);
    }
    bounds.push_back(hi);

    // Merge parts that hold no sampled value; when the sample is the whole
    // data this guarantees every part is non-empty.
    for (bool changed = true; changed && bounds.size() > 2;) {
        changed = false;
        for (std::size_t j = 0; j + 1 < bounds.size(); ++j) {
            const auto first = std::lower_bound(sample.begin(), sample.end(), bounds[j]);
            const auto past = std::lower_bound(sample.begin(), sample.end(), bounds[j + 1]);
            if (first != past) continue;
            const std::size_t drop = (j + 2 < bounds.size()) ? j + 1 : j;
            bounds.erase(bounds.begin() + static_cast<std::ptrdiff_t>(drop));
            changed = true;
            break;
        }
    }
    return QuantileBounds{std::move(bounds), L};
}

QuantileBounds quantile_bounds(const EmpiricalMeasure& m, std::size_t L, std::size_t key_dim,
                               std::size_t sample_budget, std::uint64_t seed) {
    if (key_dim >= m.dim()) fail(ErrorCode::IndexOutOfRange, "key_dim " + std::to_string(key_dim) + " >= d");
    QuantileSketch sketch(sample_budget, seed);
    for (std::size_t i = 0; i < m.size(); ++i) sketch.offer(m.at(i, key_dim));
    return sketch.finish(L);
}

EmpiricalMeasure restrict(const EmpiricalMeasure& m, std::span<const std::size_t> part) {
    if (part.empty()) fail(ErrorCode::EmptyPart, "cannot restrict to an empty part");
    std::vector<std::size_t> order(part.begin(), part.end());
    std::stable_sort(order.begin(), order.end());
    if (order.back() >= m.size())
        fail(ErrorCode::IndexOutOfRange,
             "index " + std::to_string(order.back()) + " out of range for n=" + std::to_string(m.size()));
    std::vector<double> rows;
    rows.reserve(order.size() * m.dim());
    std::vector<std::size_t> parents;
    parents.reserve(order.size());
    for (auto i : order) {
        auto p = m.point(i);
        rows.insert(rows.end(), p.begin(), p.end());
        parents.push_back(m.parent_index(i));
    }
    return EmpiricalMeasure(std::move(rows), m.dim(), std::move(parents));
}

}  // namespace parcon
