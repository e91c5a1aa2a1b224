#include "parcon/error.hpp"
#include "parcon/solutions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

namespace parcon {

namespace {

constexpr double kMadToSigma = 1.4826;

double median_in_place(std::vector<double>& v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

struct Entry {
    std::size_t index;
    double value;
};

OutlierResult assemble(const std::map<std::size_t, double>& data, const std::map<std::size_t, double>& outliers) {
    OutlierResult out;
    for (const auto& [index, value] : outliers) {
        out.outlier_idx.push_back(index);
        out.outlier_values.push_back(value);
    }
    for (const auto& [index, value] : data) {
        if (outliers.count(index) != 0) continue;
        out.data_idx.push_back(index);
        out.data_values.push_back(value);
    }
    return out;
}

}  // namespace

RobustScale robust_scale(std::vector<double> values) {
    if (values.empty()) fail(ErrorCode::EmptyInput, "robust scale of no values");
    RobustScale out;
    out.median = median_in_place(values);
    for (auto& v : values) v = std::abs(v - out.median);
    out.mad = median_in_place(values);
    return out;
}

double robust_score(double x, const RobustScale& scale) {
    if (scale.mad == 0.0) return 0.0;
    return std::abs(x - scale.median) / (scale.mad * kMadToSigma);
}

OutlierResult rho_outlier(const EmpiricalMeasure& part, double c, std::size_t key_dim) {
    if (!(c > 0.0)) fail(ErrorCode::InvalidSpec, "outlier threshold must be positive");
    const auto values = part.column(key_dim);
    const RobustScale scale = robust_scale(values);
    OutlierResult out;
    std::unordered_set<std::size_t> seen;
    for (std::size_t i = 0; i < part.size(); ++i) {
        const std::size_t index = part.parent_index(i);
        if (!seen.insert(index).second) continue;
        if (robust_score(values[i], scale) > c) {
            out.outlier_idx.push_back(index);
            out.outlier_values.push_back(values[i]);
        } else {
            out.data_idx.push_back(index);
            out.data_values.push_back(values[i]);
        }
    }
    return out;
}

OutlierResult combine_outlier_L(std::span<const OutlierResult> parts, const CombinerOptions& options,
                                std::size_t n_total) {
    if (parts.empty()) fail(ErrorCode::EmptyInput, "no outlier splits to combine");
    const double c = options.c;

    // A flagged point that looks ordinary against the other parts' data
    // sections is demoted.
    std::vector<Entry> survivors;
    std::map<std::size_t, double> data;
    for (std::size_t l = 0; l < parts.size(); ++l) {
        for (std::size_t j = 0; j < parts[l].data_idx.size(); ++j) data.emplace(parts[l].data_idx[j], parts[l].data_values[j]);
        if (parts[l].outlier_idx.empty()) continue;

        std::vector<double> others;
        for (std::size_t m = 0; m < parts.size(); ++m)
            if (m != l) others.insert(others.end(), parts[m].data_values.begin(), parts[m].data_values.end());
        const bool can_check = !others.empty();
        const RobustScale scale = can_check ? robust_scale(std::move(others)) : RobustScale{};
        for (std::size_t j = 0; j < parts[l].outlier_idx.size(); ++j) {
            const Entry e{parts[l].outlier_idx[j], parts[l].outlier_values[j]};
            if (can_check && robust_score(e.value, scale) <= c)
                data.emplace(e.index, e.value);
            else
                survivors.push_back(e);
        }
    }

    // Surviving outliers that together form a large enough, internally
    // homogeneous group are a data section of their own.
    const auto threshold = std::max<std::size_t>(
        options.pool_min, static_cast<std::size_t>(std::ceil(options.pool_fraction * static_cast<double>(n_total))));
    std::vector<Entry> group = survivors;
    bool homogeneous = false;
    while (group.size() >= threshold) {
        std::vector<double> values;
        for (const auto& e : group) values.push_back(e.value);
        const RobustScale scale = robust_scale(std::move(values));
        std::vector<Entry> kept;
        for (const auto& e : group)
            if (robust_score(e.value, scale) <= c) kept.push_back(e);
        if (kept.size() == group.size()) {
            homogeneous = true;
            break;
        }
        group = std::move(kept);
    }
    std::unordered_set<std::size_t> demoted;
    if (homogeneous) {
        for (const auto& e : group) demoted.insert(e.index);
    }

    std::map<std::size_t, double> outliers;
    for (const auto& e : survivors) {
        if (demoted.count(e.index) != 0)
            data.emplace(e.index, e.value);
        else
            outliers.emplace(e.index, e.value);
    }
    return assemble(data, outliers);
}

OutlierResult combine_outlier_K(std::span<const OutlierResult> repetitions, double tau) {
    if (repetitions.empty()) fail(ErrorCode::EmptyInput, "no repetition splits to combine");
    if (!(tau > 0.0 && tau <= 1.0)) fail(ErrorCode::InvalidSpec, "tau must lie in (0, 1]");
    const auto needed = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(tau * static_cast<double>(repetitions.size()) - 1e-9)));

    std::map<std::size_t, std::size_t> flags;
    std::map<std::size_t, double> values;
    for (const auto& rep : repetitions) {
        for (std::size_t j = 0; j < rep.outlier_idx.size(); ++j) {
            ++flags[rep.outlier_idx[j]];
            values.emplace(rep.outlier_idx[j], rep.outlier_values[j]);
        }
        for (std::size_t j = 0; j < rep.data_idx.size(); ++j) values.emplace(rep.data_idx[j], rep.data_values[j]);
    }
    std::map<std::size_t, double> outliers;
    for (const auto& [index, count] : flags)
        if (count >= needed) outliers.emplace(index, values.at(index));
    return assemble(values, outliers);
}

}  // namespace parcon
