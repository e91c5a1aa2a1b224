#include "parcon/error.hpp"
#include "parcon/solutions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

namespace parcon {

namespace {

bool closer(const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.index < b.index;
}

}  // namespace

double feature_distance(std::span<const double> point, std::span<const double> query,
                        std::optional<std::size_t> label_dim) {
    double acc = 0.0;
    std::size_t q = 0;
    for (std::size_t j = 0; j < point.size(); ++j) {
        if (label_dim && j == *label_dim) continue;
        if (q >= query.size()) fail(ErrorCode::DimensionMismatch, "query is shorter than the feature vector");
        const double diff = point[j] - query[q++];
        acc += diff * diff;
    }
    if (q != query.size()) fail(ErrorCode::DimensionMismatch, "query is longer than the feature vector");
    return std::sqrt(acc);
}

KnnResult rho_knn(const EmpiricalMeasure& part, std::span<const double> query, std::size_t k,
                  std::optional<std::size_t> label_dim) {
    if (k < 1) fail(ErrorCode::InvalidK, "k must be at least 1");
    std::vector<Neighbor> all;
    all.reserve(part.size());
    for (std::size_t i = 0; i < part.size(); ++i) {
        const auto p = part.point(i);
        all.push_back(Neighbor{part.parent_index(i), DataPoint(p.begin(), p.end()), feature_distance(p, query, label_dim)});
    }
    KnnResult out;
    out.truncated = all.size() < k;
    const std::size_t keep = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), closer);
    all.resize(keep);
    out.neighbors = std::move(all);
    return out;
}

KnnResult combine_knn(std::span<const KnnResult> lists, std::size_t k) {
    if (k < 1) fail(ErrorCode::InvalidK, "k must be at least 1");
    if (lists.empty()) fail(ErrorCode::EmptyInput, "no neighbour lists to combine");
    std::vector<Neighbor> pool;
    for (const auto& list : lists) pool.insert(pool.end(), list.neighbors.begin(), list.neighbors.end());
    std::sort(pool.begin(), pool.end(), closer);
    KnnResult out;
    std::unordered_set<std::size_t> seen;
    for (auto& nb : pool) {
        if (out.neighbors.size() == k) break;
        if (!seen.insert(nb.index).second) continue;
        out.neighbors.push_back(std::move(nb));
    }
    out.truncated = out.neighbors.size() < k;
    return out;
}

std::int64_t classify_knn(std::span<const Neighbor> neighbors, std::optional<std::size_t> label_dim) {
    if (!label_dim) fail(ErrorCode::LabelMissing, "classification needs a label column");
    if (neighbors.empty()) fail(ErrorCode::EmptyInput, "no neighbours to vote");
    struct Tally {
        std::size_t votes = 0;
        double distance = 0.0;
    };
    std::map<std::int64_t, Tally> tallies;
    for (const auto& nb : neighbors) {
        if (*label_dim >= nb.point.size()) fail(ErrorCode::LabelMissing, "neighbour has no label coordinate");
        const double raw = nb.point[*label_dim];
        const auto label = static_cast<std::int64_t>(std::llround(raw));
        auto& t = tallies[label];
        ++t.votes;
        t.distance += nb.distance;
    }
    // std::map iterates labels in ascending order, so strict comparisons
    // leave the smallest label on a full tie.
    auto best = tallies.begin();
    for (auto it = std::next(tallies.begin()); it != tallies.end(); ++it) {
        const auto& a = it->second;
        const auto& b = best->second;
        if (a.votes > b.votes || (a.votes == b.votes && a.distance < b.distance)) best = it;
    }
    return best->first;
}

}  // namespace parcon
