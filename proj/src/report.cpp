#include "parcon/cli.hpp"

#include <cmath>
#include <limits>

namespace parcon {

namespace {

using nlohmann::json;

json num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

json nums(std::span<const double> values) {
    json out = json::array();
    for (double v : values) out.push_back(num(v));
    return out;
}

double read_num(const json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    fail(ErrorCode::ParseError, "expected a number in result, got " + v.dump());
}

std::vector<double> read_nums(const json& v) {
    std::vector<double> out;
    for (const auto& x : v) out.push_back(read_num(x));
    return out;
}

struct ToJson {
    json operator()(const MeanResult& r) const { return {{"kind", "mean"}, {"mean", nums(r.mean)}, {"count", r.count}}; }
    json operator()(const SortedResult& r) const {
        return {{"kind", "sort"}, {"dim", r.dim}, {"indices", r.indices}, {"rows", nums(r.rows)}};
    }
    json operator()(const ExtremesResult& r) const {
        return {{"kind", "extremes"}, {"min", nums(r.min)},         {"max", nums(r.max)},
                {"min_index", r.min_index}, {"max_index", r.max_index}, {"count", r.count}};
    }
    json operator()(const HistogramResult& r) const {
        return {{"kind", "histogram"}, {"edges", nums(r.edges)}, {"counts", r.counts}};
    }
    json operator()(const PValueResult& r) const { return {{"kind", "test"}, {"p", num(r.p)}}; }
    json operator()(const MleResult& r) const {
        return {{"kind", "mle"},
                {"theta", nums(r.theta)},
                {"loglik", num(r.loglik)},
                {"converged", r.converged},
                {"iterations", r.iterations}};
    }
    json operator()(const KnnResult& r) const {
        json neighbors = json::array();
        for (const auto& nb : r.neighbors)
            neighbors.push_back({{"index", nb.index}, {"point", nums(nb.point)}, {"distance", num(nb.distance)}});
        return {{"kind", "knn"}, {"neighbors", neighbors}, {"truncated", r.truncated}};
    }
    json operator()(const OutlierResult& r) const {
        return {{"kind", "outlier"},
                {"data_idx", r.data_idx},
                {"outlier_idx", r.outlier_idx},
                {"data_values", nums(r.data_values)},
                {"outlier_values", nums(r.outlier_values)}};
    }
};

json timing_json(const PhaseTiming& t) {
    return {{"route_seconds", t.route_seconds},
            {"solve_seconds", t.solve_seconds},
            {"combine_seconds", t.combine_seconds},
            {"total_seconds", t.total_seconds}};
}

}  // namespace

json result_to_json(const ResultValue& result) { return std::visit(ToJson{}, result); }

ResultValue result_from_json(const json& doc) {
    try {
        const auto kind = doc.at("kind").get<std::string>();
        if (kind == "mean") return MeanResult::from_mean(read_nums(doc.at("mean")), doc.at("count").get<std::uint64_t>());
        if (kind == "sort") {
            SortedResult r;
            r.dim = doc.at("dim").get<std::size_t>();
            r.indices = doc.at("indices").get<std::vector<std::size_t>>();
            r.rows = read_nums(doc.at("rows"));
            return r;
        }
        if (kind == "extremes") {
            ExtremesResult r;
            r.min = read_nums(doc.at("min"));
            r.max = read_nums(doc.at("max"));
            r.min_index = doc.at("min_index").get<std::size_t>();
            r.max_index = doc.at("max_index").get<std::size_t>();
            r.count = doc.at("count").get<std::uint64_t>();
            return r;
        }
        if (kind == "histogram")
            return HistogramResult{read_nums(doc.at("edges")), doc.at("counts").get<std::vector<std::uint64_t>>()};
        if (kind == "test") return PValueResult{read_num(doc.at("p"))};
        if (kind == "mle") {
            MleResult r;
            r.theta = read_nums(doc.at("theta"));
            r.loglik = read_num(doc.at("loglik"));
            r.converged = doc.at("converged").get<bool>();
            r.iterations = doc.at("iterations").get<std::size_t>();
            return r;
        }
        if (kind == "knn") {
            KnnResult r;
            for (const auto& nb : doc.at("neighbors"))
                r.neighbors.push_back(
                    Neighbor{nb.at("index").get<std::size_t>(), read_nums(nb.at("point")), read_num(nb.at("distance"))});
            r.truncated = doc.at("truncated").get<bool>();
            return r;
        }
        if (kind == "outlier") {
            OutlierResult r;
            r.data_idx = doc.at("data_idx").get<std::vector<std::size_t>>();
            r.outlier_idx = doc.at("outlier_idx").get<std::vector<std::size_t>>();
            r.data_values = read_nums(doc.at("data_values"));
            r.outlier_values = read_nums(doc.at("outlier_values"));
            return r;
        }
        fail(ErrorCode::ParseError, "unknown result kind '" + kind + "'");
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, std::string("malformed result: ") + e.what());
    }
}

json ev_to_json(const EvalVector& v) { return nums(v.values); }

json report_to_json(const RunReport& report, const RunConfig& config, bool diagnostics) {
    json doc;
    doc["version"] = kArtifactVersion;
    doc["command"] = "run";
    doc["config_checksum"] = config_checksum(config);
    doc["config"] = config_echo(config);
    doc["n"] = report.n;
    doc["dim"] = report.dim;
    if (config.auto_bounds)
        doc["resolved_partitioner"] = {{"L", report.spec.partitioner.L},
                                       {"bounds", nums(report.spec.partitioner.bounds)}};
    doc["final"] = report.final ? result_to_json(*report.final) : json(nullptr);
    doc["per_rep"] = json::array();
    for (const auto& r : report.per_rep) doc["per_rep"].push_back(result_to_json(r));
    if (!report.per_part.empty()) {
        doc["per_part"] = json::array();
        for (const auto& rep : report.per_part) {
            json parts = json::array();
            for (const auto& r : rep) parts.push_back(result_to_json(r));
            doc["per_part"].push_back(parts);
        }
    }
    doc["ev_trace"] = json::array();
    for (const auto& e : report.ev_trace) doc["ev_trace"].push_back(ev_to_json(e));
    doc["seeds"] = report.seeds;
    doc["warnings"] = report.warnings;
    if (report.error)
        doc["error"] = {{"code", std::string(to_string(report.error->code))}, {"message", report.error->message}};
    if (diagnostics) {
        doc["timing"] = timing_json(report.timing);
        doc["resources"] = {{"chunk_size", report.chunk_size}, {"peak_resident_points", report.peak_resident_points}};
    }
    return doc;
}

json viability_to_json(const ViabilityReport& r) {
    return {{"problem", std::string(to_string(r.problem))},
            {"estimate", ev_to_json(r.estimate)},
            {"target", ev_to_json(r.target)},
            {"bias", ev_to_json(r.bias)},
            {"se", ev_to_json(r.se)},
            {"K", r.K},
            {"verdict", std::string(to_string(r.verdict))},
            {"warnings", r.warnings}};
}

json convergence_to_json(const ConvergenceTrace& t) {
    return {{"combiner", std::string(to_string(t.combiner))},
            {"target", ev_to_json(t.target)},
            {"distances", nums(t.distances)}};
}

}  // namespace parcon
