#include "parcon/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

namespace parcon {

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& path, const std::string& what) {
    fail(ErrorCode::ConfigError, path + ": " + what);
}

// Typed access to one JSON object that remembers which keys were read, so
// unknown (usually misspelt) keys can be rejected by name.
class Section {
public:
    Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) config_fail(display(), "expected an object");
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) {
        seen_.insert(key);
        return doc_.contains(key) && !doc_.at(key).is_null();
    }
    const json& raw(const std::string& key) {
        if (!has(key)) config_fail(key_path(key), "required key is missing");
        return doc_.at(key);
    }

    std::string string(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_string()) config_fail(key_path(key), "expected a string");
        return v.get<std::string>();
    }
    double real(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number()) config_fail(key_path(key), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) config_fail(key_path(key), "expected a finite number");
        return x;
    }
    std::uint64_t unsigned_integer(const std::string& key) {
        const auto& v = raw(key);
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
        config_fail(key_path(key), "expected a non-negative integer");
    }
    std::size_t size(const std::string& key) { return static_cast<std::size_t>(unsigned_integer(key)); }
    bool boolean(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_boolean()) config_fail(key_path(key), "expected true or false");
        return v.get<bool>();
    }
    std::vector<double> reals(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_array()) config_fail(key_path(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) config_fail(key_path(key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
            if (!std::isfinite(out.back()))
                config_fail(key_path(key) + "[" + std::to_string(i) + "]", "expected a finite number");
        }
        return out;
    }
    Section child(const std::string& key) { return Section(raw(key), key_path(key)); }

    // Wraps enum parsers so their errors carry the key path.
    template <class Parse>
    auto parsed(const std::string& key, Parse&& parse) {
        const std::string text = string(key);
        try {
            return parse(text);
        } catch (const Error& e) {
            config_fail(key_path(key), e.detail());
        }
    }

    void reject_unknown() const {
        for (const auto& [key, value] : doc_.items())
            if (!seen_.count(key)) config_fail(key_path(key), "unknown key");
    }

private:
    std::string display() const { return path_.empty() ? "config" : path_; }

    const json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

std::size_t parse_bytes(Section& s, const std::string& key) {
    const auto& v = s.raw(key);
    if (v.is_number()) return s.size(key);
    if (!v.is_string()) config_fail(s.key_path(key), "expected a byte count such as 67108864 or \"64MiB\"");
    const std::string text = v.get<std::string>();
    std::size_t used = 0;
    unsigned long long value = 0;
    try {
        value = std::stoull(text, &used);
    } catch (const std::exception&) {
        config_fail(s.key_path(key), "cannot parse byte count '" + text + "'");
    }
    const std::string unit = text.substr(used);
    unsigned shift = 0;
    if (unit == "" || unit == "B")
        shift = 0;
    else if (unit == "KiB")
        shift = 10;
    else if (unit == "MiB")
        shift = 20;
    else if (unit == "GiB")
        shift = 30;
    else
        config_fail(s.key_path(key), "unknown unit '" + unit + "' (use B, KiB, MiB or GiB)");
    return static_cast<std::size_t>(value) << shift;
}

void parse_data(Section s, RunConfig& config, const std::filesystem::path& base_dir) {
    auto& d = config.data;
    std::filesystem::path path = s.string("path");
    if (path.is_relative()) path = base_dir / path;
    d.path = std::filesystem::weakly_canonical(path).string();
    d.format = s.parsed("format", parse_format);
    if (s.has("has_header")) d.has_header = s.boolean("has_header");
    if (s.has("dim")) {
        d.dim = s.size("dim");
        if (*d.dim == 0) config_fail(s.key_path("dim"), "must be positive");
    }
    if (s.has("label_column")) d.label_column = s.size("label_column");
    if (d.format == DataFormat::F64le && !d.dim) config_fail(s.key_path("dim"), "required for f64le data");
    s.reject_unknown();
}

void parse_problem_block(Section s, RunConfig& config) {
    auto& spec = config.spec;
    auto& p = spec.params;
    spec.problem = s.parsed("id", parse_problem);
    if (s.has("key_dim")) p.key_dim = s.size("key_dim");
    if (s.has("edges")) p.edges = s.reals("edges");
    if (s.has("mu0")) p.mu0 = s.real("mu0");
    if (s.has("sigma")) p.sigma = s.real("sigma");
    if (s.has("model")) p.model = s.parsed("model", parse_model);
    if (s.has("init")) p.init = s.reals("init");
    if (s.has("max_iter")) p.max_iter = s.size("max_iter");
    if (s.has("tol")) p.tol = s.real("tol");
    if (s.has("k")) p.k = s.size("k");
    if (s.has("query")) p.query = s.reals("query");
    if (s.has("label_dim")) p.label_dim = s.size("label_dim");
    if (spec.problem == ProblemKind::Histogram && p.edges.empty())
        config_fail(s.key_path("edges"), "required for histogram");
    if (spec.problem == ProblemKind::Knn && p.query.empty()) config_fail(s.key_path("query"), "required for knn");
    s.reject_unknown();
}

void parse_partitioner(Section s, RunConfig& config) {
    auto& ps = config.spec.partitioner;
    ps.scheme = s.parsed("scheme", parse_scheme);
    ps.L = s.size("L");
    if (ps.L == 0) config_fail(s.key_path("L"), "must be at least 1");
    if (s.has("key_dim")) ps.key_dim = s.size("key_dim");
    if (s.has("base_seed")) ps.base_seed = s.unsigned_integer("base_seed");
    if (s.has("sample_budget")) {
        config.sample_budget = s.size("sample_budget");
        if (config.sample_budget == 0) config_fail(s.key_path("sample_budget"), "must be positive");
    }
    if (ps.scheme == PartitionScheme::RangeBounded) {
        const auto& bounds = s.raw("bounds");
        if (bounds.is_string()) {
            if (bounds.get<std::string>() != "auto") config_fail(s.key_path("bounds"), "expected an array or \"auto\"");
            config.auto_bounds = true;
        } else {
            ps.bounds = s.reals("bounds");
        }
    } else if (s.has("bounds")) {
        config_fail(s.key_path("bounds"), "only used by range_bounded");
    }
    if (ps.scheme == PartitionScheme::Subsample) {
        ps.part_size = s.size("part_size");
        if (ps.part_size == 0) config_fail(s.key_path("part_size"), "must be at least 1");
    } else if (s.has("part_size")) {
        config_fail(s.key_path("part_size"), "only used by subsample");
    }
    s.reject_unknown();
}

void parse_combiner(Section s, RunConfig& config) {
    auto& c = config.spec.combiner;
    if (s.has("adjust")) c.adjust = s.parsed("adjust", parse_adjust);
    if (s.has("c")) c.c = s.real("c");
    if (s.has("tau")) c.tau = s.real("tau");
    if (s.has("pool_fraction")) c.pool_fraction = s.real("pool_fraction");
    if (s.has("pool_min")) c.pool_min = s.size("pool_min");
    if (s.has("validation")) config.validation.combiner = s.parsed("validation", parse_convergence_combiner);
    if (s.has("draws")) {
        config.validation.draws = s.size("draws");
        if (config.validation.draws == 0) config_fail(s.key_path("draws"), "must be at least 1");
    }
    if (s.has("k_max")) {
        config.validation.k_max = s.size("k_max");
        if (config.validation.k_max < 2) config_fail(s.key_path("k_max"), "must be at least 2");
    }
    s.reject_unknown();
}

void parse_engine(Section s, RunConfig& config) {
    auto& e = config.engine;
    if (s.has("workers")) {
        e.workers = s.size("workers");
        if (e.workers == 0) config_fail(s.key_path("workers"), "must be at least 1");
    }
    if (s.has("memory_budget")) {
        e.memory_budget = parse_bytes(s, "memory_budget");
        if (e.memory_budget == 0) config_fail(s.key_path("memory_budget"), "must be positive");
    }
    if (s.has("chunk_size")) {
        e.chunk_size = s.size("chunk_size");
        if (*e.chunk_size == 0) config_fail(s.key_path("chunk_size"), "must be at least 1");
    }
    s.reject_unknown();
}

json reals_json(const std::vector<double>& v) { return json(v); }

template <class T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    if (doc.is_object() && doc.contains("config") && doc.contains("version")) return parse_config(doc.at("config"), base_dir);
    RunConfig config;
    Section top(doc, "");
    parse_data(top.child("data"), config, base_dir);
    parse_problem_block(top.child("problem"), config);
    parse_partitioner(top.child("partitioner"), config);
    if (top.has("K")) {
        config.spec.K = top.size("K");
        if (config.spec.K == 0) config_fail("K", "must be at least 1");
    }
    if (top.has("combiner")) parse_combiner(top.child("combiner"), config);
    if (top.has("engine")) parse_engine(top.child("engine"), config);
    if (top.has("output")) {
        std::filesystem::path out = top.string("output");
        if (out.is_relative()) out = base_dir / out;
        config.output = out.string();
    }
    top.reject_unknown();

    SolutionSpec check = config.spec;
    if (config.auto_bounds) {
        check.partitioner.bounds.resize(check.partitioner.L + 1);
        std::iota(check.partitioner.bounds.begin(), check.partitioner.bounds.end(), 0.0);
    }
    check.validate();
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ConfigError, path.string() + ": invalid JSON: " + e.what());
    }
    return parse_config(doc, std::filesystem::absolute(path).parent_path());
}

json config_echo(const RunConfig& config) {
    const auto& spec = config.spec;
    const auto& p = spec.params;
    const auto& ps = spec.partitioner;
    json echo;
    echo["data"] = {{"path", config.data.path},
                    {"format", std::string(to_string(config.data.format))},
                    {"has_header", config.data.has_header},
                    {"dim", optional_json(config.data.dim)},
                    {"label_column", optional_json(config.data.label_column)}};
    echo["problem"] = {{"id", std::string(to_string(spec.problem))},
                       {"key_dim", p.key_dim},
                       {"edges", reals_json(p.edges)},
                       {"mu0", p.mu0},
                       {"sigma", p.sigma},
                       {"model", std::string(to_string(p.model))},
                       {"init", reals_json(p.init)},
                       {"max_iter", p.max_iter},
                       {"tol", p.tol},
                       {"k", p.k},
                       {"query", reals_json(p.query)},
                       {"label_dim", optional_json(p.label_dim)}};
    json part = {{"scheme", std::string(to_string(ps.scheme))},
                 {"L", ps.L},
                 {"key_dim", ps.key_dim},
                 {"base_seed", ps.base_seed},
                 {"sample_budget", config.sample_budget}};
    if (ps.scheme == PartitionScheme::RangeBounded)
        part["bounds"] = config.auto_bounds ? json("auto") : reals_json(ps.bounds);
    if (ps.scheme == PartitionScheme::Subsample) part["part_size"] = ps.part_size;
    echo["partitioner"] = part;
    echo["K"] = spec.K;
    echo["combiner"] = {{"adjust", std::string(to_string(spec.combiner.adjust))},
                        {"c", spec.combiner.c},
                        {"tau", spec.combiner.tau},
                        {"pool_fraction", spec.combiner.pool_fraction},
                        {"pool_min", spec.combiner.pool_min},
                        {"validation", std::string(to_string(config.validation.combiner))},
                        {"draws", config.validation.draws},
                        {"k_max", config.validation.k_max}};
    return echo;
}

std::string config_checksum(const RunConfig& config) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : config_echo(config).dump()) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::unique_ptr<ChunkSource> open_source(RunConfig& config, std::vector<std::string>& warnings) {
    IngestOptions options{config.data.format, config.data.has_header, config.data.dim, config.data.label_column};
    auto source = ingest(config.data.path, options);
    auto& spec = config.spec;
    if (config.data.label_column) {
        const std::size_t last = source->dim() - 1;
        if (spec.params.label_dim && *spec.params.label_dim != last)
            config_fail("problem.label_dim", "label_column moves the label to coordinate " + std::to_string(last));
        spec.params.label_dim = last;
    }
    if (config.auto_bounds) {
        auto& ps = spec.partitioner;
        if (ps.key_dim >= source->dim()) config_fail("partitioner.key_dim", "out of range for the data dimension");
        QuantileSketch sketch(config.sample_budget, ps.base_seed);
        source->rewind();
        Chunk chunk;
        while (source->next(chunk, 4096))
            for (std::size_t i = 0; i < chunk.count; ++i) sketch.offer(chunk.point(i)[ps.key_dim]);
        const auto resolved = sketch.finish(ps.L);
        if (resolved.collapsed())
            warnings.push_back("quantile bounds collapsed: L lowered from " + std::to_string(resolved.requested_L) +
                               " to " + std::to_string(resolved.effective_L()));
        ps.bounds = resolved.bounds;
        ps.L = resolved.effective_L();
    }
    return source;
}

EngineOptions engine_options(const RunConfig& config) {
    EngineOptions options;
    options.workers = config.engine.workers;
    options.memory_budget = config.engine.memory_budget;
    options.chunk_size = config.engine.chunk_size;
    return options;
}

}  // namespace parcon
