#pragma once

#include "parcon/engine.hpp"
#include "parcon/io.hpp"
#include "parcon/validation.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace parcon {

inline constexpr const char* kArtifactVersion = "parcon 1.0.0";

struct DataConfig {
    std::string path;  // absolute after loading
    DataFormat format = DataFormat::Csv;
    bool has_header = false;
    std::optional<std::size_t> dim;
    std::optional<std::size_t> label_column;
};

struct ValidationConfig {
    ConvergenceCombiner combiner = ConvergenceCombiner::MeanOfEv;
    std::size_t draws = 100;
    std::size_t k_max = 50;
};

struct EngineConfig {
    std::size_t workers = 1;
    std::size_t memory_budget = std::size_t{64} << 20;
    std::optional<std::size_t> chunk_size;
};

struct RunConfig {
    DataConfig data;
    SolutionSpec spec;
    // Range bounds are computed from a sample of the data at run time.
    bool auto_bounds = false;
    std::size_t sample_budget = 100000;
    ValidationConfig validation;
    EngineConfig engine;
    std::optional<std::string> output;
};

// Parses a config document. A report document is accepted too: its "config"
// member is used. Relative data paths resolve against `base_dir`. Errors are
// ConfigError naming the offending key path.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

// Canonical echo of everything that determines results: engine settings and
// the output path are left out so they cannot change the report.
nlohmann::json config_echo(const RunConfig& config);
// FNV-1a 64 over the serialized echo, as 16 hex digits.
std::string config_checksum(const RunConfig& config);

// Opens the data source and, for auto bounds, fills spec.partitioner.bounds
// (possibly lowering L when quantiles coincide; a warning says so).
std::unique_ptr<ChunkSource> open_source(RunConfig& config, std::vector<std::string>& warnings);

EngineOptions engine_options(const RunConfig& config);

// Non-finite reals serialize as the strings "inf", "-inf" and "nan".
nlohmann::json result_to_json(const ResultValue& result);
ResultValue result_from_json(const nlohmann::json& doc);
nlohmann::json ev_to_json(const EvalVector& v);

// `diagnostics` adds timing and memory counters, the only fields that may
// differ between runs of the same config.
nlohmann::json report_to_json(const RunReport& report, const RunConfig& config, bool diagnostics = true);
nlohmann::json viability_to_json(const ViabilityReport& report);
nlohmann::json convergence_to_json(const ConvergenceTrace& trace);

enum class Command { Run, Oracle, Viability, Converge };

struct CommandOptions {
    std::optional<std::size_t> workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool diagnostics = true;
};

// Exit codes: 0 success, 1 NotViable (viability only), 2 error. The report
// goes to the output path when one is configured; a summary goes to `out`.
int execute(Command command, const std::filesystem::path& config_path, const CommandOptions& options,
            std::ostream& out, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace parcon
