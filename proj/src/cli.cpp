#include "parcon/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace parcon {

namespace {

using nlohmann::json;

std::string_view command_name(Command command) {
    switch (command) {
    case Command::Run: return "run";
    case Command::Oracle: return "oracle";
    case Command::Viability: return "viability";
    case Command::Converge: return "converge";
    }
    return "?";
}

json error_json(const Error& e) { return {{"code", std::string(to_string(e.code()))}, {"message", e.what()}}; }

json base_document(Command command, const RunConfig& config) {
    json doc;
    doc["version"] = kArtifactVersion;
    doc["command"] = std::string(command_name(command));
    doc["config_checksum"] = config_checksum(config);
    doc["config"] = config_echo(config);
    return doc;
}

void write_document(const json& doc, const std::optional<std::string>& path, std::ostream& err) {
    if (!path) return;
    std::ofstream out(*path, std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) err << "parcon: cannot write report to " << *path << '\n';
}

std::string ev_summary(const EvalVector& v) {
    std::ostringstream s;
    s << std::setprecision(17) << '[';
    const std::size_t shown = std::min<std::size_t>(v.size(), 8);
    for (std::size_t i = 0; i < shown; ++i) s << (i ? ", " : "") << v[i];
    if (v.size() > shown) s << ", ... (" << v.size() << " values)";
    s << ']';
    return s.str();
}

}  // namespace

int execute(Command command, const std::filesystem::path& config_path, const CommandOptions& options,
            std::ostream& out, std::ostream& err) {
    RunConfig config;
    try {
        config = load_config(config_path);
    } catch (const Error& e) {
        err << "parcon " << command_name(command) << ": " << e.what() << '\n';
        if (options.out) write_document({{"version", kArtifactVersion}, {"error", error_json(e)}}, options.out, err);
        return 2;
    }
    if (options.workers) config.engine.workers = std::max<std::size_t>(1, *options.workers);
    if (options.seed) config.spec.partitioner.base_seed = *options.seed;
    if (options.out) config.output = *options.out;

    json doc = base_document(command, config);
    int code = 0;
    try {
        std::vector<std::string> warnings;
        auto source = open_source(config, warnings);
        const auto& spec = config.spec;
        out << command_name(command) << ": " << to_string(spec.problem) << " on n=" << source->size()
            << " d=" << source->dim() << " (" << to_string(spec.partitioner.scheme) << ", L=" << spec.partitioner.L
            << ", K=" << spec.K << ")\n";

        switch (command) {
        case Command::Run: {
            Engine engine(*source, engine_options(config));
            RunReport report = engine.run(spec);
            report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
            doc = report_to_json(report, config, options.diagnostics);
            if (report.error) {
                err << "parcon run: " << report.error->message << '\n';
                code = 2;
            } else {
                out << "final ev: " << ev_summary(ev(*report.final)) << '\n';
            }
            for (const auto& w : report.warnings) out << "warning: " << w << '\n';
            break;
        }
        case Command::Oracle: {
            const ResultValue result = oracle(spec, *source);
            doc["n"] = source->size();
            doc["dim"] = source->dim();
            doc["final"] = result_to_json(result);
            doc["ev"] = ev_to_json(ev(result));
            doc["warnings"] = warnings;
            out << "oracle ev: " << ev_summary(ev(result)) << '\n';
            break;
        }
        case Command::Viability: {
            auto report = estimate_viability(spec, *source, config.validation.draws, spec.partitioner.base_seed,
                                             engine_options(config));
            report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
            doc["viability"] = viability_to_json(report);
            out << "verdict: " << to_string(report.verdict) << " over K=" << report.K << " draws\n"
                << "bias: " << ev_summary(report.bias) << "\nse:   " << ev_summary(report.se) << '\n';
            if (report.verdict == Verdict::NotViable) code = 1;
            break;
        }
        case Command::Converge: {
            const auto trace = trace_convergence(spec, *source, config.validation.k_max, config.validation.combiner,
                                                 spec.partitioner.base_seed, engine_options(config));
            doc["convergence"] = convergence_to_json(trace);
            doc["warnings"] = warnings;
            out << "distance at K=1: " << trace.distances.front() << ", at K=" << trace.distances.size() << ": "
                << trace.distances.back() << '\n';
            break;
        }
        }
    } catch (const Error& e) {
        doc["error"] = error_json(e);
        err << "parcon " << command_name(command) << ": " << e.what() << '\n';
        code = 2;
    }
    write_document(doc, config.output, err);
    if (config.output) out << "report: " << *config.output << '\n';
    return code;
}

int cli_main(int argc, char** argv) {
    CLI::App app{"Partition-repetition analytics over large datasets"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::size_t> workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_path;
    bool no_diagnostics = false;

    const std::pair<const char*, const char*> commands[] = {
        {"run", "Run the partition-repetition pipeline"},
        {"oracle", "Compute the full-data result directly"},
        {"viability", "Estimate combiner bias against the oracle"},
        {"converge", "Trace the second-stage distance to the oracle as K grows"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "Run configuration (JSON), or a report to replay")->required();
        sub->add_option("--workers", workers, "Worker threads for part processing");
        sub->add_option("--seed", seed, "Overrides partitioner.base_seed");
        sub->add_option("--out", out_path, "Report path; overrides the config's output");
        sub->add_flag("--no-diagnostics", no_diagnostics, "Omit timing and memory counters from run reports");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    Command command = Command::Run;
    for (const auto* sub : app.get_subcommands()) {
        const auto& name = sub->get_name();
        if (name == "oracle") command = Command::Oracle;
        if (name == "viability") command = Command::Viability;
        if (name == "converge") command = Command::Converge;
    }
    CommandOptions options{workers, seed, out_path, !no_diagnostics};
    return execute(command, config_path, options, std::cout, std::cerr);
}

}  // namespace parcon
