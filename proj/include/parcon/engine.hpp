#pragma once

#include "parcon/error.hpp"
#include "parcon/measure.hpp"
#include "parcon/partition.hpp"
#include "parcon/result.hpp"
#include "parcon/solutions.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace parcon {

// One batch of consecutive points [first, first + count).
struct Chunk {
    std::size_t first = 0;
    std::size_t count = 0;
    std::size_t dim = 0;
    std::vector<double> rows;

    std::span<const double> point(std::size_t i) const { return {rows.data() + i * dim, dim}; }
};

// Sequential, rewindable access to a dataset with stable global indices.
// Two passes yield identical (index, point) streams.
class ChunkSource {
public:
    virtual ~ChunkSource() = default;

    virtual std::size_t size() const = 0;
    virtual std::size_t dim() const = 0;
    virtual void rewind() = 0;
    // Reads up to max_points following points into `chunk`; false at the end.
    virtual bool next(Chunk& chunk, std::size_t max_points) = 0;
};

class MemorySource final : public ChunkSource {
public:
    explicit MemorySource(EmpiricalMeasure measure) : measure_(std::move(measure)) {}

    std::size_t size() const override { return measure_.size(); }
    std::size_t dim() const override { return measure_.dim(); }
    void rewind() override { cursor_ = 0; }
    bool next(Chunk& chunk, std::size_t max_points) override;

    const EmpiricalMeasure& measure() const noexcept { return measure_; }

private:
    EmpiricalMeasure measure_;
    std::size_t cursor_ = 0;
};

// Reads every point of a source into memory.
EmpiricalMeasure load_all(ChunkSource& source);

// Counts points held in engine-owned buffers (routing chunks, spill buffers,
// materialised parts) and remembers the peak.
class ResidentTracker {
public:
    void acquire(std::size_t points);
    void release(std::size_t points) noexcept { current_.fetch_sub(points); }
    std::size_t current() const noexcept { return current_.load(); }
    std::size_t peak() const noexcept { return peak_.load(); }
    void reset() noexcept {
        current_ = 0;
        peak_ = 0;
    }

private:
    std::atomic<std::size_t> current_{0};
    std::atomic<std::size_t> peak_{0};
};

class ResidentLease {
public:
    ResidentLease(ResidentTracker* tracker, std::size_t points) : tracker_(tracker), points_(points) {
        if (tracker_) tracker_->acquire(points_);
    }
    ResidentLease(const ResidentLease&) = delete;
    ResidentLease& operator=(const ResidentLease&) = delete;
    ~ResidentLease() {
        if (tracker_) tracker_->release(points_);
    }

private:
    ResidentTracker* tracker_;
    std::size_t points_;
};

struct EngineOptions {
    std::size_t workers = 1;
    std::size_t memory_budget = std::size_t{64} << 20;
    // Overrides the chunk size derived from the memory budget.
    std::optional<std::size_t> chunk_size;
    // Keep every R*_{k,l} in the report.
    bool retain_parts = false;
    // Spill materialised parts to disk even when the data fits one chunk.
    bool force_spill = false;
    // Defaults to $PARCON_TMPDIR, else the system temp directory.
    std::optional<std::filesystem::path> spill_root;
};

// Points per chunk so that (workers + 1) chunks of (index + d doubles) fit
// the budget; never below one point.
std::size_t derive_chunk_size(std::size_t memory_budget, std::size_t workers, std::size_t dim);
std::filesystem::path default_spill_root();

// Materialised part: either in memory or in a spill file of rows laid out as
// (u64 index, d doubles), all little-endian.
struct PartData {
    std::size_t count = 0;
    std::optional<std::filesystem::path> spill_path;
    std::vector<std::size_t> indices;
    std::vector<double> rows;
};

struct RoutedParts {
    std::size_t dim = 0;
    std::vector<PartData> parts;
};

struct RouteOptions {
    std::size_t chunk_size = 4096;
    // Empty means keep parts in memory.
    std::optional<std::filesystem::path> spill_dir;
    ResidentTracker* tracker = nullptr;
};

// Streams the source once and delivers every point to the parts that contain
// its index (with multiplicity in subsample mode).
RoutedParts route_to_parts(const PartitionerSpec& spec, std::size_t repetition, ChunkSource& source,
                           const RouteOptions& options);
// Reads a spilled part back (rows in delivery order).
EmpiricalMeasure read_spill_file(const std::filesystem::path& path, std::size_t dim);

// Total log-likelihood of theta over the whole source, summed exactly in
// index order.
double full_pass_evaluate(std::span<const double> theta, const MleSettings& settings, ChunkSource& source,
                          std::size_t chunk_size = 4096, ResidentTracker* tracker = nullptr);

struct PhaseTiming {
    double route_seconds = 0.0;
    double solve_seconds = 0.0;
    double combine_seconds = 0.0;
    double total_seconds = 0.0;
};

struct RunError {
    ErrorCode code;
    std::string message;
};

struct RunReport {
    SolutionSpec spec;
    std::optional<ResultValue> final;
    std::vector<ResultValue> per_rep;
    std::vector<std::vector<ResultValue>> per_part;
    std::vector<EvalVector> ev_trace;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> warnings;
    std::optional<RunError> error;
    PhaseTiming timing;
    std::size_t n = 0;
    std::size_t dim = 0;
    std::size_t chunk_size = 0;
    std::size_t peak_resident_points = 0;
};

struct RepetitionOutcome {
    ResultValue combined;  // R*_k
    std::vector<ResultValue> parts;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
    PhaseTiming timing;
};

// Drives the partition-repetition procedure over one source. Parts of a
// repetition run on up to `workers` threads; combiners run on the calling
// thread in part order, so results do not depend on the worker count.
class Engine {
public:
    Engine(ChunkSource& source, EngineOptions options);

    // One sampled partitioning, per-part solutions and the first-stage combine.
    RepetitionOutcome run_repetition(const SolutionSpec& spec, std::size_t repetition);
    // Errors during the run are captured in RunReport::error.
    RunReport run(const SolutionSpec& spec);
    // Appends repetitions K..K+additional-1 and recombines the second stage.
    void extend(RunReport& report, std::size_t additional);

    std::size_t chunk_size() const noexcept { return chunk_size_; }
    const ResidentTracker& tracker() const noexcept { return tracker_; }
    ChunkSource& source() noexcept { return source_; }

private:
    std::vector<std::optional<ResultValue>> solve_parts(const SolutionSpec& spec, RoutedParts& routed,
                                                        std::size_t repetition, std::vector<std::string>& warnings);
    ResultValue combine_parts(const SolutionSpec& spec, std::vector<std::optional<ResultValue>>& parts,
                              std::vector<std::string>& warnings);
    void append_repetitions(RunReport& report, std::size_t from, std::size_t to);

    ChunkSource& source_;
    EngineOptions options_;
    std::size_t chunk_size_;
    ResidentTracker tracker_;
    std::vector<std::string> retained_warnings_;
};

// Second-stage combiner C2_K for the spec's problem.
ResultValue combine_repetitions(const SolutionSpec& spec, std::span<const ResultValue> per_rep);

RunReport run(const SolutionSpec& spec, ChunkSource& source, std::size_t workers, std::size_t memory_budget);

}  // namespace parcon
