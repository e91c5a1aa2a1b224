#include "parcon/engine.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <thread>
#include <unistd.h>
#include <variant>

namespace parcon {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
    return v;
}

// Runs sink(index, point) over the whole source with one chunk buffer.
template <class Sink>
void stream_source(ChunkSource& source, std::size_t chunk_size, ResidentTracker* tracker, Sink&& sink) {
    source.rewind();
    ResidentLease lease(tracker, std::min(chunk_size, source.size()));
    Chunk chunk;
    while (source.next(chunk, chunk_size)) {
        for (std::size_t i = 0; i < chunk.count; ++i) sink(chunk.first + i, chunk.point(i));
    }
}

// Buffers spilled rows per part and appends them to the part file in
// batches, so no file descriptor stays open across batches.
class SpillWriter {
public:
    SpillWriter(std::filesystem::path path, std::size_t flush_points, ResidentTracker* tracker)
        : path_(std::move(path)), flush_points_(std::max<std::size_t>(1, flush_points)), tracker_(tracker) {
        std::ofstream create(path_, std::ios::binary | std::ios::trunc);
        if (!create) fail(ErrorCode::IoError, "cannot create spill file " + path_.string());
    }
    SpillWriter(SpillWriter&&) = default;
    ~SpillWriter() {
        if (tracker_) tracker_->release(buffered_);
    }

    void append(std::size_t index, std::span<const double> point) {
        put_u64(buffer_, index);
        for (double v : point) put_u64(buffer_, std::bit_cast<std::uint64_t>(v));
        ++buffered_;
        if (tracker_) tracker_->acquire(1);
        if (buffered_ >= flush_points_) flush();
    }

    void flush() {
        if (buffered_ == 0) return;
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        out.write(reinterpret_cast<const char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
        if (!out) fail(ErrorCode::IoError, "failed writing spill file " + path_.string());
        buffer_.clear();
        if (tracker_) tracker_->release(buffered_);
        buffered_ = 0;
    }

private:
    std::filesystem::path path_;
    std::size_t flush_points_;
    ResidentTracker* tracker_;
    std::vector<unsigned char> buffer_;
    std::size_t buffered_ = 0;
};

using StreamAccumulator = std::variant<MeanAccumulator, ExtremesAccumulator, HistogramAccumulator, TestAccumulator>;

StreamAccumulator make_accumulator(const SolutionSpec& spec, std::size_t dim) {
    const auto& p = spec.params;
    switch (spec.problem) {
    case ProblemKind::Mean: return MeanAccumulator(dim);
    case ProblemKind::Extremes: return ExtremesAccumulator();
    case ProblemKind::Histogram: return HistogramAccumulator(p.edges, p.key_dim);
    case ProblemKind::Test: return TestAccumulator(p.mu0, p.sigma, p.key_dim);
    default: break;
    }
    fail(ErrorCode::InvalidSpec, "problem is not streaming");
}

void accumulate(StreamAccumulator& acc, std::size_t index, std::span<const double> point) {
    std::visit(
        [&](auto& a) {
            if constexpr (std::is_same_v<std::decay_t<decltype(a)>, ExtremesAccumulator>)
                a.add(index, point);
            else
                a.add(point);
        },
        acc);
}

ResultValue finish(const StreamAccumulator& acc) {
    return std::visit([](const auto& a) -> ResultValue { return a.finish(); }, acc);
}

ResultValue solve_part(const SolutionSpec& spec, const EmpiricalMeasure& part) {
    const auto& p = spec.params;
    switch (spec.problem) {
    case ProblemKind::Mean: return rho_mean(part);
    case ProblemKind::Sort: return rho_sort(part);
    case ProblemKind::Extremes: return rho_extremes(part);
    case ProblemKind::Histogram: return rho_histogram(part, p.edges, p.key_dim);
    case ProblemKind::Test: return rho_test(part, p.mu0, p.sigma, p.key_dim);
    case ProblemKind::Mle: return rho_mle(part, mle_settings(p));
    case ProblemKind::Knn: return rho_knn(part, p.query, p.k, p.label_dim);
    case ProblemKind::Outlier: return rho_outlier(part, spec.combiner.c, p.key_dim);
    }
    fail(ErrorCode::InvalidSpec, "unknown problem");
}

template <class T>
std::vector<T> unwrap(std::span<const ResultValue> values) {
    std::vector<T> out;
    out.reserve(values.size());
    for (const auto& v : values) out.push_back(std::get<T>(v));
    return out;
}

std::atomic<std::uint64_t> spill_counter{0};

std::filesystem::path make_spill_dir(const std::filesystem::path& root) {
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    const auto name = "parcon-spill-" + std::to_string(::getpid()) + "-" + std::to_string(spill_counter++);
    auto dir = root / name;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create spill directory " + dir.string() + ": " + ec.message());
    return dir;
}

}  // namespace

// ---- sources ----------------------------------------------------------------

bool MemorySource::next(Chunk& chunk, std::size_t max_points) {
    if (cursor_ >= measure_.size()) return false;
    const std::size_t count = std::min(std::max<std::size_t>(1, max_points), measure_.size() - cursor_);
    const auto rows = measure_.rows();
    const std::size_t d = measure_.dim();
    chunk.first = cursor_;
    chunk.count = count;
    chunk.dim = d;
    chunk.rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(cursor_ * d),
                      rows.begin() + static_cast<std::ptrdiff_t>((cursor_ + count) * d));
    cursor_ += count;
    return true;
}

EmpiricalMeasure load_all(ChunkSource& source) {
    std::vector<double> rows;
    rows.reserve(source.size() * source.dim());
    source.rewind();
    Chunk chunk;
    while (source.next(chunk, 1 << 16)) rows.insert(rows.end(), chunk.rows.begin(), chunk.rows.end());
    return EmpiricalMeasure(std::move(rows), source.dim());
}

void ResidentTracker::acquire(std::size_t points) {
    const std::size_t now = current_.fetch_add(points) + points;
    std::size_t seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
}

std::size_t derive_chunk_size(std::size_t memory_budget, std::size_t workers, std::size_t dim) {
    const std::size_t bytes_per_point = 8 * (dim + 1);
    return std::max<std::size_t>(1, memory_budget / (bytes_per_point * (std::max<std::size_t>(1, workers) + 1)));
}

std::filesystem::path default_spill_root() {
    if (const char* env = std::getenv("PARCON_TMPDIR"); env && *env) return env;
    return std::filesystem::temp_directory_path();
}

// ---- routing ----------------------------------------------------------------

RoutedParts route_to_parts(const PartitionerSpec& spec, std::size_t repetition, ChunkSource& source,
                           const RouteOptions& options) {
    PartRouter router(spec, source.size(), repetition);
    RoutedParts out;
    out.dim = source.dim();
    out.parts.resize(router.parts());

    std::vector<SpillWriter> writers;
    if (options.spill_dir) {
        const std::size_t flush_points = std::min<std::size_t>(4096, options.chunk_size / router.parts());
        writers.reserve(router.parts());
        for (std::size_t l = 0; l < router.parts(); ++l) {
            auto path = *options.spill_dir / ("part-" + std::to_string(l) + ".bin");
            out.parts[l].spill_path = path;
            writers.emplace_back(path, flush_points, options.tracker);
        }
    }

    stream_source(source, options.chunk_size, options.tracker, [&](std::size_t index, std::span<const double> point) {
        router.route(index, point, [&](std::size_t part) {
            auto& pd = out.parts[part];
            ++pd.count;
            if (!writers.empty()) {
                writers[part].append(index, point);
            } else {
                pd.indices.push_back(index);
                pd.rows.insert(pd.rows.end(), point.begin(), point.end());
            }
        });
    });
    for (auto& w : writers) w.flush();

    for (std::size_t l = 0; l < out.parts.size(); ++l)
        if (out.parts[l].count == 0)
            throw Error(ErrorCode::EmptyPart, "part " + std::to_string(l) + " received no points").annotated(repetition, l);
    return out;
}

EmpiricalMeasure read_spill_file(const std::filesystem::path& path, std::size_t dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open spill file " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t row_bytes = 8 * (dim + 1);
    if (bytes.size() % row_bytes != 0) fail(ErrorCode::IoError, "truncated spill file " + path.string());
    const std::size_t n = bytes.size() / row_bytes;
    std::vector<double> rows;
    rows.reserve(n * dim);
    std::vector<std::size_t> indices;
    indices.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* row = bytes.data() + i * row_bytes;
        indices.push_back(static_cast<std::size_t>(get_u64(row)));
        for (std::size_t j = 0; j < dim; ++j) rows.push_back(std::bit_cast<double>(get_u64(row + 8 * (j + 1))));
    }
    return EmpiricalMeasure(std::move(rows), dim, std::move(indices));
}

double full_pass_evaluate(std::span<const double> theta, const MleSettings& settings, ChunkSource& source,
                          std::size_t chunk_size, ResidentTracker* tracker) {
    ExactSum total;
    stream_source(source, chunk_size, tracker, [&](std::size_t, std::span<const double> point) {
        total.add(point_loglik(settings, theta, point));
    });
    const double value = total.value();
    if (!std::isfinite(value)) fail(ErrorCode::NonfiniteValue, "full-data log-likelihood is not finite");
    return value;
}

// ---- engine -----------------------------------------------------------------

Engine::Engine(ChunkSource& source, EngineOptions options)
    : source_(source),
      options_(std::move(options)),
      chunk_size_(options_.chunk_size ? std::max<std::size_t>(1, *options_.chunk_size)
                                      : derive_chunk_size(options_.memory_budget, options_.workers, source.dim())) {
    if (source_.size() == 0) fail(ErrorCode::EmptyInput, "source has no points");
}

std::vector<std::optional<ResultValue>> Engine::solve_parts(const SolutionSpec& spec, RoutedParts& routed,
                                                            std::size_t repetition,
                                                            std::vector<std::string>& warnings) {
    const std::size_t L = routed.parts.size();
    std::vector<std::optional<ResultValue>> results(L);
    std::vector<std::exception_ptr> errors(L);

    auto work = [&](std::size_t l) {
        try {
            PartData& pd = routed.parts[l];
            if (pd.spill_path) {
                if (pd.count > chunk_size_) {
                    std::string hint = spec.problem == ProblemKind::Sort ? "; raise L so each range part is smaller"
                                                                        : "; raise L or the memory budget";
                    fail(ErrorCode::InsufficientMemory, "part holds " + std::to_string(pd.count) +
                                                            " points but the chunk budget is " +
                                                            std::to_string(chunk_size_) + hint);
                }
                ResidentLease lease(&tracker_, pd.count);
                const EmpiricalMeasure part = read_spill_file(*pd.spill_path, routed.dim);
                results[l] = solve_part(spec, part);
            } else {
                const EmpiricalMeasure part(std::move(pd.rows), routed.dim, std::move(pd.indices));
                results[l] = solve_part(spec, part);
            }
        } catch (...) {
            errors[l] = std::current_exception();
        }
    };

    const std::size_t threads = std::min(std::max<std::size_t>(1, options_.workers), L);
    if (threads <= 1) {
        for (std::size_t l = 0; l < L; ++l) work(l);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t l = next++; l < L; l = next++) work(l);
            });
        }
    }

    for (std::size_t l = 0; l < L; ++l) {
        if (!errors[l]) continue;
        try {
            std::rethrow_exception(errors[l]);
        } catch (const Error& e) {
            const bool fit_failure =
                e.code() == ErrorCode::SingularHessian || e.code() == ErrorCode::DegenerateVariance;
            if (spec.problem == ProblemKind::Mle && fit_failure) {
                warnings.push_back("part " + std::to_string(l) + " produced no MLE candidate: " + e.what());
                continue;
            }
            throw e.annotated(repetition, l);
        }
    }
    return results;
}

ResultValue Engine::combine_parts(const SolutionSpec& spec, std::vector<std::optional<ResultValue>>& parts,
                                  std::vector<std::string>& warnings) {
    std::vector<ResultValue> present;
    for (auto& p : parts)
        if (p) present.push_back(*p);
    const std::span<const ResultValue> values(present);

    switch (spec.problem) {
    case ProblemKind::Mean: return combine_mean_L(unwrap<MeanResult>(values));
    case ProblemKind::Sort: return combine_sort_L(unwrap<SortedResult>(values), spec.partitioner);
    case ProblemKind::Extremes: return combine_extremes(unwrap<ExtremesResult>(values));
    case ProblemKind::Histogram: return combine_histogram(unwrap<HistogramResult>(values));
    case ProblemKind::Test: {
        std::vector<double> ps;
        for (const auto& r : unwrap<PValueResult>(values)) ps.push_back(r.p);
        return combine_test_L(ps, spec.combiner.adjust);
    }
    case ProblemKind::Mle: {
        std::vector<MleCandidate> candidates;
        for (std::size_t l = 0; l < parts.size(); ++l) {
            if (!parts[l]) continue;
            const auto& r = std::get<MleResult>(*parts[l]);
            if (!r.converged)
                warnings.push_back("part " + std::to_string(l) + ": Newton-Raphson stopped at max_iter without "
                                   "converging; best iterate used");
            candidates.push_back(MleCandidate{l, r});
        }
        const auto settings = mle_settings(spec.params);
        return combine_mle(
            candidates,
            [&](std::span<const double> theta) {
                return full_pass_evaluate(theta, settings, source_, chunk_size_, &tracker_);
            },
            &warnings);
    }
    case ProblemKind::Knn: return combine_knn(unwrap<KnnResult>(values), spec.params.k);
    case ProblemKind::Outlier: {
        const auto splits = unwrap<OutlierResult>(values);
        if (splits.size() == 1) return splits.front();
        return combine_outlier_L(splits, spec.combiner, source_.size());
    }
    }
    fail(ErrorCode::InvalidSpec, "unknown problem");
}

RepetitionOutcome Engine::run_repetition(const SolutionSpec& spec, std::size_t repetition) try {
    spec.validate_for(source_.dim());
    RepetitionOutcome outcome;
    const auto start = Clock::now();

    std::vector<std::optional<ResultValue>> parts;
    if (is_streaming(spec.problem)) {
        PartRouter router(spec.partitioner, source_.size(), repetition);
        outcome.seed = router.seed();
        std::vector<StreamAccumulator> accumulators;
        accumulators.reserve(router.parts());
        for (std::size_t l = 0; l < router.parts(); ++l) accumulators.push_back(make_accumulator(spec, source_.dim()));
        std::vector<std::size_t> delivered(router.parts(), 0);
        stream_source(source_, chunk_size_, &tracker_, [&](std::size_t index, std::span<const double> point) {
            router.route(index, point, [&](std::size_t part) {
                accumulate(accumulators[part], index, point);
                ++delivered[part];
            });
        });
        for (std::size_t l = 0; l < delivered.size(); ++l)
            if (delivered[l] == 0)
                throw Error(ErrorCode::EmptyPart, "part " + std::to_string(l) + " received no points").annotated(repetition, l);
        outcome.timing.route_seconds = seconds_since(start);
        const auto solve_start = Clock::now();
        for (std::size_t l = 0; l < accumulators.size(); ++l) {
            try {
                parts.emplace_back(finish(accumulators[l]));
            } catch (const Error& e) {
                throw e.annotated(repetition, l);
            }
        }
        outcome.timing.solve_seconds = seconds_since(solve_start);
    } else {
        const std::size_t deliveries = spec.partitioner.mode() == PartitionMode::Subsample
                                           ? spec.partitioner.L * spec.partitioner.part_size
                                           : source_.size();
        const bool spill = options_.force_spill || deliveries > chunk_size_;
        RouteOptions route{chunk_size_, std::nullopt, &tracker_};
        if (spill) route.spill_dir = make_spill_dir(options_.spill_root.value_or(default_spill_root()));

        try {
            RoutedParts routed = route_to_parts(spec.partitioner, repetition, source_, route);
            outcome.seed = PartRouter(spec.partitioner, source_.size(), repetition).seed();
            std::size_t in_memory = 0;
            for (const auto& pd : routed.parts)
                if (!pd.spill_path) in_memory += pd.count;
            tracker_.acquire(in_memory);
            outcome.timing.route_seconds = seconds_since(start);
            const auto solve_start = Clock::now();
            try {
                parts = solve_parts(spec, routed, repetition, outcome.warnings);
            } catch (...) {
                tracker_.release(in_memory);
                throw;
            }
            tracker_.release(in_memory);
            outcome.timing.solve_seconds = seconds_since(solve_start);
        } catch (...) {
            if (route.spill_dir)
                retained_warnings_.push_back("spill files retained for debugging at " + route.spill_dir->string());
            throw;
        }
        if (route.spill_dir) {
            std::error_code ec;
            std::filesystem::remove_all(*route.spill_dir, ec);
        }
    }

    const auto combine_start = Clock::now();
    try {
        outcome.combined = combine_parts(spec, parts, outcome.warnings);
    } catch (const Error& e) {
        throw e.annotated(repetition, std::nullopt);
    }
    outcome.timing.combine_seconds = seconds_since(combine_start);
    for (auto& p : parts)
        if (p) outcome.parts.push_back(std::move(*p));
    outcome.timing.total_seconds = seconds_since(start);
    return outcome;
} catch (const Error& e) {
    if (e.repetition()) throw;
    throw e.annotated(repetition, e.part());
}

void Engine::append_repetitions(RunReport& report, std::size_t from, std::size_t to) {
    for (std::size_t k = from; k < to; ++k) {
        auto outcome = run_repetition(report.spec, k);
        for (auto& w : outcome.warnings) report.warnings.push_back("k=" + std::to_string(k) + ": " + w);
        report.ev_trace.push_back(ev(outcome.combined));
        report.seeds.push_back(outcome.seed);
        report.timing.route_seconds += outcome.timing.route_seconds;
        report.timing.solve_seconds += outcome.timing.solve_seconds;
        report.timing.combine_seconds += outcome.timing.combine_seconds;
        if (options_.retain_parts) report.per_part.push_back(std::move(outcome.parts));
        report.per_rep.push_back(std::move(outcome.combined));
    }
}

RunReport Engine::run(const SolutionSpec& spec) {
    const auto start = Clock::now();
    tracker_.reset();
    retained_warnings_.clear();
    RunReport report;
    report.spec = spec;
    report.n = source_.size();
    report.dim = source_.dim();
    report.chunk_size = chunk_size_;
    try {
        spec.validate_for(source_.dim());
        append_repetitions(report, 0, spec.K);
        const auto combine_start = Clock::now();
        report.final = combine_repetitions(spec, report.per_rep);
        report.timing.combine_seconds += seconds_since(combine_start);
    } catch (const Error& e) {
        report.final.reset();
        report.error = RunError{e.code(), e.what()};
    }
    report.warnings.insert(report.warnings.end(), retained_warnings_.begin(), retained_warnings_.end());
    report.peak_resident_points = tracker_.peak();
    report.timing.total_seconds = seconds_since(start);
    return report;
}

void Engine::extend(RunReport& report, std::size_t additional) {
    if (report.error) fail(ErrorCode::InvalidSpec, "cannot extend a failed run");
    if (report.n != source_.size() || report.dim != source_.dim())
        report.warnings.push_back("source grew from n=" + std::to_string(report.n) + " to n=" +
                                  std::to_string(source_.size()) + "; new repetitions partition the larger data");
    const std::size_t from = report.spec.K;
    report.spec.K += additional;
    report.n = source_.size();
    append_repetitions(report, from, report.spec.K);
    report.final = combine_repetitions(report.spec, report.per_rep);
    report.peak_resident_points = std::max(report.peak_resident_points, tracker_.peak());
}

ResultValue combine_repetitions(const SolutionSpec& spec, std::span<const ResultValue> per_rep) {
    if (per_rep.empty()) fail(ErrorCode::EmptyInput, "no repetitions to combine");
    switch (spec.problem) {
    case ProblemKind::Mean: return combine_mean_K(unwrap<MeanResult>(per_rep));
    case ProblemKind::Sort: return per_rep.front();  // degenerate partitioner: every repetition is identical
    case ProblemKind::Extremes: return combine_extremes(unwrap<ExtremesResult>(per_rep));
    case ProblemKind::Histogram: {
        // Repetition whose counts lie nearest the mean count vector.
        std::vector<double> centre(ev(per_rep.front()).size(), 0.0);
        for (std::size_t k = 0; k < per_rep.size(); ++k) {
            const auto v = ev(per_rep[k]);
            for (std::size_t j = 0; j < centre.size(); ++j) centre[j] += (v[j] - centre[j]) / static_cast<double>(k + 1);
        }
        std::size_t best = 0;
        double best_distance = eval_distance(ev(per_rep[0]), EvalVector{centre});
        for (std::size_t k = 1; k < per_rep.size(); ++k) {
            const double d = eval_distance(ev(per_rep[k]), EvalVector{centre});
            if (d < best_distance) {
                best = k;
                best_distance = d;
            }
        }
        return per_rep[best];
    }
    case ProblemKind::Test: {
        std::vector<double> ps;
        for (const auto& r : unwrap<PValueResult>(per_rep)) ps.push_back(r.p);
        return combine_test_K(ps);
    }
    case ProblemKind::Mle: return combine_mle_K(unwrap<MleResult>(per_rep));
    case ProblemKind::Knn: return combine_knn(unwrap<KnnResult>(per_rep), spec.params.k);
    case ProblemKind::Outlier: return combine_outlier_K(unwrap<OutlierResult>(per_rep), spec.combiner.tau);
    }
    fail(ErrorCode::InvalidSpec, "unknown problem");
}

RunReport run(const SolutionSpec& spec, ChunkSource& source, std::size_t workers, std::size_t memory_budget) {
    EngineOptions options;
    options.workers = workers;
    options.memory_budget = memory_budget;
    Engine engine(source, options);
    return engine.run(spec);
}

}  // namespace parcon
