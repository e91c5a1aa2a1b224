#pragma once

#include "parcon/engine.hpp"

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace parcon {

enum class DataFormat { Csv, Jsonl, F64le };

std::string_view to_string(DataFormat format);
// Accepts csv, jsonl and f64le (alias f64le-binary).
DataFormat parse_format(std::string_view name);

struct IngestOptions {
    DataFormat format = DataFormat::Csv;
    bool has_header = false;
    // Required for f64le; checked against the file for text formats.
    std::optional<std::size_t> dim;
    // File column holding a class label; it becomes the last coordinate.
    std::optional<std::size_t> label_column;
};

// File-backed source. The constructor scans the file once to validate every
// row and cache n and d; later passes re-read the file chunk by chunk.
class FileSource final : public ChunkSource {
public:
    FileSource(std::filesystem::path path, IngestOptions options);

    std::size_t size() const override { return n_; }
    std::size_t dim() const override { return dim_; }
    void rewind() override;
    bool next(Chunk& chunk, std::size_t max_points) override;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    // Reads the next data row into `row`; false at end of file.
    bool read_row(std::vector<double>& row);
    void parse_text_row(std::string_view line, std::vector<double>& row) const;
    void reorder_label(std::vector<double>& row) const;

    std::filesystem::path path_;
    IngestOptions options_;
    std::ifstream in_;
    std::size_t n_ = 0;
    std::size_t dim_ = 0;
    std::size_t line_ = 0;
    std::size_t emitted_ = 0;
    std::vector<double> scratch_;
};

std::unique_ptr<ChunkSource> ingest(const std::filesystem::path& path, const IngestOptions& options);

// Writes points as little-endian f64 rows.
void write_f64le(const std::filesystem::path& path, const EmpiricalMeasure& m);

}  // namespace parcon
