#include "parcon/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>

namespace parcon {

namespace {

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string where(std::size_t row, std::size_t column) {
    return "row " + std::to_string(row) + ", column " + std::to_string(column);
}

double parse_field(std::string_view field, std::size_t row, std::size_t column) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double value = 0.0;
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || end != field.data() + field.size())
        fail(ErrorCode::ParseError, where(row, column) + ": cannot parse '" + std::string(field) + "' as a number");
    return value;
}

void require_finite(double v, std::size_t row, std::size_t column) {
    if (!std::isfinite(v)) fail(ErrorCode::NonfiniteValue, where(row, column) + ": value is not finite");
}

}  // namespace

std::string_view to_string(DataFormat format) {
    switch (format) {
    case DataFormat::Csv: return "csv";
    case DataFormat::Jsonl: return "jsonl";
    case DataFormat::F64le: return "f64le";
    }
    return "?";
}

DataFormat parse_format(std::string_view name) {
    if (name == "csv") return DataFormat::Csv;
    if (name == "jsonl") return DataFormat::Jsonl;
    if (name == "f64le" || name == "f64le-binary") return DataFormat::F64le;
    fail(ErrorCode::InvalidSpec, "unknown data format '" + std::string(name) + "' (expected csv, jsonl or f64le)");
}

FileSource::FileSource(std::filesystem::path path, IngestOptions options)
    : path_(std::move(path)), options_(std::move(options)) {
    if (options_.format == DataFormat::F64le) {
        if (!options_.dim || *options_.dim == 0) fail(ErrorCode::InvalidSpec, "f64le data needs a positive dim");
        dim_ = *options_.dim;
        std::error_code ec;
        const auto bytes = std::filesystem::file_size(path_, ec);
        if (ec) fail(ErrorCode::IoError, "cannot read " + path_.string() + ": " + ec.message());
        if (bytes % (8 * dim_) != 0)
            fail(ErrorCode::DimensionMismatch, path_.string() + " holds " + std::to_string(bytes) +
                                                   " bytes, not a multiple of " + std::to_string(8 * dim_));
    }
    if (options_.label_column && options_.dim && *options_.label_column >= *options_.dim)
        fail(ErrorCode::IndexOutOfRange, "label_column " + std::to_string(*options_.label_column) +
                                             " is outside the " + std::to_string(*options_.dim) + " columns");

    rewind();
    std::vector<double> row;
    std::size_t count = 0;
    while (read_row(row)) ++count;
    if (count == 0) fail(ErrorCode::EmptyInput, path_.string() + " contains no data rows");
    n_ = count;
    rewind();
}

void FileSource::rewind() {
    in_.close();
    in_.clear();
    in_.open(path_, std::ios::binary);
    if (!in_) fail(ErrorCode::IoError, "cannot open " + path_.string());
    line_ = 0;
    emitted_ = 0;
    if (options_.has_header && options_.format != DataFormat::F64le) {
        std::string header;
        std::getline(in_, header);
        ++line_;
    }
}

void FileSource::parse_text_row(std::string_view line, std::vector<double>& row) const {
    row.clear();
    if (options_.format == DataFormat::Csv) {
        std::size_t column = 1;
        for (;;) {
            const auto comma = line.find(',');
            const double v = parse_field(line.substr(0, comma), line_, column);
            require_finite(v, line_, column);
            row.push_back(v);
            if (comma == std::string_view::npos) break;
            line.remove_prefix(comma + 1);
            ++column;
        }
        return;
    }
    const auto doc = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
    if (doc.is_discarded() || !doc.is_array() || doc.empty())
        fail(ErrorCode::ParseError, "row " + std::to_string(line_) + ": expected a non-empty JSON array of numbers");
    for (std::size_t c = 0; c < doc.size(); ++c) {
        if (!doc[c].is_number()) fail(ErrorCode::ParseError, where(line_, c + 1) + ": not a number");
        const double v = doc[c].get<double>();
        require_finite(v, line_, c + 1);
        row.push_back(v);
    }
}

void FileSource::reorder_label(std::vector<double>& row) const {
    if (!options_.label_column) return;
    const std::size_t label = *options_.label_column;
    if (label >= row.size())
        fail(ErrorCode::IndexOutOfRange, "row " + std::to_string(line_) + ": label_column " + std::to_string(label) +
                                             " is outside the " + std::to_string(row.size()) + " columns");
    std::rotate(row.begin() + static_cast<std::ptrdiff_t>(label), row.begin() + static_cast<std::ptrdiff_t>(label) + 1,
                row.end());
}

bool FileSource::read_row(std::vector<double>& row) {
    if (options_.format == DataFormat::F64le) {
        std::vector<unsigned char> bytes(8 * dim_);
        in_.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (in_.gcount() == 0) return false;
        ++line_;
        if (static_cast<std::size_t>(in_.gcount()) != bytes.size())
            fail(ErrorCode::DimensionMismatch, "row " + std::to_string(line_) + " is truncated");
        row.resize(dim_);
        for (std::size_t c = 0; c < dim_; ++c) {
            std::uint64_t bits = 0;
            for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[8 * c + static_cast<std::size_t>(b)];
            row[c] = std::bit_cast<double>(bits);
            require_finite(row[c], line_, c + 1);
        }
        reorder_label(row);
        return true;
    }

    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (trim(line).empty()) continue;
        parse_text_row(line, row);
        if (dim_ == 0) {
            dim_ = row.size();
            if (options_.dim && *options_.dim != dim_)
                fail(ErrorCode::DimensionMismatch, "row " + std::to_string(line_) + " has " + std::to_string(dim_) +
                                                       " columns but dim is " + std::to_string(*options_.dim));
        } else if (row.size() != dim_) {
            fail(ErrorCode::DimensionMismatch, "row " + std::to_string(line_) + " has " + std::to_string(row.size()) +
                                                   " columns, expected " + std::to_string(dim_));
        }
        reorder_label(row);
        return true;
    }
    if (in_.bad()) fail(ErrorCode::IoError, "read error in " + path_.string());
    return false;
}

bool FileSource::next(Chunk& chunk, std::size_t max_points) {
    chunk.first = emitted_;
    chunk.count = 0;
    chunk.dim = dim_;
    chunk.rows.clear();
    const std::size_t limit = std::max<std::size_t>(1, max_points);
    while (chunk.count < limit && emitted_ < n_ && read_row(scratch_)) {
        chunk.rows.insert(chunk.rows.end(), scratch_.begin(), scratch_.end());
        ++chunk.count;
        ++emitted_;
    }
    return chunk.count > 0;
}

std::unique_ptr<ChunkSource> ingest(const std::filesystem::path& path, const IngestOptions& options) {
    return std::make_unique<FileSource>(path, options);
}

void write_f64le(const std::filesystem::path& path, const EmpiricalMeasure& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot create " + path.string());
    std::vector<unsigned char> bytes;
    bytes.reserve(8 * m.rows().size());
    for (double v : m.rows()) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace parcon
