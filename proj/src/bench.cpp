#include "pqii/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace pqii {

namespace {

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: no values");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

std::string format_row(const BenchRow& r) {
    char num[64];
    std::ostringstream out;
    out << r.case_label << ',' << r.n_rows << ',' << r.n_dims << ',' << r.m << ',' << r.ks << ','
        << r.chunks << ',' << r.threads << ',' << r.nlist << ',';
    std::snprintf(num, sizeof(num), "%.9g", r.rmse);
    out << num << ',';
    std::snprintf(num, sizeof(num), "%.3f", r.wall_seconds);
    out << num << ',' << r.phase << ',' << r.timestamp;
    return out.str();
}

template <typename T>
T parse_field(const std::string& field, std::size_t line_no, const char* name) {
    T value{};
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": cannot parse " + name +
                                 " '" + field + "'");
    }
    return value;
}

}  // namespace

std::string iso8601_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<BenchRow> run_bench(const VectorMatrix& data, const BenchOptions& opts) {
    if (opts.modes.empty()) throw std::invalid_argument("run_bench: no modes selected");
    if (opts.m_list.empty() || opts.ks_list.empty() || opts.chunks_list.empty()) {
        throw std::invalid_argument("run_bench: empty parameter list");
    }
    if (opts.n_seeds == 0) throw std::invalid_argument("run_bench: n_seeds must be >= 1");

    std::vector<BenchRow> rows;
    for (const PipelineMode mode : opts.modes) {
        // the chunk grid only matters for the parallel modes
        const std::vector<std::size_t> chunk_grid =
            mode == PipelineMode::kSingle ? std::vector<std::size_t>{1} : opts.chunks_list;
        for (const std::uint32_t m : opts.m_list) {
            for (const std::uint32_t ks : opts.ks_list) {
                for (const std::size_t chunks : chunk_grid) {
                    std::vector<double> rmses, walls;
                    std::size_t nlist_used = 0;
                    for (std::size_t s = 0; s < opts.n_seeds; ++s) {
                        PipelineConfig config;
                        config.mode = mode;
                        config.n_chunks = chunks;
                        config.m_subspaces = m;
                        config.ks = ks;
                        config.nlist = opts.nlist;
                        config.kmeans_iters = opts.kmeans_iters;
                        config.seed = opts.seed + s;
                        config.n_threads = mode == PipelineMode::kSingle ? 1 : opts.threads;
                        const PipelineReport report = run_pipeline(data, config);
                        rmses.push_back(report.global_rmse);
                        walls.push_back(report.total_seconds);
                        nlist_used = report.config.nlist;
                        if (opts.verbose) std::cerr << report.summary();
                    }
                    BenchRow row;
                    row.case_label = to_string(mode);
                    row.n_rows = data.rows;
                    row.n_dims = data.dims;
                    row.m = m;
                    row.ks = ks;
                    row.chunks = chunks;
                    row.threads = mode == PipelineMode::kSingle ? 1 : opts.threads;
                    row.nlist = nlist_used;
                    row.rmse = median(rmses);
                    row.wall_seconds = median(walls);
                    row.phase = "total";
                    row.timestamp = iso8601_utc_now();
                    rows.push_back(std::move(row));
                }
            }
        }
    }
    return rows;
}

void append_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    if (fresh) out << kBenchCsvVersionLine << '\n' << kBenchCsvHeader << '\n';
    for (const auto& row : rows) out << format_row(row) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<BenchRow> read_bench_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);

    std::vector<BenchRow> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            if (line != kBenchCsvHeader) {
                throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                         ": unexpected header");
            }
            header_seen = true;
            continue;
        }

        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        if (fields.size() != 12) {
            throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": expected 12 fields, got " +
                                     std::to_string(fields.size()));
        }

        BenchRow row;
        row.case_label = fields[0];
        if (!parse_mode(row.case_label)) {
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": unknown case_label '" + row.case_label + "'");
        }
        row.n_rows = parse_field<std::size_t>(fields[1], line_no, "n_rows");
        row.n_dims = parse_field<std::size_t>(fields[2], line_no, "n_dims");
        row.m = parse_field<std::uint32_t>(fields[3], line_no, "m");
        row.ks = parse_field<std::uint32_t>(fields[4], line_no, "ks");
        row.chunks = parse_field<std::size_t>(fields[5], line_no, "chunks");
        row.threads = parse_field<std::size_t>(fields[6], line_no, "threads");
        row.nlist = parse_field<std::size_t>(fields[7], line_no, "nlist");
        row.rmse = parse_field<double>(fields[8], line_no, "rmse");
        row.wall_seconds = parse_field<double>(fields[9], line_no, "wall_seconds");
        row.phase = fields[10];
        row.timestamp = fields[11];
        if (row.rmse < 0 || row.wall_seconds < 0) {
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": negative metric");
        }
        rows.push_back(std::move(row));
    }
    if (!header_seen) throw std::runtime_error(path + ": missing header");
    return rows;
}

}  // namespace pqii
