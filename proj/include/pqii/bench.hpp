#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pqii/pipeline.hpp"

namespace pqii {

inline constexpr const char* kBenchCsvVersionLine = "# pqii-bench v1";
inline constexpr const char* kBenchCsvHeader =
    "case_label,n_rows,n_dims,m,ks,chunks,threads,nlist,rmse,wall_seconds,phase,"
    "timestamp_iso8601";

struct BenchRow {
    std::string case_label;
    std::size_t n_rows = 0;
    std::size_t n_dims = 0;
    std::uint32_t m = 0;
    std::uint32_t ks = 0;
    std::size_t chunks = 0;
    std::size_t threads = 0;
    std::size_t nlist = 0;
    double rmse = 0.0;
    double wall_seconds = 0.0;
    std::string phase;      // "total"
    std::string timestamp;  // ISO 8601 UTC
};

struct BenchOptions {
    std::vector<PipelineMode> modes;
    std::vector<std::uint32_t> m_list{8};
    std::vector<std::uint32_t> ks_list{256};
    std::vector<std::size_t> chunks_list{8};
    std::size_t threads = 1;
    std::size_t nlist = 0;  // 0 -> default
    std::uint32_t kmeans_iters = kDefaultKMeansIters;
    std::uint64_t seed = 42;
    std::size_t n_seeds = 1;  // rmse/wall reported as the median over seeds
    bool verbose = false;
};

// One row per (mode, parameter point); parallel modes take the chunk grid,
// single collapses it. Timing columns are wall-clock; everything else is
// deterministic under a fixed seed.
std::vector<BenchRow> run_bench(const VectorMatrix& data, const BenchOptions& opts);

// Appends rows, writing the version comment and header first when the file
// is new or empty.
void append_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

// Parses a bench CSV; malformed rows are reported with their line number.
std::vector<BenchRow> read_bench_csv(const std::string& path);

std::string iso8601_utc_now();

}  // namespace pqii
