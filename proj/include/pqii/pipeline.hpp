#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pqii/dataset_io.hpp"
#include "pqii/ivf.hpp"

namespace pqii {

// single:            one PQ fit over the full data.
// parallel_pq:       chunked local fits -> decoded-centroid aggregation ->
//                    global refit; reconstruction error measured on the
//                    original data with the global model.
// parallel_pq_index: additionally encodes chunks in parallel with the global
//                    model, builds per-chunk inverted indexes against shared
//                    coarse centroids, and merges them.
enum class PipelineMode { kSingle, kParallelPq, kParallelPqIndex };

const char* to_string(PipelineMode mode);
std::optional<PipelineMode> parse_mode(std::string_view name);

struct PipelineConfig {
    std::size_t n_chunks = 1;     // C
    std::uint32_t m_subspaces = 8;
    std::uint32_t ks = 256;
    std::size_t nlist = 0;        // 0 -> default_nlist(n_rows)
    std::uint32_t kmeans_iters = kDefaultKMeansIters;
    std::uint64_t seed = 0;
    std::size_t n_threads = 1;    // T
    PipelineMode mode = PipelineMode::kSingle;
};

// What one worker returns for its chunk: the decoded local centroids (ks
// rows of full dimension D), never the chunk's encoded rows.
struct ChunkOutput {
    std::size_t chunk_id = 0;
    VectorMatrix representatives;  // ks x D
    double local_rmse = 0.0;
    double wall_seconds = 0.0;
};

struct PipelineReport {
    PipelineConfig config;  // echo, with nlist resolved
    Codebook global_codebook;
    double global_rmse = 0.0;
    std::optional<double> single_rmse;             // set in single mode
    std::map<std::string, double> phase_seconds;
    double total_seconds = 0.0;
    std::optional<VectorMatrix> representatives;   // combined centroid dataset, parallel modes
    std::optional<InvertedIndex> merged_index;     // set in parallel_pq_index mode

    std::string summary() const;
};

// Fits a local PQ on the chunk and decodes its codewords: representative j
// is the concatenation over subspaces of local codeword j. chunk_id is left
// for the caller to fill in.
ChunkOutput train_chunk(const VectorMatrix& chunk, std::uint32_t m, std::uint32_t ks,
                        std::uint32_t iters, std::uint64_t chunk_seed);

// Row-concatenation in ascending chunk_id order, regardless of the order the
// outputs arrived in.
VectorMatrix aggregate_representatives(const std::vector<ChunkOutput>& outputs);

Codebook fit_global(const VectorMatrix& representatives, std::uint32_t m,
                    std::uint32_t ks, std::uint32_t iters, std::uint64_t seed);

// Runs the configured mode. Chunk tasks run on a pool of n_threads workers
// with chunk_seed = seed + chunk_id; all reductions are ordered by chunk_id,
// so results are identical for any thread count. A chunk failure cancels
// outstanding tasks and aborts with the chunk id.
PipelineReport run_pipeline(const VectorMatrix& data, const PipelineConfig& config);

}  // namespace pqii
