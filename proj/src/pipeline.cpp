#include "pqii/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstring>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pqii/thread_pool.hpp"

namespace pqii {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Marker for tasks skipped after another chunk already failed.
struct CancelledTask : std::exception {
    const char* what() const noexcept override { return "cancelled"; }
};

// Runs one task per chunk on `pool`, gathers results in chunk order, and
// rethrows the lowest-id real failure after draining.
template <typename Fn>
auto run_chunk_tasks(ThreadPool& pool, const std::vector<RowRange>& ranges,
                     std::atomic<bool>& cancelled, Fn&& fn) {
    using Out = std::invoke_result_t<Fn, std::size_t, RowRange>;
    std::vector<std::future<Out>> futures;
    futures.reserve(ranges.size());
    for (std::size_t chunk_id = 0; chunk_id < ranges.size(); ++chunk_id) {
        futures.push_back(pool.submit([&fn, &cancelled, chunk_id, range = ranges[chunk_id]] {
            if (cancelled.load(std::memory_order_relaxed)) throw CancelledTask{};
            try {
                return fn(chunk_id, range);
            } catch (const CancelledTask&) {
                throw;
            } catch (const std::exception& e) {
                cancelled.store(true, std::memory_order_relaxed);
                throw std::runtime_error("chunk " + std::to_string(chunk_id) + ": " + e.what());
            }
        }));
    }
    std::vector<Out> outputs;
    outputs.reserve(ranges.size());
    std::exception_ptr first_error;
    for (auto& fut : futures) {
        try {
            outputs.push_back(fut.get());
        } catch (const CancelledTask&) {
            // skipped task; the originating failure is reported instead
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return outputs;
}

}  // namespace

const char* to_string(PipelineMode mode) {
    switch (mode) {
        case PipelineMode::kSingle: return "single";
        case PipelineMode::kParallelPq: return "parallel_pq";
        case PipelineMode::kParallelPqIndex: return "parallel_pq_index";
    }
    return "unknown";
}

std::optional<PipelineMode> parse_mode(std::string_view name) {
    if (name == "single") return PipelineMode::kSingle;
    if (name == "parallel_pq") return PipelineMode::kParallelPq;
    if (name == "parallel_pq_index") return PipelineMode::kParallelPqIndex;
    return std::nullopt;
}

ChunkOutput train_chunk(const VectorMatrix& chunk, std::uint32_t m, std::uint32_t ks,
                        std::uint32_t iters, std::uint64_t chunk_seed) {
    if (chunk.rows < ks) {
        throw std::invalid_argument("train_chunk: chunk has " + std::to_string(chunk.rows) +
                                    " rows, fewer than ks=" + std::to_string(ks));
    }
    const auto start = Clock::now();
    const Codebook local = pq_fit(chunk, m, ks, iters, chunk_seed);

    // Representative j is local codeword j from every subspace, concatenated:
    // the decode of code row (j, ..., j). Only these ks rows leave the chunk.
    ChunkOutput out;
    out.representatives = VectorMatrix(ks, local.dims());
    const std::size_t ds = local.sub_dim;
    for (std::uint32_t j = 0; j < ks; ++j) {
        float* row = out.representatives.row(j);
        for (std::uint32_t sub = 0; sub < m; ++sub) {
            std::memcpy(row + std::size_t(sub) * ds, local.codeword(sub, j), ds * sizeof(float));
        }
    }
    out.local_rmse = reconstruction_rmse(local, chunk);
    out.wall_seconds = seconds_since(start);
    return out;
}

VectorMatrix aggregate_representatives(const std::vector<ChunkOutput>& outputs) {
    if (outputs.empty()) throw std::invalid_argument("aggregate_representatives: no outputs");
    std::vector<std::size_t> order(outputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return outputs[a].chunk_id < outputs[b].chunk_id;
    });

    const std::size_t d = outputs.front().representatives.dims;
    std::size_t total_rows = 0;
    for (const auto& out : outputs) {
        if (out.representatives.dims != d) {
            throw std::invalid_argument("aggregate_representatives: dimension mismatch at chunk " +
                                        std::to_string(out.chunk_id));
        }
        total_rows += out.representatives.rows;
    }

    VectorMatrix combined(total_rows, d);
    std::size_t at = 0;
    for (const std::size_t i : order) {
        const auto& reps = outputs[i].representatives;
        std::memcpy(combined.row(at), reps.values.data(), reps.values.size() * sizeof(float));
        at += reps.rows;
    }
    return combined;
}

Codebook fit_global(const VectorMatrix& representatives, std::uint32_t m, std::uint32_t ks,
                    std::uint32_t iters, std::uint64_t seed) {
    return pq_fit(representatives, m, ks, iters, seed);
}

PipelineReport run_pipeline(const VectorMatrix& data, const PipelineConfig& config) {
    if (data.rows == 0 || data.dims == 0) {
        throw std::invalid_argument("run_pipeline: empty dataset");
    }
    if (config.n_threads == 0) throw std::invalid_argument("run_pipeline: n_threads must be >= 1");

    PipelineReport report;
    report.config = config;
    report.config.nlist = config.nlist == 0 ? default_nlist(data.rows) : config.nlist;
    if (config.nlist == 0 && config.mode == PipelineMode::kParallelPqIndex) {
        // shared coarse centroids are trained on the C*ks representatives,
        // so the defaulted nlist cannot exceed that row count
        report.config.nlist = std::min<std::size_t>(
            report.config.nlist, std::size_t(config.n_chunks) * config.ks);
    }

    const auto total_start = Clock::now();
    auto timed = [&](const char* phase, auto&& body) {
        const auto start = Clock::now();
        body();
        report.phase_seconds[phase] = seconds_since(start);
    };

    if (config.mode == PipelineMode::kSingle) {
        timed("fit", [&] {
            report.global_codebook =
                pq_fit(data, config.m_subspaces, config.ks, config.kmeans_iters, config.seed);
        });
        timed("encode", [&] {
            report.global_rmse = reconstruction_rmse(report.global_codebook, data);
        });
        report.single_rmse = report.global_rmse;
        report.total_seconds = seconds_since(total_start);
        return report;
    }

    std::vector<RowRange> ranges;
    timed("chunking", [&] { ranges = chunk_rows(data.rows, config.n_chunks); });

    ThreadPool pool(config.n_threads);
    std::atomic<bool> cancelled{false};

    // Local fits: chunk c trains with seed + c and returns ks decoded
    // centroids; completion order never affects the aggregate.
    std::vector<ChunkOutput> outputs;
    timed("local_fit", [&] {
        outputs = run_chunk_tasks(pool, ranges, cancelled, [&](std::size_t chunk_id, RowRange r) {
            ChunkOutput out = train_chunk(slice_rows(data, r), config.m_subspaces, config.ks,
                                          config.kmeans_iters, config.seed + chunk_id);
            out.chunk_id = chunk_id;
            return out;
        });
    });

    VectorMatrix representatives = aggregate_representatives(outputs);
    timed("global_fit", [&] {
        report.global_codebook = fit_global(representatives, config.m_subspaces, config.ks,
                                            config.kmeans_iters, config.seed);
    });

    if (config.mode == PipelineMode::kParallelPq) {
        // Accuracy is measured on the original data, not the representatives.
        timed("encode", [&] {
            report.global_rmse = reconstruction_rmse(report.global_codebook, data);
        });
        report.representatives = std::move(representatives);
        report.total_seconds = seconds_since(total_start);
        return report;
    }

    // parallel_pq_index: shared coarse centroids come from one k-means over
    // the representative matrix so that per-chunk indexes merge exactly.
    VectorMatrix coarse;
    timed("coarse_fit", [&] {
        coarse = kmeans_fit(representatives, report.config.nlist, config.kmeans_iters,
                            config.seed + config.m_subspaces)
                     .centroids;
    });

    struct ChunkCodes {
        std::size_t chunk_id = 0;
        CodeMatrix codes;
    };
    std::vector<ChunkCodes> chunk_codes;
    timed("encode", [&] {
        chunk_codes =
            run_chunk_tasks(pool, ranges, cancelled, [&](std::size_t chunk_id, RowRange r) {
                return ChunkCodes{chunk_id,
                                  pq_encode(report.global_codebook, slice_rows(data, r))};
            });
        std::sort(chunk_codes.begin(), chunk_codes.end(),
                  [](const ChunkCodes& a, const ChunkCodes& b) { return a.chunk_id < b.chunk_id; });

        CodeMatrix all(0, config.m_subspaces, config.ks);
        all.bytes.reserve(data.rows * all.row_bytes());
        for (const auto& cc : chunk_codes) {
            all.bytes.insert(all.bytes.end(), cc.codes.bytes.begin(), cc.codes.bytes.end());
            all.rows += cc.codes.rows;
        }
        report.global_rmse = rmse(data, pq_decode(report.global_codebook, all));
    });

    std::vector<InvertedIndex> chunk_indexes;
    timed("index_build", [&] {
        chunk_indexes =
            run_chunk_tasks(pool, ranges, cancelled, [&](std::size_t chunk_id, RowRange r) {
                std::vector<std::uint64_t> ids(r.size());
                std::iota(ids.begin(), ids.end(), std::uint64_t(r.begin));
                return ivf_build_with_centroids(report.global_codebook,
                                                chunk_codes[chunk_id].codes, ids, coarse);
            });
    });

    timed("merge", [&] {
        InvertedIndex merged = std::move(chunk_indexes.front());
        for (std::size_t i = 1; i < chunk_indexes.size(); ++i) {
            merged = ivf_merge(merged, chunk_indexes[i]);
        }
        report.merged_index = std::move(merged);
    });

    report.representatives = std::move(representatives);
    report.total_seconds = seconds_since(total_start);
    return report;
}

std::string PipelineReport::summary() const {
    std::ostringstream out;
    out << "mode: " << to_string(config.mode) << '\n';
    out << "params: M=" << config.m_subspaces << " Ks=" << config.ks
        << " C=" << config.n_chunks << " T=" << config.n_threads << " nlist=" << config.nlist
        << " iters=" << config.kmeans_iters << " seed=" << config.seed << '\n';
    out << "phases:";
    for (const auto& [phase, secs] : phase_seconds) {
        out << ' ' << phase << '=' << std::fixed;
        out.precision(3);
        out << secs << 's';
        out.unsetf(std::ios::fixed);
    }
    out << '\n';
    out.precision(3);
    out << "total: " << std::fixed << total_seconds << "s\n";
    out.unsetf(std::ios::fixed);
    out.precision(9);
    out << "rmse: " << global_rmse << '\n';
    if (merged_index) {
        out << "index: " << merged_index->n_items << " items across "
            << merged_index->nlist() << " lists\n";
    }
    return out.str();
}

}  // namespace pqii
