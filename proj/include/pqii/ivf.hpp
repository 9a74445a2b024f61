#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "pqii/pq.hpp"

namespace pqii {

struct PostingList {
    std::vector<std::uint64_t> ids;
    CodeMatrix codes;  // one row per id
};

// Inverted file over PQ codes: items live in the posting list of the coarse
// centroid nearest to their decoded vector (ties to the lowest index).
// Frozen indexes are safe for concurrent readers; add/merge need exclusive
// access.
struct InvertedIndex {
    Codebook codebook;
    VectorMatrix coarse_centroids;  // nlist x D
    std::vector<PostingList> lists;
    std::size_t n_items = 0;
    std::unordered_set<std::uint64_t> id_set;  // rebuilt on load, not serialized

    std::size_t nlist() const { return lists.size(); }
};

struct Hit {
    std::uint64_t id = 0;
    double sq_dist = 0.0;

    friend bool operator==(const Hit&, const Hit&) = default;
};

// Hits sorted ascending by distance, ties by id; at most k_requested.
struct QueryResult {
    std::vector<Hit> hits;
    std::size_t k_requested = 0;
};

// round(sqrt(n_items)) clamped to [1, n_items].
std::size_t default_nlist(std::size_t n_items);

// Coarse centroids come from k-means over the decoded codes.
InvertedIndex ivf_build(const Codebook& cb, const CodeMatrix& codes,
                        std::span<const std::uint64_t> ids, std::size_t nlist,
                        std::uint64_t seed,
                        std::uint32_t kmeans_iters = kDefaultKMeansIters);

// Same assignment rule against caller-provided centroids; this is what makes
// independently built indexes mergeable.
InvertedIndex ivf_build_with_centroids(const Codebook& cb, const CodeMatrix& codes,
                                       std::span<const std::uint64_t> ids,
                                       const VectorMatrix& coarse_centroids);

// Assigns new items to the existing coarse centroids; no re-clustering.
void ivf_add(InvertedIndex& index, const CodeMatrix& codes,
             std::span<const std::uint64_t> ids);

// Requires identical codebooks and coarse centroids and disjoint id sets.
// Posting list l of the result is a's list l followed by b's.
InvertedIndex ivf_merge(const InvertedIndex& a, const InvertedIndex& b);

// Scans the nprobe posting lists whose coarse centroids are nearest the
// query and scores candidates by ADC lookup (the query is never quantized).
// max_sq_dist, when set, drops hits farther than the threshold.
QueryResult ivf_query(const InvertedIndex& index, std::span<const float> query,
                      std::size_t k, std::size_t nprobe,
                      std::optional<double> max_sq_dist = std::nullopt);

// ivf_query restricted to candidates in `subset` (sorted ascending, unique).
QueryResult ivf_query_subset(const InvertedIndex& index, std::span<const float> query,
                             std::size_t k, std::span<const std::uint64_t> subset,
                             std::size_t nprobe,
                             std::optional<double> max_sq_dist = std::nullopt);

// Exhaustive ADC scan over all codes; the exactness baseline for ivf_query.
QueryResult flat_scan(const Codebook& cb, const CodeMatrix& codes,
                      std::span<const std::uint64_t> ids, std::span<const float> query,
                      std::size_t k,
                      std::optional<double> max_sq_dist = std::nullopt);

// Index file: "PQII", version u32=1, embedded codebook block, nlist u32,
// coarse centroids (nlist*D float32 LE), then per list: length u64 and
// entries of id u64 + packed code row.
void save_index(const InvertedIndex& index, const std::string& path);
InvertedIndex load_index(const std::string& path);

}  // namespace pqii
