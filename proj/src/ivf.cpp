#include "pqii/ivf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "io_util.hpp"

namespace pqii {

namespace {

constexpr char kIndexMagic[4] = {'P', 'Q', 'I', 'I'};
constexpr char kCodebookMagic[4] = {'P', 'Q', 'C', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

void check_ids_unique(std::span<const std::uint64_t> ids, std::unordered_set<std::uint64_t>& out) {
    out.reserve(ids.size());
    for (const std::uint64_t id : ids) {
        if (!out.insert(id).second) {
            throw std::invalid_argument("duplicate id " + std::to_string(id));
        }
    }
}

std::vector<PostingList> make_lists(std::size_t nlist, std::uint32_t m, std::uint32_t ks) {
    std::vector<PostingList> lists(nlist);
    for (auto& l : lists) l.codes = CodeMatrix(0, m, ks);
    return lists;
}

// Appends every (id, code) to the posting list of the coarse centroid
// nearest its decoded vector.
void assign_items(InvertedIndex& index, const CodeMatrix& codes,
                  std::span<const std::uint64_t> ids) {
    const std::size_t d = index.codebook.dims();
    std::vector<float> decoded(d);
    for (std::size_t i = 0; i < codes.rows; ++i) {
        pq_decode_row(index.codebook, codes, i, decoded.data());
        const auto nc = nearest_in_table(decoded.data(), index.coarse_centroids.values.data(),
                                         index.coarse_centroids.rows, d);
        PostingList& list = index.lists[nc.index];
        list.ids.push_back(ids[i]);
        list.codes.append_row_from(codes, i);
    }
    index.n_items += codes.rows;
}

struct HitLess {
    bool operator()(const Hit& a, const Hit& b) const {
        if (a.sq_dist != b.sq_dist) return a.sq_dist < b.sq_dist;
        return a.id < b.id;
    }
};

QueryResult finalize_hits(std::vector<Hit>& hits, std::size_t k) {
    QueryResult result;
    result.k_requested = k;
    if (hits.size() > k) {
        std::nth_element(hits.begin(), hits.begin() + k, hits.end(), HitLess{});
        hits.resize(k);
    }
    std::sort(hits.begin(), hits.end(), HitLess{});
    result.hits = std::move(hits);
    return result;
}

void scan_list(const PostingList& list, const DistanceTable& table,
               std::optional<double> max_sq_dist, std::vector<Hit>& hits) {
    for (std::size_t i = 0; i < list.ids.size(); ++i) {
        const double dist = adc_lookup(table, list.codes, i);
        if (max_sq_dist && dist > *max_sq_dist) continue;
        hits.push_back({list.ids[i], dist});
    }
}

void scan_list_subset(const PostingList& list, const DistanceTable& table,
                      std::span<const std::uint64_t> subset,
                      std::optional<double> max_sq_dist, std::vector<Hit>& hits) {
    for (std::size_t i = 0; i < list.ids.size(); ++i) {
        if (!std::binary_search(subset.begin(), subset.end(), list.ids[i])) continue;
        const double dist = adc_lookup(table, list.codes, i);
        if (max_sq_dist && dist > *max_sq_dist) continue;
        hits.push_back({list.ids[i], dist});
    }
}

// Indexes of the nprobe coarse centroids nearest the query, ties by index.
std::vector<std::size_t> probe_order(const InvertedIndex& index, std::span<const float> query,
                                     std::size_t nprobe) {
    std::vector<std::pair<double, std::size_t>> order(index.nlist());
    for (std::size_t c = 0; c < index.nlist(); ++c) {
        order[c] = {squared_l2(query.data(), index.coarse_centroids.row(c), query.size()), c};
    }
    std::partial_sort(order.begin(), order.begin() + nprobe, order.end());
    std::vector<std::size_t> probes(nprobe);
    for (std::size_t p = 0; p < nprobe; ++p) probes[p] = order[p].second;
    return probes;
}

void check_query(const InvertedIndex& index, std::span<const float> query, std::size_t k,
                 std::size_t nprobe) {
    if (k == 0) throw std::invalid_argument("query: k must be >= 1");
    if (query.size() != index.codebook.dims()) {
        throw std::invalid_argument("query: dimension mismatch");
    }
    if (nprobe == 0 || nprobe > index.nlist()) {
        throw std::invalid_argument("query: nprobe (" + std::to_string(nprobe) +
                                    ") must be in [1, nlist=" + std::to_string(index.nlist()) +
                                    "]");
    }
}

}  // namespace

std::size_t default_nlist(std::size_t n_items) {
    const auto r = static_cast<std::size_t>(std::llround(std::sqrt(double(n_items))));
    return std::clamp<std::size_t>(r, 1, n_items == 0 ? 1 : n_items);
}

InvertedIndex ivf_build(const Codebook& cb, const CodeMatrix& codes,
                        std::span<const std::uint64_t> ids, std::size_t nlist,
                        std::uint64_t seed, std::uint32_t kmeans_iters) {
    if (ids.empty()) throw std::invalid_argument("ivf_build: no items");
    if (ids.size() != codes.rows) throw std::invalid_argument("ivf_build: ids/codes length mismatch");
    if (nlist == 0 || nlist > ids.size()) {
        throw std::invalid_argument("ivf_build: nlist (" + std::to_string(nlist) +
                                    ") must be in [1, n_items=" + std::to_string(ids.size()) + "]");
    }
    const VectorMatrix decoded = pq_decode(cb, codes);
    const KMeansResult km = kmeans_fit(decoded, nlist, kmeans_iters, seed);

    InvertedIndex index;
    index.codebook = cb;
    index.coarse_centroids = km.centroids;
    index.lists = make_lists(nlist, cb.m_subspaces, cb.ks);
    check_ids_unique(ids, index.id_set);
    // The final k-means pass leaves assignments consistent with the
    // returned centroids, so they are exactly the nearest-centroid choices.
    for (std::size_t i = 0; i < codes.rows; ++i) {
        PostingList& list = index.lists[km.assignments[i]];
        list.ids.push_back(ids[i]);
        list.codes.append_row_from(codes, i);
    }
    index.n_items = codes.rows;
    return index;
}

InvertedIndex ivf_build_with_centroids(const Codebook& cb, const CodeMatrix& codes,
                                       std::span<const std::uint64_t> ids,
                                       const VectorMatrix& coarse_centroids) {
    if (ids.empty()) throw std::invalid_argument("ivf_build: no items");
    if (ids.size() != codes.rows) throw std::invalid_argument("ivf_build: ids/codes length mismatch");
    if (coarse_centroids.rows == 0 || coarse_centroids.dims != cb.dims()) {
        throw std::invalid_argument("ivf_build: coarse centroids do not match the codebook");
    }
    InvertedIndex index;
    index.codebook = cb;
    index.coarse_centroids = coarse_centroids;
    index.lists = make_lists(coarse_centroids.rows, cb.m_subspaces, cb.ks);
    check_ids_unique(ids, index.id_set);
    assign_items(index, codes, ids);
    return index;
}

void ivf_add(InvertedIndex& index, const CodeMatrix& codes,
             std::span<const std::uint64_t> ids) {
    if (ids.size() != codes.rows) throw std::invalid_argument("ivf_add: ids/codes length mismatch");
    if (codes.m_subspaces != index.codebook.m_subspaces || codes.ks != index.codebook.ks) {
        throw std::invalid_argument("ivf_add: codes do not match the index codebook");
    }
    if (ids.empty()) return;
    std::unordered_set<std::uint64_t> fresh;
    check_ids_unique(ids, fresh);
    for (const std::uint64_t id : ids) {
        if (index.id_set.contains(id)) {
            throw std::invalid_argument("ivf_add: id collision on id " + std::to_string(id));
        }
    }
    assign_items(index, codes, ids);
    index.id_set.merge(fresh);
}

InvertedIndex ivf_merge(const InvertedIndex& a, const InvertedIndex& b) {
    if (!(a.codebook == b.codebook)) throw std::invalid_argument("ivf_merge: codebook mismatch");
    if (!(a.coarse_centroids == b.coarse_centroids)) {
        throw std::invalid_argument("ivf_merge: coarse centroid mismatch");
    }
    const auto& small = a.id_set.size() <= b.id_set.size() ? a.id_set : b.id_set;
    const auto& large = a.id_set.size() <= b.id_set.size() ? b.id_set : a.id_set;
    for (const std::uint64_t id : small) {
        if (large.contains(id)) {
            throw std::invalid_argument("ivf_merge: id collision on id " + std::to_string(id));
        }
    }

    InvertedIndex out;
    out.codebook = a.codebook;
    out.coarse_centroids = a.coarse_centroids;
    out.lists.resize(a.lists.size());
    for (std::size_t l = 0; l < a.lists.size(); ++l) {
        PostingList& dst = out.lists[l];
        dst.ids = a.lists[l].ids;
        dst.ids.insert(dst.ids.end(), b.lists[l].ids.begin(), b.lists[l].ids.end());
        dst.codes = a.lists[l].codes;
        dst.codes.bytes.insert(dst.codes.bytes.end(), b.lists[l].codes.bytes.begin(),
                               b.lists[l].codes.bytes.end());
        dst.codes.rows += b.lists[l].codes.rows;
    }
    out.n_items = a.n_items + b.n_items;
    out.id_set = a.id_set;
    out.id_set.insert(b.id_set.begin(), b.id_set.end());
    return out;
}

QueryResult ivf_query(const InvertedIndex& index, std::span<const float> query,
                      std::size_t k, std::size_t nprobe,
                      std::optional<double> max_sq_dist) {
    check_query(index, query, k, nprobe);
    const DistanceTable table = adc_table(index.codebook, query);
    std::vector<Hit> hits;
    for (const std::size_t list_idx : probe_order(index, query, nprobe)) {
        scan_list(index.lists[list_idx], table, max_sq_dist, hits);
    }
    return finalize_hits(hits, k);
}

QueryResult ivf_query_subset(const InvertedIndex& index, std::span<const float> query,
                             std::size_t k, std::span<const std::uint64_t> subset,
                             std::size_t nprobe, std::optional<double> max_sq_dist) {
    check_query(index, query, k, nprobe);
    for (std::size_t i = 1; i < subset.size(); ++i) {
        if (subset[i - 1] >= subset[i]) {
            throw std::invalid_argument("ivf_query_subset: subset is not sorted ascending");
        }
    }
    const DistanceTable table = adc_table(index.codebook, query);
    std::vector<Hit> hits;
    for (const std::size_t list_idx : probe_order(index, query, nprobe)) {
        scan_list_subset(index.lists[list_idx], table, subset, max_sq_dist, hits);
    }
    return finalize_hits(hits, k);
}

QueryResult flat_scan(const Codebook& cb, const CodeMatrix& codes,
                      std::span<const std::uint64_t> ids, std::span<const float> query,
                      std::size_t k, std::optional<double> max_sq_dist) {
    if (k == 0) throw std::invalid_argument("flat_scan: k must be >= 1");
    if (ids.size() != codes.rows) throw std::invalid_argument("flat_scan: ids/codes length mismatch");
    if (query.size() != cb.dims()) throw std::invalid_argument("flat_scan: dimension mismatch");
    const DistanceTable table = adc_table(cb, query);
    std::vector<Hit> hits;
    hits.reserve(codes.rows);
    for (std::size_t i = 0; i < codes.rows; ++i) {
        const double dist = adc_lookup(table, codes, i);
        if (max_sq_dist && dist > *max_sq_dist) continue;
        hits.push_back({ids[i], dist});
    }
    return finalize_hits(hits, k);
}

void save_index(const InvertedIndex& index, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    detail::write_bytes(out, kIndexMagic, 4);
    detail::write_u32(out, kFormatVersion);

    // embedded codebook block
    detail::write_bytes(out, kCodebookMagic, 4);
    detail::write_u32(out, kFormatVersion);
    detail::write_u32(out, index.codebook.m_subspaces);
    detail::write_u32(out, index.codebook.ks);
    detail::write_u32(out, index.codebook.sub_dim);
    out.write(reinterpret_cast<const char*>(index.codebook.tables.data()),
              static_cast<std::streamsize>(index.codebook.tables.size() * sizeof(float)));

    detail::write_u32(out, static_cast<std::uint32_t>(index.nlist()));
    out.write(reinterpret_cast<const char*>(index.coarse_centroids.values.data()),
              static_cast<std::streamsize>(index.coarse_centroids.values.size() * sizeof(float)));

    for (const auto& list : index.lists) {
        detail::write_u64(out, list.ids.size());
        const std::size_t rb = list.codes.row_bytes();
        for (std::size_t i = 0; i < list.ids.size(); ++i) {
            detail::write_u64(out, list.ids[i]);
            out.write(reinterpret_cast<const char*>(list.codes.bytes.data() + i * rb),
                      static_cast<std::streamsize>(rb));
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

InvertedIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    detail::expect_magic(in, kIndexMagic, "index file");
    const std::uint32_t version = detail::read_u32(in, "version");
    if (version != kFormatVersion) {
        throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
    }

    InvertedIndex index;
    detail::expect_magic(in, kCodebookMagic, "embedded codebook");
    const std::uint32_t cb_version = detail::read_u32(in, "codebook version");
    if (cb_version != kFormatVersion) {
        throw std::runtime_error(path + ": unsupported codebook version");
    }
    index.codebook.m_subspaces = detail::read_u32(in, "M");
    index.codebook.ks = detail::read_u32(in, "Ks");
    index.codebook.sub_dim = detail::read_u32(in, "sub_dim");
    if (index.codebook.m_subspaces == 0 || index.codebook.ks == 0 || index.codebook.sub_dim == 0) {
        throw std::runtime_error(path + ": invalid codebook header");
    }
    index.codebook.tables.resize(std::size_t(index.codebook.m_subspaces) * index.codebook.ks *
                                 index.codebook.sub_dim);
    detail::read_bytes(in, index.codebook.tables.data(),
                       index.codebook.tables.size() * sizeof(float), "codebook tables");

    const std::uint32_t nlist = detail::read_u32(in, "nlist");
    if (nlist == 0) throw std::runtime_error(path + ": nlist must be >= 1");
    index.coarse_centroids = VectorMatrix(nlist, index.codebook.dims());
    detail::read_bytes(in, index.coarse_centroids.values.data(),
                       index.coarse_centroids.values.size() * sizeof(float), "coarse centroids");

    index.lists = make_lists(nlist, index.codebook.m_subspaces, index.codebook.ks);
    for (auto& list : index.lists) {
        const std::uint64_t len = detail::read_u64(in, "list length");
        const std::size_t rb = list.codes.row_bytes();
        list.ids.resize(static_cast<std::size_t>(len));
        list.codes.bytes.resize(static_cast<std::size_t>(len) * rb);
        list.codes.rows = static_cast<std::size_t>(len);
        for (std::size_t i = 0; i < len; ++i) {
            list.ids[i] = detail::read_u64(in, "entry id");
            detail::read_bytes(in, list.codes.bytes.data() + i * rb, rb, "entry code");
            if (!index.id_set.insert(list.ids[i]).second) {
                throw std::runtime_error(path + ": duplicate id " + std::to_string(list.ids[i]));
            }
        }
        for (std::size_t i = 0; i < len; ++i) {
            for (std::uint32_t m = 0; m < index.codebook.m_subspaces; ++m) {
                if (list.codes.at(i, m) >= index.codebook.ks) {
                    throw std::runtime_error(path + ": code out of range");
                }
            }
        }
        index.n_items += static_cast<std::size_t>(len);
    }
    char extra;
    if (in.read(&extra, 1); in.gcount() != 0) {
        throw std::runtime_error(path + ": trailing data after payload");
    }
    return index;
}

}  // namespace pqii
