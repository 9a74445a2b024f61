#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "pqii/dataset_io.hpp"
#include "pqii/ivf.hpp"
#include "test_helpers.hpp"

using namespace pqii;
using test::TempDir;

namespace {

struct Fixture {
    VectorMatrix data;
    Codebook cb;
    CodeMatrix codes;
    std::vector<std::uint64_t> ids;
};

Fixture make_fixture(std::size_t n, std::uint64_t seed, std::uint32_t m = 4,
                     std::uint32_t ks = 16) {
    Fixture f;
    f.data = gen_synthetic({.n_rows = n, .n_dims = 16, .n_clusters = 8, .spread = 0.8f,
                            .seed = seed});
    f.cb = pq_fit(f.data, m, ks, 15, seed);
    f.codes = pq_encode(f.cb, f.data);
    f.ids.resize(n);
    std::iota(f.ids.begin(), f.ids.end(), std::uint64_t{0});
    return f;
}

// Reference scan over a subset of ids, written independently of the library
// query path.
std::vector<Hit> naive_scan(const Fixture& f, std::span<const float> query, std::size_t k,
                            const std::vector<std::uint64_t>* subset = nullptr) {
    std::vector<Hit> hits;
    const VectorMatrix decoded = pq_decode(f.cb, f.codes);
    for (std::size_t i = 0; i < f.codes.rows; ++i) {
        if (subset && !std::binary_search(subset->begin(), subset->end(), f.ids[i])) continue;
        const double d = squared_l2(query.data(), decoded.row(i), query.size());
        hits.push_back({f.ids[i], d});
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.sq_dist != b.sq_dist) return a.sq_dist < b.sq_dist;
        return a.id < b.id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

}  // namespace

TEST_CASE("ivf_build: structure") {
    Fixture f = make_fixture(200, 5);

    SUBCASE("nlist=1 keeps the input order in one list") {
        const InvertedIndex index = ivf_build(f.cb, f.codes, f.ids, 1, 9);
        REQUIRE(index.nlist() == 1);
        CHECK(index.lists[0].ids == f.ids);
        CHECK(index.n_items == 200);
    }
    SUBCASE("posting membership matches direct nearest-coarse assignment") {
        const InvertedIndex index = ivf_build(f.cb, f.codes, f.ids, 8, 9);
        const VectorMatrix decoded = pq_decode(f.cb, f.codes);
        std::size_t total = 0;
        std::vector<std::size_t> expected_list(f.codes.rows);
        for (std::size_t i = 0; i < f.codes.rows; ++i) {
            expected_list[i] = nearest_centroid(decoded.row_span(i), index.coarse_centroids).index;
        }
        for (std::size_t l = 0; l < index.nlist(); ++l) {
            for (const auto id : index.lists[l].ids) {
                CHECK(expected_list[id] == l);
                ++total;
            }
        }
        CHECK(total == f.codes.rows);
    }
    SUBCASE("two separated clusters split exactly with nlist=2") {
        VectorMatrix data(40, 4);
        for (std::size_t i = 0; i < 40; ++i) {
            const float base = i < 20 ? 0.0f : 100.0f;
            for (std::size_t d = 0; d < 4; ++d) data.row(i)[d] = base + float(i % 20) * 0.01f;
        }
        const Codebook cb = pq_fit(data, 2, 8, 15, 1);
        const CodeMatrix codes = pq_encode(cb, data);
        std::vector<std::uint64_t> ids(40);
        std::iota(ids.begin(), ids.end(), std::uint64_t{0});
        const InvertedIndex index = ivf_build(cb, codes, ids, 2, 3);
        for (std::size_t l = 0; l < 2; ++l) {
            REQUIRE(index.lists[l].ids.size() == 20);
            const bool low = index.lists[l].ids.front() < 20;
            for (const auto id : index.lists[l].ids) CHECK((id < 20) == low);
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_WITH_AS(ivf_build(f.cb, f.codes, std::vector<std::uint64_t>{}, 1, 0),
                             doctest::Contains("no items"), std::invalid_argument);
        CHECK_THROWS_AS(ivf_build(f.cb, f.codes, f.ids, 0, 0), std::invalid_argument);
        CHECK_THROWS_AS(ivf_build(f.cb, f.codes, f.ids, 201, 0), std::invalid_argument);
        std::vector<std::uint64_t> dup = f.ids;
        dup[3] = dup[4];
        CHECK_THROWS_WITH_AS(ivf_build(f.cb, f.codes, dup, 4, 0), doctest::Contains("duplicate id"),
                             std::invalid_argument);
    }
}

TEST_CASE("ivf_add") {
    Fixture f = make_fixture(300, 13);
    CodeMatrix codes_a(0, f.cb.m_subspaces, f.cb.ks);
    CodeMatrix codes_b(0, f.cb.m_subspaces, f.cb.ks);
    for (std::size_t i = 0; i < 200; ++i) codes_a.append_row_from(f.codes, i);
    for (std::size_t i = 200; i < 300; ++i) codes_b.append_row_from(f.codes, i);
    const std::vector<std::uint64_t> ids_a(f.ids.begin(), f.ids.begin() + 200);
    const std::vector<std::uint64_t> ids_b(f.ids.begin() + 200, f.ids.end());

    InvertedIndex index = ivf_build(f.cb, codes_a, ids_a, 6, 21);

    SUBCASE("adding nothing changes nothing") {
        const std::size_t before = index.n_items;
        ivf_add(index, CodeMatrix(0, f.cb.m_subspaces, f.cb.ks), {});
        CHECK(index.n_items == before);
    }
    SUBCASE("build(A) + add(B) equals a shared-centroid build over A and B") {
        ivf_add(index, codes_b, ids_b);
        CHECK(index.n_items == 300);
        const InvertedIndex whole =
            ivf_build_with_centroids(f.cb, f.codes, f.ids, index.coarse_centroids);
        REQUIRE(whole.nlist() == index.nlist());
        for (std::size_t l = 0; l < whole.nlist(); ++l) {
            CHECK(index.lists[l].ids == whole.lists[l].ids);
            CHECK(index.lists[l].codes == whole.lists[l].codes);
        }
    }
    SUBCASE("id collision names the id") {
        CodeMatrix one(0, f.cb.m_subspaces, f.cb.ks);
        one.append_row_from(f.codes, 0);
        CHECK_THROWS_WITH_AS(ivf_add(index, one, std::vector<std::uint64_t>{17}),
                             doctest::Contains("id 17"), std::invalid_argument);
    }
}

TEST_CASE("ivf_merge") {
    Fixture f = make_fixture(240, 29);
    const InvertedIndex whole = ivf_build(f.cb, f.codes, f.ids, 8, 31);

    CodeMatrix codes_a(0, f.cb.m_subspaces, f.cb.ks);
    CodeMatrix codes_b(0, f.cb.m_subspaces, f.cb.ks);
    for (std::size_t i = 0; i < 120; ++i) codes_a.append_row_from(f.codes, i);
    for (std::size_t i = 120; i < 240; ++i) codes_b.append_row_from(f.codes, i);
    const std::vector<std::uint64_t> ids_a(f.ids.begin(), f.ids.begin() + 120);
    const std::vector<std::uint64_t> ids_b(f.ids.begin() + 120, f.ids.end());

    const InvertedIndex a =
        ivf_build_with_centroids(f.cb, codes_a, ids_a, whole.coarse_centroids);
    const InvertedIndex b =
        ivf_build_with_centroids(f.cb, codes_b, ids_b, whole.coarse_centroids);
    const InvertedIndex merged = ivf_merge(a, b);

    SUBCASE("lists concatenate a-then-b and totals add up") {
        CHECK(merged.n_items == 240);
        for (std::size_t l = 0; l < merged.nlist(); ++l) {
            std::vector<std::uint64_t> expected = a.lists[l].ids;
            expected.insert(expected.end(), b.lists[l].ids.begin(), b.lists[l].ids.end());
            CHECK(merged.lists[l].ids == expected);
        }
    }
    SUBCASE("merge equals the monolithic shared-centroid build") {
        const InvertedIndex mono =
            ivf_build_with_centroids(f.cb, f.codes, f.ids, whole.coarse_centroids);
        for (std::size_t l = 0; l < merged.nlist(); ++l) {
            CHECK(merged.lists[l].ids == mono.lists[l].ids);
            CHECK(merged.lists[l].codes == mono.lists[l].codes);
        }
        // and answers queries identically
        const VectorMatrix queries = test::random_matrix(10, 16, 1, -2, 12);
        for (std::size_t q = 0; q < queries.rows; ++q) {
            const QueryResult via_merge =
                ivf_query(merged, queries.row_span(q), 5, merged.nlist());
            const QueryResult via_mono = ivf_query(mono, queries.row_span(q), 5, mono.nlist());
            CHECK(via_merge.hits == via_mono.hits);
        }
    }
    SUBCASE("merging with an empty-but-compatible index is the identity") {
        // an index holding a single item, then a merge of disjoint halves,
        // exercises the multiset equality; a fully empty index cannot be
        // built, so identity is checked via list concatenation with b empty
        InvertedIndex b_empty = a;
        for (auto& list : b_empty.lists) {
            list.ids.clear();
            list.codes = CodeMatrix(0, f.cb.m_subspaces, f.cb.ks);
        }
        b_empty.n_items = 0;
        b_empty.id_set.clear();
        const InvertedIndex same = ivf_merge(a, b_empty);
        for (std::size_t l = 0; l < same.nlist(); ++l) {
            CHECK(same.lists[l].ids == a.lists[l].ids);
        }
        CHECK(same.n_items == a.n_items);
    }
    SUBCASE("mismatched operands are rejected") {
        CHECK_THROWS_WITH_AS(ivf_merge(a, whole), doctest::Contains("id collision"),
                             std::invalid_argument);

        InvertedIndex other_coarse = b;
        other_coarse.coarse_centroids.values[0] += 1.0f;
        CHECK_THROWS_WITH_AS(ivf_merge(a, other_coarse), doctest::Contains("coarse centroid"),
                             std::invalid_argument);

        InvertedIndex other_cb = b;
        other_cb.codebook.tables[0] += 1.0f;
        CHECK_THROWS_WITH_AS(ivf_merge(a, other_cb), doctest::Contains("codebook mismatch"),
                             std::invalid_argument);
    }
}

TEST_CASE("ivf_query") {
    Fixture f = make_fixture(400, 37);
    const InvertedIndex index = ivf_build(f.cb, f.codes, f.ids, 16, 41);

    SUBCASE("a decoded item queried at full probe comes back first at distance zero") {
        // pick an item whose code row is unique so the zero hit is unambiguous
        std::size_t target = f.codes.rows;
        for (std::size_t i = 0; i < f.codes.rows && target == f.codes.rows; ++i) {
            bool unique = true;
            for (std::size_t j = 0; j < f.codes.rows && unique; ++j) {
                if (j == i) continue;
                bool same = true;
                for (std::uint32_t m = 0; m < f.cb.m_subspaces; ++m) {
                    same = same && f.codes.at(i, m) == f.codes.at(j, m);
                }
                unique = !same;
            }
            if (unique) target = i;
        }
        REQUIRE(target < f.codes.rows);
        const VectorMatrix decoded = pq_decode(f.cb, f.codes);
        const QueryResult r = ivf_query(index, decoded.row_span(target), 3, index.nlist());
        REQUIRE(!r.hits.empty());
        CHECK(r.hits[0].id == target);
        CHECK(r.hits[0].sq_dist == 0.0);
    }
    SUBCASE("nprobe = nlist is bit-identical to a flat scan") {
        const VectorMatrix queries = test::random_matrix(25, 16, 2, -2, 12);
        for (std::size_t q = 0; q < queries.rows; ++q) {
            const QueryResult approx = ivf_query(index, queries.row_span(q), 10, index.nlist());
            const QueryResult exact = flat_scan(f.cb, f.codes, f.ids, queries.row_span(q), 10);
            CHECK(approx.hits == exact.hits);
        }
    }
    SUBCASE("k beyond n_items saturates") {
        const VectorMatrix q = test::random_matrix(1, 16, 3);
        const QueryResult r = ivf_query(index, q.row_span(0), 1000, index.nlist());
        CHECK(r.hits.size() == 400);
        CHECK(r.k_requested == 1000);
    }
    SUBCASE("nprobe validation") {
        const VectorMatrix q = test::random_matrix(1, 16, 3);
        CHECK_THROWS_WITH_AS(ivf_query(index, q.row_span(0), 5, 0), doctest::Contains("nprobe"),
                             std::invalid_argument);
        CHECK_THROWS_WITH_AS(ivf_query(index, q.row_span(0), 5, 17), doctest::Contains("nprobe"),
                             std::invalid_argument);
        CHECK_THROWS_AS(ivf_query(index, q.row_span(0), 0, 4), std::invalid_argument);
    }
    SUBCASE("recall versus the exact scan never drops as nprobe grows") {
        const VectorMatrix queries = test::random_matrix(20, 16, 4, -2, 12);
        double prev_recall = -1.0;
        for (const std::size_t nprobe : {1, 2, 4, 8, 16}) {
            double recall = 0.0;
            for (std::size_t q = 0; q < queries.rows; ++q) {
                const QueryResult approx = ivf_query(index, queries.row_span(q), 10, nprobe);
                const QueryResult exact = flat_scan(f.cb, f.codes, f.ids, queries.row_span(q), 10);
                std::size_t overlap = 0;
                for (const auto& hit : approx.hits) {
                    for (const auto& gt : exact.hits) overlap += hit.id == gt.id;
                }
                recall += double(overlap) / double(exact.hits.size());
            }
            recall /= double(queries.rows);
            CHECK(recall >= prev_recall);
            prev_recall = recall;
        }
        CHECK(prev_recall == 1.0);  // full probe is exact
    }
}

TEST_CASE("ivf_query_subset") {
    Fixture f = make_fixture(300, 43);
    const InvertedIndex index = ivf_build(f.cb, f.codes, f.ids, 12, 47);
    const VectorMatrix queries = test::random_matrix(15, 16, 5, -2, 12);

    SUBCASE("subset of all ids equals the unrestricted query") {
        for (std::size_t q = 0; q < queries.rows; ++q) {
            const QueryResult all = ivf_query(index, queries.row_span(q), 7, index.nlist());
            const QueryResult sub =
                ivf_query_subset(index, queries.row_span(q), 7, f.ids, index.nlist());
            CHECK(all.hits == sub.hits);
        }
    }
    SUBCASE("singleton subset returns that id at full probe") {
        const std::vector<std::uint64_t> just{42};
        const QueryResult r =
            ivf_query_subset(index, queries.row_span(0), 5, just, index.nlist());
        REQUIRE(r.hits.size() == 1);
        CHECK(r.hits[0].id == 42);
    }
    SUBCASE("random subsets match the filtered scan oracle") {
        std::mt19937_64 rng(301);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<std::uint64_t> subset;
            for (const auto id : f.ids) {
                if (rng() % 3 == 0) subset.push_back(id);
            }
            if (subset.empty()) subset.push_back(5);
            const auto query = queries.row_span(trial % queries.rows);
            const QueryResult got =
                ivf_query_subset(index, query, 10, subset, index.nlist());
            const std::vector<Hit> expected = naive_scan(f, query, 10, &subset);
            REQUIRE(got.hits.size() == expected.size());
            for (std::size_t i = 0; i < expected.size(); ++i) {
                CHECK(got.hits[i].id == expected[i].id);
                // ADC sums rounded table entries; allow the documented slack
                CHECK(got.hits[i].sq_dist ==
                      doctest::Approx(expected[i].sq_dist).epsilon(1e-5));
            }
        }
    }
    SUBCASE("unsorted subsets are rejected") {
        const std::vector<std::uint64_t> bad{5, 3, 9};
        CHECK_THROWS_WITH_AS(ivf_query_subset(index, queries.row_span(0), 3, bad, 4),
                             doctest::Contains("sorted"), std::invalid_argument);
    }
}

TEST_CASE("flat_scan basics") {
    Fixture f = make_fixture(50, 59);

    SUBCASE("single item") {
        CodeMatrix one(0, f.cb.m_subspaces, f.cb.ks);
        one.append_row_from(f.codes, 7);
        const std::vector<std::uint64_t> id{99};
        const VectorMatrix q = test::random_matrix(1, 16, 2);
        const QueryResult r = flat_scan(f.cb, one, id, q.row_span(0), 4);
        REQUIRE(r.hits.size() == 1);
        CHECK(r.hits[0].id == 99);
    }
    SUBCASE("k = 0 is an error") {
        const VectorMatrix q = test::random_matrix(1, 16, 2);
        CHECK_THROWS_AS(flat_scan(f.cb, f.codes, f.ids, q.row_span(0), 0),
                        std::invalid_argument);
    }
}

TEST_CASE("index serialization round-trips bit-exactly") {
    TempDir tmp;

    SUBCASE("byte codes (Ks <= 256)") {
        Fixture f = make_fixture(150, 61);
        const InvertedIndex index = ivf_build(f.cb, f.codes, f.ids, 10, 67);
        const std::string p1 = tmp.path("a.pqii");
        const std::string p2 = tmp.path("b.pqii");
        save_index(index, p1);
        const InvertedIndex loaded = load_index(p1);
        save_index(loaded, p2);
        CHECK(test::read_file(p1) == test::read_file(p2));
        CHECK(loaded.n_items == index.n_items);
        CHECK(loaded.codebook == index.codebook);
        CHECK(loaded.coarse_centroids == index.coarse_centroids);

        const VectorMatrix q = test::random_matrix(1, 16, 9);
        CHECK(ivf_query(loaded, q.row_span(0), 5, 10).hits ==
              ivf_query(index, q.row_span(0), 5, 10).hits);
    }
    SUBCASE("wide codes (Ks > 256)") {
        const VectorMatrix data = test::random_matrix(600, 8, 71, -10, 10);
        const Codebook cb = pq_fit(data, 2, 300, 8, 3);
        const CodeMatrix codes = pq_encode(cb, data);
        REQUIRE(codes.code_width() == 2);
        std::vector<std::uint64_t> ids(600);
        std::iota(ids.begin(), ids.end(), std::uint64_t{0});
        const InvertedIndex index = ivf_build(cb, codes, ids, 5, 7);
        const std::string path = tmp.path("wide.pqii");
        save_index(index, path);
        const InvertedIndex loaded = load_index(path);
        CHECK(loaded.codebook == index.codebook);
        for (std::size_t l = 0; l < index.nlist(); ++l) {
            CHECK(loaded.lists[l].ids == index.lists[l].ids);
            CHECK(loaded.lists[l].codes == index.lists[l].codes);
        }
    }
    SUBCASE("bad magic") {
        Fixture f = make_fixture(60, 73);
        const InvertedIndex index = ivf_build(f.cb, f.codes, f.ids, 4, 3);
        const std::string path = tmp.path("x.pqii");
        save_index(index, path);
        std::string bytes = test::read_file(path);
        bytes[0] = 'Z';
        std::ofstream out(tmp.path("bad.pqii"), std::ios::binary);
        out.write(bytes.data(), std::streamsize(bytes.size()));
        out.close();
        CHECK_THROWS_WITH_AS(load_index(tmp.path("bad.pqii")), doctest::Contains("bad magic"),
                             std::runtime_error);
    }
}

TEST_CASE("default_nlist") {
    CHECK(default_nlist(1) == 1);
    CHECK(default_nlist(100) == 10);
    CHECK(default_nlist(2) == 1);   // round(sqrt(2)) = 1
    CHECK(default_nlist(500000) == 707);
}
