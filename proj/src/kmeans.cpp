#include "pqii/kmeans.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pqii {

double squared_l2(const float* a, const float* b, std::size_t d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = double(a[i]) - double(b[i]);
        acc += diff * diff;
    }
    return acc;
}

NearestCentroid nearest_in_table(const float* point, const float* table,
                                 std::size_t k, std::size_t d) {
    NearestCentroid best{0, squared_l2(point, table, d)};
    for (std::size_t c = 1; c < k; ++c) {
        const double dist = squared_l2(point, table + c * d, d);
        if (dist < best.sq_dist) {  // strict: ties keep the lowest index
            best.index = c;
            best.sq_dist = dist;
        }
    }
    return best;
}

NearestCentroid nearest_centroid(std::span<const float> point, const VectorMatrix& centroids) {
    if (centroids.rows == 0) throw std::invalid_argument("nearest_centroid: empty centroid set");
    if (point.size() != centroids.dims) {
        throw std::invalid_argument("nearest_centroid: dimension mismatch");
    }
    return nearest_in_table(point.data(), centroids.values.data(), centroids.rows,
                            centroids.dims);
}

namespace {

// One full assignment pass; returns the summed squared distances and fills
// per-point assignments and distances.
double assign_pass(const VectorMatrix& points, const VectorMatrix& centroids,
                   std::vector<std::uint32_t>& assignments, std::vector<double>& dists) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
        const auto nc = nearest_in_table(points.row(i), centroids.values.data(),
                                         centroids.rows, centroids.dims);
        assignments[i] = static_cast<std::uint32_t>(nc.index);
        dists[i] = nc.sq_dist;
        total += nc.sq_dist;
    }
    return total;
}

}  // namespace

KMeansResult kmeans_fit(const VectorMatrix& points, std::size_t k,
                        std::uint32_t max_iters, std::uint64_t seed, double tol) {
    const std::size_t n = points.rows;
    const std::size_t d = points.dims;
    if (k == 0) throw std::invalid_argument("kmeans_fit: k must be >= 1");
    if (k > n) {
        throw std::invalid_argument("kmeans_fit: k (" + std::to_string(k) +
                                    ") exceeds number of points (" + std::to_string(n) + ")");
    }
    if (max_iters < 1) throw std::invalid_argument("kmeans_fit: max_iters must be >= 1");
    if (tol < 0.0) throw std::invalid_argument("kmeans_fit: tol must be >= 0");

    // Initial centroids: k distinct rows, sampled without replacement.
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    KMeansResult result;
    result.centroids = VectorMatrix(k, d);
    for (std::size_t c = 0; c < k; ++c) {
        std::memcpy(result.centroids.row(c), points.row(idx[c]), d * sizeof(float));
    }

    result.assignments.resize(n);
    std::vector<double> dists(n);
    std::vector<double> sums(k * d);
    std::vector<std::size_t> counts(k);

    double prev_inertia = 0.0;
    for (std::uint32_t it = 1; it <= max_iters; ++it) {
        result.inertia = assign_pass(points, result.centroids, result.assignments, dists);
        result.inertia_per_iter.push_back(result.inertia);
        result.iterations_run = it;

        if (it > 1 && prev_inertia - result.inertia < tol * std::max(1.0, prev_inertia)) break;
        if (it == max_iters) break;
        prev_inertia = result.inertia;

        // Update step: means accumulated in double.
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), std::size_t{0});
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t c = result.assignments[i];
            const float* row = points.row(i);
            double* s = sums.data() + std::size_t(c) * d;
            for (std::size_t j = 0; j < d; ++j) s[j] += row[j];
            ++counts[c];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            float* cent = result.centroids.row(c);
            const double* s = sums.data() + c * d;
            const double inv = 1.0 / double(counts[c]);
            for (std::size_t j = 0; j < d; ++j) cent[j] = static_cast<float>(s[j] * inv);
        }
        // Empty-cluster repair: reseed to the point farthest from its
        // assigned centroid; that point's distance is zeroed so several
        // empties pick distinct points.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = 0;
            for (std::size_t i = 1; i < n; ++i) {
                if (dists[i] > dists[far]) far = i;
            }
            std::memcpy(result.centroids.row(c), points.row(far), d * sizeof(float));
            dists[far] = 0.0;
        }
    }
    return result;
}

}  // namespace pqii
