#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pqii/matrix.hpp"

namespace pqii {

inline constexpr std::uint32_t kDefaultKMeansIters = 20;
inline constexpr double kDefaultKMeansTol = 1e-4;

struct KMeansResult {
    VectorMatrix centroids;                  // k x d
    std::vector<std::uint32_t> assignments;  // n, values in [0, k)
    double inertia = 0.0;                    // sum of squared distances to assigned centroid
    std::uint32_t iterations_run = 0;
    std::vector<double> inertia_per_iter;    // inertia after each assignment pass
};

double squared_l2(const float* a, const float* b, std::size_t d);

struct NearestCentroid {
    std::size_t index = 0;
    double sq_dist = 0.0;
};

// Argmin of squared L2 distance over the rows of a k x d table; ties go to
// the lowest index.
NearestCentroid nearest_in_table(const float* point, const float* table,
                                 std::size_t k, std::size_t d);
NearestCentroid nearest_centroid(std::span<const float> point, const VectorMatrix& centroids);

// Lloyd's algorithm. Initial centroids are k distinct input rows sampled
// uniformly without replacement from `seed`. Iterates assign/update until
// the inertia improvement drops below tol * max(1, previous inertia) or
// max_iters is reached. A cluster that loses all members is reseeded to the
// point farthest from its assigned centroid. Deterministic for fixed inputs.
// Single-threaded; callers parallelize across independent fits.
KMeansResult kmeans_fit(const VectorMatrix& points, std::size_t k,
                        std::uint32_t max_iters = kDefaultKMeansIters,
                        std::uint64_t seed = 0,
                        double tol = kDefaultKMeansTol);

}  // namespace pqii
