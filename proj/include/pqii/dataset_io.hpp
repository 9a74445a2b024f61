#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pqii/matrix.hpp"

namespace pqii {

// Parameters for the synthetic Gaussian-mixture generator. Component means
// are drawn uniformly in [0, 10]^D, each component has standard deviation
// `spread`, and components are picked with equal weight per row.
struct SyntheticSpec {
    std::size_t n_rows = 0;
    std::size_t n_dims = 0;
    std::size_t n_clusters = 1;
    float spread = 1.0f;
    std::uint64_t seed = 0;
};

// fvecs: repeated records of [dim: int32 LE][dim x float32 LE].
VectorMatrix load_fvecs(const std::string& path);
void save_fvecs(const VectorMatrix& m, const std::string& path);

// CSV with a header row. `columns` selects columns by name, in selection
// order; without a selection every column whose cells all parse as finite
// real numbers is taken, in header order.
VectorMatrix load_csv(const std::string& path,
                      const std::optional<std::vector<std::string>>& columns = std::nullopt);

// Native matrix format: "PQIM", version u32=1, N u64, D u32, N*D float32 LE.
void save_native(const VectorMatrix& m, const std::string& path);
VectorMatrix load_native(const std::string& path);

// Dispatch on extension: ".fvecs" and ".csv" use those formats, anything
// else is the native format.
VectorMatrix load_matrix(const std::string& path);
void save_matrix(const VectorMatrix& m, const std::string& path);

// Deterministic for a fixed spec (generation is a pure function of it).
VectorMatrix gen_synthetic(const SyntheticSpec& spec);

// Splits [0, n_rows) into n_chunks disjoint covering ranges in ascending
// order; sizes differ by at most one, the first n_rows % n_chunks ranges
// carry the extra row.
std::vector<RowRange> chunk_rows(std::size_t n_rows, std::size_t n_chunks);

}  // namespace pqii
