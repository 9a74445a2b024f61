#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pqii/kmeans.hpp"
#include "pqii/matrix.hpp"

namespace pqii {

// Per-subspace centroid tables of a product quantizer. Subspace m covers the
// contiguous columns [m * sub_dim, (m + 1) * sub_dim).
struct Codebook {
    std::uint32_t m_subspaces = 0;  // M
    std::uint32_t ks = 0;           // codewords per subspace
    std::uint32_t sub_dim = 0;      // D / M
    std::vector<float> tables;      // M * ks * sub_dim, [m][codeword][dim]

    std::size_t dims() const { return std::size_t(m_subspaces) * sub_dim; }

    const float* codeword(std::size_t m, std::size_t j) const {
        return tables.data() + (m * ks + j) * sub_dim;
    }
    const float* sub_table(std::size_t m) const {
        return tables.data() + m * std::size_t(ks) * sub_dim;
    }

    friend bool operator==(const Codebook&, const Codebook&) = default;
};

// Packed centroid indices, one row of M codes per encoded vector. Codes are
// stored at the minimal width holding ks - 1: one byte when ks <= 256, two
// bytes otherwise (ks <= 65536).
struct CodeMatrix {
    std::size_t rows = 0;
    std::uint32_t m_subspaces = 0;
    std::uint32_t ks = 0;
    std::vector<std::uint8_t> bytes;

    CodeMatrix() = default;
    CodeMatrix(std::size_t n, std::uint32_t m, std::uint32_t ks_);

    std::size_t code_width() const { return ks <= 256 ? 1 : 2; }
    std::size_t row_bytes() const { return m_subspaces * code_width(); }

    std::uint32_t at(std::size_t i, std::size_t m) const;
    void set(std::size_t i, std::size_t m, std::uint32_t value);

    // Appends row `src_row` of `src` (same M and ks) to this matrix.
    void append_row_from(const CodeMatrix& src, std::size_t src_row);

    friend bool operator==(const CodeMatrix&, const CodeMatrix&) = default;
};

// Squared distances between one query's subspace slices and every codeword.
struct DistanceTable {
    std::uint32_t m_subspaces = 0;
    std::uint32_t ks = 0;
    std::vector<float> entries;  // M * ks

    float entry(std::size_t m, std::size_t j) const { return entries[m * ks + j]; }
};

// Trains one k-means per contiguous column block; subspace m uses seed + m
// so the fits are independent and reproducible. D must be divisible by m.
Codebook pq_fit(const VectorMatrix& data, std::uint32_t m, std::uint32_t ks,
                std::uint32_t max_iters = kDefaultKMeansIters,
                std::uint64_t seed = 0);

CodeMatrix pq_encode(const Codebook& cb, const VectorMatrix& data);

VectorMatrix pq_decode(const Codebook& cb, const CodeMatrix& codes);
// Decodes one code row into out[0, D).
void pq_decode_row(const Codebook& cb, const CodeMatrix& codes, std::size_t i, float* out);

DistanceTable adc_table(const Codebook& cb, std::span<const float> query);

// Sum over subspaces of the table entry selected by the code row; equals the
// squared L2 distance between the query and the decoded code up to
// summation-order rounding.
double adc_lookup(const DistanceTable& table, const CodeMatrix& codes, std::size_t row);

// Per-element root-mean-square error: sqrt(sum (a-b)^2 / (N*D)).
double rmse(const VectorMatrix& a, const VectorMatrix& b);

double reconstruction_rmse(const Codebook& cb, const VectorMatrix& data);

// Codebook file: "PQCB", version u32=1, M u32, Ks u32, Ds u32, then
// M*Ks*Ds float32 LE.
void save_codebook(const Codebook& cb, const std::string& path);
Codebook load_codebook(const std::string& path);

// Code matrix file: "PQCM", version u32=1, N u64, M u32, Ks u32, then
// N*M packed codes (one byte each when Ks <= 256, else uint16 LE).
void save_codes(const CodeMatrix& codes, const std::string& path);
CodeMatrix load_codes(const std::string& path);

}  // namespace pqii
