#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pqii {

// Dense row-major matrix of 32-bit floats. Values are stored and exchanged
// as float; accumulations (means, squared distances) are done in double.
struct VectorMatrix {
    std::size_t rows = 0;
    std::size_t dims = 0;
    std::vector<float> values;  // rows * dims, row-major

    VectorMatrix() = default;
    VectorMatrix(std::size_t n, std::size_t d, float fill = 0.0f)
        : rows(n), dims(d), values(n * d, fill) {}

    const float* row(std::size_t i) const { return values.data() + i * dims; }
    float* row(std::size_t i) { return values.data() + i * dims; }
    std::span<const float> row_span(std::size_t i) const { return {row(i), dims}; }

    bool same_shape(const VectorMatrix& o) const {
        return rows == o.rows && dims == o.dims;
    }

    friend bool operator==(const VectorMatrix&, const VectorMatrix&) = default;
};

// Half-open row interval [begin, end).
struct RowRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }

    friend bool operator==(const RowRange&, const RowRange&) = default;
};

// Copies rows [r.begin, r.end) into a new matrix.
VectorMatrix slice_rows(const VectorMatrix& m, RowRange r);

}  // namespace pqii
