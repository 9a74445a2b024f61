#include "pqii/matrix.hpp"

#include <cstring>
#include <stdexcept>

namespace pqii {

VectorMatrix slice_rows(const VectorMatrix& m, RowRange r) {
    if (r.begin >= r.end || r.end > m.rows) {
        throw std::invalid_argument("slice_rows: range out of bounds");
    }
    VectorMatrix out(r.size(), m.dims);
    std::memcpy(out.values.data(), m.row(r.begin), r.size() * m.dims * sizeof(float));
    return out;
}

}  // namespace pqii
