#include "pqii/pq.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "io_util.hpp"

namespace pqii {

namespace {

constexpr char kCodebookMagic[4] = {'P', 'Q', 'C', 'B'};
constexpr char kCodesMagic[4] = {'P', 'Q', 'C', 'M'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint32_t kMaxKs = 65536;

void check_codebook_params(std::uint32_t m, std::uint32_t ks, std::uint32_t sub_dim) {
    if (m == 0) throw std::invalid_argument("codebook: M must be >= 1");
    if (ks == 0 || ks > kMaxKs) {
        throw std::invalid_argument("codebook: Ks must be in [1, 65536]");
    }
    if (sub_dim == 0) throw std::invalid_argument("codebook: sub_dim must be >= 1");
}

void check_codes_match(const Codebook& cb, const CodeMatrix& codes, const char* who) {
    if (codes.m_subspaces != cb.m_subspaces || codes.ks != cb.ks) {
        throw std::invalid_argument(std::string(who) + ": codes do not match the codebook");
    }
}

}  // namespace

CodeMatrix::CodeMatrix(std::size_t n, std::uint32_t m, std::uint32_t ks_)
    : rows(n), m_subspaces(m), ks(ks_) {
    check_codebook_params(m, ks_, 1);
    bytes.assign(n * row_bytes(), 0);
}

std::uint32_t CodeMatrix::at(std::size_t i, std::size_t m) const {
    const std::size_t off = i * row_bytes() + m * code_width();
    if (code_width() == 1) return bytes[off];
    return std::uint32_t(bytes[off]) | std::uint32_t(bytes[off + 1]) << 8;
}

void CodeMatrix::set(std::size_t i, std::size_t m, std::uint32_t value) {
    const std::size_t off = i * row_bytes() + m * code_width();
    bytes[off] = static_cast<std::uint8_t>(value & 0xff);
    if (code_width() == 2) bytes[off + 1] = static_cast<std::uint8_t>(value >> 8);
}

void CodeMatrix::append_row_from(const CodeMatrix& src, std::size_t src_row) {
    if (src.m_subspaces != m_subspaces || src.ks != ks) {
        throw std::invalid_argument("CodeMatrix: shape mismatch on append");
    }
    const std::size_t rb = row_bytes();
    const std::uint8_t* from = src.bytes.data() + src_row * rb;
    bytes.insert(bytes.end(), from, from + rb);
    ++rows;
}

Codebook pq_fit(const VectorMatrix& data, std::uint32_t m, std::uint32_t ks,
                std::uint32_t max_iters, std::uint64_t seed) {
    if (m == 0) throw std::invalid_argument("pq_fit: M must be >= 1");
    if (data.dims % m != 0) {
        throw std::invalid_argument("pq_fit: D (" + std::to_string(data.dims) +
                                    ") is not divisible by M (" + std::to_string(m) + ")");
    }
    if (ks > data.rows) {
        throw std::invalid_argument("pq_fit: Ks (" + std::to_string(ks) +
                                    ") exceeds number of rows (" + std::to_string(data.rows) + ")");
    }
    const std::uint32_t ds = static_cast<std::uint32_t>(data.dims / m);
    check_codebook_params(m, ks, ds);

    Codebook cb;
    cb.m_subspaces = m;
    cb.ks = ks;
    cb.sub_dim = ds;
    cb.tables.resize(std::size_t(m) * ks * ds);

    VectorMatrix slice(data.rows, ds);
    for (std::uint32_t sub = 0; sub < m; ++sub) {
        for (std::size_t i = 0; i < data.rows; ++i) {
            std::memcpy(slice.row(i), data.row(i) + std::size_t(sub) * ds, ds * sizeof(float));
        }
        const KMeansResult km = kmeans_fit(slice, ks, max_iters, seed + sub);
        std::memcpy(cb.tables.data() + std::size_t(sub) * ks * ds,
                    km.centroids.values.data(), std::size_t(ks) * ds * sizeof(float));
    }
    return cb;
}

CodeMatrix pq_encode(const Codebook& cb, const VectorMatrix& data) {
    if (data.dims != cb.dims()) {
        throw std::invalid_argument("pq_encode: data dimension " + std::to_string(data.dims) +
                                    " does not match codebook dimension " +
                                    std::to_string(cb.dims()));
    }
    const std::size_t ds = cb.sub_dim;
    CodeMatrix codes(data.rows, cb.m_subspaces, cb.ks);
    for (std::size_t i = 0; i < data.rows; ++i) {
        const float* row = data.row(i);
        for (std::uint32_t m = 0; m < cb.m_subspaces; ++m) {
            const auto nc = nearest_in_table(row + m * ds, cb.sub_table(m), cb.ks, ds);
            codes.set(i, m, static_cast<std::uint32_t>(nc.index));
        }
    }
    return codes;
}

void pq_decode_row(const Codebook& cb, const CodeMatrix& codes, std::size_t i, float* out) {
    const std::size_t ds = cb.sub_dim;
    for (std::uint32_t m = 0; m < cb.m_subspaces; ++m) {
        const std::uint32_t code = codes.at(i, m);
        if (code >= cb.ks) {
            throw std::out_of_range("pq_decode: code " + std::to_string(code) +
                                    " out of range for Ks=" + std::to_string(cb.ks));
        }
        std::memcpy(out + m * ds, cb.codeword(m, code), ds * sizeof(float));
    }
}

VectorMatrix pq_decode(const Codebook& cb, const CodeMatrix& codes) {
    check_codes_match(cb, codes, "pq_decode");
    VectorMatrix out(codes.rows, cb.dims());
    for (std::size_t i = 0; i < codes.rows; ++i) pq_decode_row(cb, codes, i, out.row(i));
    return out;
}

DistanceTable adc_table(const Codebook& cb, std::span<const float> query) {
    if (query.size() != cb.dims()) {
        throw std::invalid_argument("adc_table: query dimension " + std::to_string(query.size()) +
                                    " does not match codebook dimension " +
                                    std::to_string(cb.dims()));
    }
    DistanceTable table;
    table.m_subspaces = cb.m_subspaces;
    table.ks = cb.ks;
    table.entries.resize(std::size_t(cb.m_subspaces) * cb.ks);
    const std::size_t ds = cb.sub_dim;
    for (std::uint32_t m = 0; m < cb.m_subspaces; ++m) {
        const float* slice = query.data() + m * ds;
        for (std::uint32_t j = 0; j < cb.ks; ++j) {
            table.entries[std::size_t(m) * cb.ks + j] =
                static_cast<float>(squared_l2(slice, cb.codeword(m, j), ds));
        }
    }
    return table;
}

double adc_lookup(const DistanceTable& table, const CodeMatrix& codes, std::size_t row) {
    if (codes.m_subspaces != table.m_subspaces || codes.ks != table.ks) {
        throw std::invalid_argument("adc_lookup: codes do not match the table");
    }
    double acc = 0.0;
    for (std::uint32_t m = 0; m < table.m_subspaces; ++m) {
        const std::uint32_t code = codes.at(row, m);
        if (code >= table.ks) {
            throw std::out_of_range("adc_lookup: code " + std::to_string(code) +
                                    " out of range for Ks=" + std::to_string(table.ks));
        }
        acc += table.entries[std::size_t(m) * table.ks + code];
    }
    return acc;
}

double rmse(const VectorMatrix& a, const VectorMatrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("rmse: shape mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double diff = double(a.values[i]) - double(b.values[i]);
        total += diff * diff;
    }
    return std::sqrt(total / double(a.rows * a.dims));
}

double reconstruction_rmse(const Codebook& cb, const VectorMatrix& data) {
    return rmse(data, pq_decode(cb, pq_encode(cb, data)));
}

void save_codebook(const Codebook& cb, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    detail::write_bytes(out, kCodebookMagic, 4);
    detail::write_u32(out, kFormatVersion);
    detail::write_u32(out, cb.m_subspaces);
    detail::write_u32(out, cb.ks);
    detail::write_u32(out, cb.sub_dim);
    out.write(reinterpret_cast<const char*>(cb.tables.data()),
              static_cast<std::streamsize>(cb.tables.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

Codebook load_codebook(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    detail::expect_magic(in, kCodebookMagic, "codebook file");
    const std::uint32_t version = detail::read_u32(in, "version");
    if (version != kFormatVersion) {
        throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
    }
    Codebook cb;
    cb.m_subspaces = detail::read_u32(in, "M");
    cb.ks = detail::read_u32(in, "Ks");
    cb.sub_dim = detail::read_u32(in, "sub_dim");
    check_codebook_params(cb.m_subspaces, cb.ks, cb.sub_dim);
    cb.tables.resize(std::size_t(cb.m_subspaces) * cb.ks * cb.sub_dim);
    in.read(reinterpret_cast<char*>(cb.tables.data()),
            static_cast<std::streamsize>(cb.tables.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != cb.tables.size() * sizeof(float)) {
        throw std::runtime_error(path + ": truncated payload");
    }
    for (float v : cb.tables) {
        if (!std::isfinite(v)) throw std::runtime_error(path + ": non-finite codeword value");
    }
    return cb;
}

void save_codes(const CodeMatrix& codes, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    detail::write_bytes(out, kCodesMagic, 4);
    detail::write_u32(out, kFormatVersion);
    detail::write_u64(out, codes.rows);
    detail::write_u32(out, codes.m_subspaces);
    detail::write_u32(out, codes.ks);
    out.write(reinterpret_cast<const char*>(codes.bytes.data()),
              static_cast<std::streamsize>(codes.bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

CodeMatrix load_codes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    detail::expect_magic(in, kCodesMagic, "code file");
    const std::uint32_t version = detail::read_u32(in, "version");
    if (version != kFormatVersion) {
        throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
    }
    const std::uint64_t n = detail::read_u64(in, "row count");
    const std::uint32_t m = detail::read_u32(in, "M");
    const std::uint32_t ks = detail::read_u32(in, "Ks");
    CodeMatrix codes(static_cast<std::size_t>(n), m, ks);
    in.read(reinterpret_cast<char*>(codes.bytes.data()),
            static_cast<std::streamsize>(codes.bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != codes.bytes.size()) {
        throw std::runtime_error(path + ": truncated payload");
    }
    for (std::size_t i = 0; i < codes.rows; ++i) {
        for (std::uint32_t sub = 0; sub < m; ++sub) {
            if (codes.at(i, sub) >= ks) {
                throw std::runtime_error(path + ": code out of range at row " + std::to_string(i));
            }
        }
    }
    return codes;
}

}  // namespace pqii
