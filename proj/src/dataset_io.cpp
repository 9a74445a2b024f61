#include "pqii/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <string_view>

#include "io_util.hpp"

namespace pqii {

namespace {

constexpr char kMatrixMagic[4] = {'P', 'Q', 'I', 'M'};
constexpr std::uint32_t kMatrixVersion = 1;

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    return out;
}

void check_row_finite(const float* row, std::size_t d, const std::string& path,
                      std::size_t record) {
    for (std::size_t j = 0; j < d; ++j) {
        if (!std::isfinite(row[j])) {
            throw std::runtime_error(path + ": non-finite value in record " +
                                     std::to_string(record));
        }
    }
}

bool has_extension(const std::string& path, std::string_view ext) {
    if (path.size() < ext.size()) return false;
    return std::equal(ext.rbegin(), ext.rend(), path.rbegin(),
                      [](char a, char b) { return std::tolower(b) == a; });
}

}  // namespace

VectorMatrix load_fvecs(const std::string& path) {
    std::ifstream in = open_input(path);

    VectorMatrix out;
    std::size_t record = 0;
    for (;;) {
        char dim_buf[4];
        in.read(dim_buf, 4);
        const auto got = in.gcount();
        if (got == 0) break;  // clean end of file at a record boundary
        if (got != 4) throw std::runtime_error(path + ": truncated file");

        std::int32_t dim;
        std::memcpy(&dim, dim_buf, 4);
        if (dim < 1) {
            throw std::runtime_error(path + ": invalid dimension " + std::to_string(dim) +
                                     " in record " + std::to_string(record));
        }
        if (record == 0) {
            out.dims = static_cast<std::size_t>(dim);
        } else if (static_cast<std::size_t>(dim) != out.dims) {
            throw std::runtime_error(path + ": dimension mismatch: record " +
                                     std::to_string(record) + " has dim " + std::to_string(dim) +
                                     ", expected " + std::to_string(out.dims));
        }

        const std::size_t old = out.values.size();
        out.values.resize(old + out.dims);
        in.read(reinterpret_cast<char*>(out.values.data() + old),
                static_cast<std::streamsize>(out.dims * sizeof(float)));
        if (static_cast<std::size_t>(in.gcount()) != out.dims * sizeof(float)) {
            throw std::runtime_error(path + ": truncated file");
        }
        check_row_finite(out.values.data() + old, out.dims, path, record);
        ++record;
    }
    if (record == 0) throw std::runtime_error(path + ": no records");
    out.rows = record;
    return out;
}

void save_fvecs(const VectorMatrix& m, const std::string& path) {
    if (m.dims > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
        throw std::invalid_argument("save_fvecs: dimension too large for the format");
    }
    std::ofstream out = open_output(path);
    for (std::size_t i = 0; i < m.rows; ++i) {
        detail::write_i32(out, static_cast<std::int32_t>(m.dims));
        out.write(reinterpret_cast<const char*>(m.row(i)),
                  static_cast<std::streamsize>(m.dims * sizeof(float)));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

// RFC 4180 style records: quoted fields may contain commas, newlines, and
// doubled quotes. Tolerates CRLF and a UTF-8 BOM.
std::vector<std::vector<std::string>> parse_csv_records(const std::string& path) {
    std::ifstream in = open_input(path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (content.size() >= 3 && content[0] == '\xef' && content[1] == '\xbb' &&
        content[2] == '\xbf') {
        content.erase(0, 3);
    }

    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                field_started = true;  // next field exists even if empty
                break;
            case '\r':
                break;
            case '\n':
                end_record();
                break;
            default:
                field += c;
                field_started = true;
                break;
        }
    }
    if (in_quotes) throw std::runtime_error(path + ": unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();
    return records;
}

std::optional<float> parse_float_cell(std::string_view cell) {
    // trim ASCII whitespace
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
    if (cell.empty()) return std::nullopt;
    float value = 0.0f;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

}  // namespace

VectorMatrix load_csv(const std::string& path,
                      const std::optional<std::vector<std::string>>& columns) {
    const auto records = parse_csv_records(path);
    if (records.empty()) throw std::runtime_error(path + ": no header row");
    const auto& header = records.front();
    const std::size_t n_data = records.size() - 1;
    if (n_data == 0) throw std::runtime_error(path + ": no data rows");

    std::vector<std::size_t> selected;
    if (columns) {
        for (const auto& name : *columns) {
            auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) {
                throw std::runtime_error(path + ": missing column '" + name + "'");
            }
            selected.push_back(static_cast<std::size_t>(it - header.begin()));
        }
        if (selected.empty()) throw std::runtime_error(path + ": empty column selection");
    } else {
        // keep every column whose cells all parse as finite numbers
        for (std::size_t c = 0; c < header.size(); ++c) {
            bool numeric = true;
            for (std::size_t r = 1; r < records.size() && numeric; ++r) {
                if (c >= records[r].size() || !parse_float_cell(records[r][c])) numeric = false;
            }
            if (numeric) selected.push_back(c);
        }
        if (selected.empty()) {
            throw std::runtime_error(path + ": no numeric columns to select");
        }
    }

    VectorMatrix out(n_data, selected.size());
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        for (std::size_t j = 0; j < selected.size(); ++j) {
            const std::size_t c = selected[j];
            if (c >= rec.size()) {
                throw std::runtime_error(path + ": row " + std::to_string(r) + ", column '" +
                                         header[c] + "': missing cell");
            }
            const auto parsed = parse_float_cell(rec[c]);
            if (!parsed) {
                throw std::runtime_error(path + ": row " + std::to_string(r) + ", column '" +
                                         header[c] + "': cannot parse '" + rec[c] + "'");
            }
            out.row(r - 1)[j] = *parsed;
        }
    }
    return out;
}

void save_native(const VectorMatrix& m, const std::string& path) {
    std::ofstream out = open_output(path);
    detail::write_bytes(out, kMatrixMagic, 4);
    detail::write_u32(out, kMatrixVersion);
    detail::write_u64(out, m.rows);
    detail::write_u32(out, static_cast<std::uint32_t>(m.dims));
    out.write(reinterpret_cast<const char*>(m.values.data()),
              static_cast<std::streamsize>(m.values.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

VectorMatrix load_native(const std::string& path) {
    std::ifstream in = open_input(path);
    detail::expect_magic(in, kMatrixMagic, "matrix file");
    const std::uint32_t version = detail::read_u32(in, "version");
    if (version != kMatrixVersion) {
        throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
    }
    const std::uint64_t n = detail::read_u64(in, "row count");
    const std::uint32_t d = detail::read_u32(in, "dimension");
    if (n == 0 || d == 0) throw std::runtime_error(path + ": empty matrix");

    VectorMatrix out(static_cast<std::size_t>(n), d);
    in.read(reinterpret_cast<char*>(out.values.data()),
            static_cast<std::streamsize>(out.values.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != out.values.size() * sizeof(float)) {
        throw std::runtime_error(path + ": truncated payload");
    }
    char extra;
    if (in.read(&extra, 1); in.gcount() != 0) {
        throw std::runtime_error(path + ": trailing data after payload");
    }
    for (std::size_t i = 0; i < out.rows; ++i) check_row_finite(out.row(i), out.dims, path, i);
    return out;
}

VectorMatrix load_matrix(const std::string& path) {
    if (has_extension(path, ".fvecs")) return load_fvecs(path);
    if (has_extension(path, ".csv")) return load_csv(path);
    return load_native(path);
}

void save_matrix(const VectorMatrix& m, const std::string& path) {
    if (has_extension(path, ".csv")) {
        throw std::invalid_argument("save_matrix: csv output is not supported");
    }
    if (has_extension(path, ".fvecs")) {
        save_fvecs(m, path);
    } else {
        save_native(m, path);
    }
}

VectorMatrix gen_synthetic(const SyntheticSpec& spec) {
    if (spec.n_rows == 0) throw std::invalid_argument("gen_synthetic: n_rows must be >= 1");
    if (spec.n_dims == 0) throw std::invalid_argument("gen_synthetic: n_dims must be >= 1");
    if (spec.n_clusters == 0) throw std::invalid_argument("gen_synthetic: n_clusters must be >= 1");
    if (!(spec.spread > 0.0f)) throw std::invalid_argument("gen_synthetic: spread must be > 0");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<double> means(spec.n_clusters * spec.n_dims);
    for (auto& v : means) v = 10.0 * unit(rng);

    std::uniform_int_distribution<std::size_t> pick(0, spec.n_clusters - 1);
    std::normal_distribution<double> gauss(0.0, 1.0);

    VectorMatrix out(spec.n_rows, spec.n_dims);
    for (std::size_t i = 0; i < spec.n_rows; ++i) {
        const std::size_t c = pick(rng);
        const double* mean = means.data() + c * spec.n_dims;
        float* row = out.row(i);
        for (std::size_t d = 0; d < spec.n_dims; ++d) {
            row[d] = static_cast<float>(mean[d] + double(spec.spread) * gauss(rng));
        }
    }
    return out;
}

std::vector<RowRange> chunk_rows(std::size_t n_rows, std::size_t n_chunks) {
    if (n_chunks == 0) throw std::invalid_argument("chunk_rows: n_chunks must be >= 1");
    if (n_chunks > n_rows) {
        throw std::invalid_argument("chunk_rows: n_chunks (" + std::to_string(n_chunks) +
                                    ") exceeds n_rows (" + std::to_string(n_rows) + ")");
    }
    const std::size_t base = n_rows / n_chunks;
    const std::size_t extra = n_rows % n_chunks;
    std::vector<RowRange> ranges;
    ranges.reserve(n_chunks);
    std::size_t start = 0;
    for (std::size_t i = 0; i < n_chunks; ++i) {
        const std::size_t len = base + (i < extra ? 1 : 0);
        ranges.push_back({start, start + len});
        start += len;
    }
    return ranges;
}

}  // namespace pqii
