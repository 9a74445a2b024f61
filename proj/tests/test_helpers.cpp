#include "test_helpers.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pqii::test {

namespace {
std::atomic<unsigned> counter{0};
}

TempDir::TempDir() {
    std::ostringstream name;
    name << "pqii_test_" << ::getpid() << '_' << counter.fetch_add(1);
    dir_ = std::filesystem::temp_directory_path() / name.str();
    std::filesystem::create_directories(dir_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
}

VectorMatrix random_matrix(std::size_t rows, std::size_t dims, std::uint64_t seed,
                           float lo, float hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    VectorMatrix m(rows, dims);
    for (auto& v : m.values) v = dist(rng);
    return m;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace pqii::test
