#include "genemut/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "genemut/errors.hpp"

namespace genemut {

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             a.shape_str() + " vs " + b.shape_str());
    }
}

namespace {

std::uint64_t to_le_bits(double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    return bits;
}

double from_le_bits(std::uint64_t bits) {
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    return std::bit_cast<double>(bits);
}

}  // namespace

void Tensor::save(std::ostream& os) const {
    const std::size_t r = rank() == 2 ? shape[0] : 1;
    const std::size_t c = rank() == 2 ? shape[1] : numel();
    os << "TENSOR " << r << " " << c << "\n";
    for (double v : data) {
        const std::uint64_t bits = to_le_bits(v);
        os.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
    if (!os) throw IngestionError("tensor write failed");
}

Tensor Tensor::load(std::istream& is) {
    std::string magic;
    std::size_t r = 0, c = 0;
    is >> magic >> r >> c;
    if (!is || magic != "TENSOR") {
        throw IngestionError("tensor parse error: expected 'TENSOR r c' header");
    }
    is.get();  // newline after header
    Tensor t(r, c);
    for (double& v : t.data) {
        std::uint64_t bits = 0;
        is.read(reinterpret_cast<char*>(&bits), sizeof(bits));
        if (!is) {
            throw IngestionError("tensor parse error: truncated payload, expected " +
                                 std::to_string(r * c) + " values");
        }
        v = from_le_bits(bits);
    }
    return t;
}

void Tensor::save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IngestionError("cannot open for write: " + path);
    save(os);
}

Tensor Tensor::load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IngestionError("cannot open for read: " + path);
    return load(is);
}

}  // namespace genemut
