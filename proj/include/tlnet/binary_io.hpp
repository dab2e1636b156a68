#ifndef TLNET_BINARY_IO_HPP
#define TLNET_BINARY_IO_HPP

// Little-endian binary primitives and the network checkpoint format.
//
// MLP checkpoint (all integers u32, all reals f64, little-endian):
//   magic "TLNETMLP" (8 bytes), version (=1), activation tag (0 tanh, 1 sine),
//   layer count L, encoder flag (0/1),
//   L x (out, in) layer dims, then if encoders: (out, in) for u and v,
//   then row-major arrays in declaration order:
//   W_1, b_1, ..., W_L, b_L, [Wu, bu, Wv, bv].

#include "tlnet/common.hpp"
#include "tlnet/mlp.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <string_view>

#include <json.hpp>

namespace tlnet {

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& os) : os_(os) {}

    void magic(std::string_view tag);
    void u32(std::uint32_t value);
    void u64(std::uint64_t value);
    void f64(double value);
    void vector(const Vec& v);
    /// Row-major dump, no dimensions.
    void matrix(const Mat& m);
    void string(const std::string& s);

private:
    std::ostream& os_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& is) : is_(is) {}

    void expect_magic(std::string_view tag);
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    Vec vector(Index n);
    Mat matrix(Index rows, Index cols);
    std::string string();

private:
    void read_raw(char* dst, std::size_t n);
    std::istream& is_;
};

inline constexpr std::string_view kMlpMagic = "TLNETMLP";
inline constexpr std::uint32_t kFormatVersion = 1;

void write_mlp(BinaryWriter& out, const MlpParamsd& params);
MlpParamsd read_mlp(BinaryReader& in);

void save_mlp(const std::string& path, const MlpParamsd& params);
MlpParamsd load_mlp(const std::string& path);

/// Container used by dataset and trajectory files: 8-byte magic, u32
/// version, length-prefixed JSON header, then the raw f64 payload whose
/// layout the header describes.
void write_container(std::ostream& os, std::string_view magic, const nlohmann::json& header);
nlohmann::json read_container_header(std::istream& is, std::string_view magic);

} // namespace tlnet

#endif // TLNET_BINARY_IO_HPP
