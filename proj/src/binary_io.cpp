#include "tlnet/binary_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace tlnet {

namespace {

template <typename T>
void to_little(T& value) {
    if constexpr (std::endian::native == std::endian::big) {
        auto* bytes = reinterpret_cast<unsigned char*>(&value);
        std::reverse(bytes, bytes + sizeof(T));
    }
}

template <typename T>
void put(std::ostream& os, T value) {
    to_little(value);
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

} // namespace

void BinaryWriter::magic(std::string_view tag) {
    std::array<char, 8> buf{};
    std::copy_n(tag.begin(), std::min<std::size_t>(tag.size(), 8), buf.begin());
    os_.write(buf.data(), 8);
}

void BinaryWriter::u32(std::uint32_t value) { put(os_, value); }
void BinaryWriter::u64(std::uint64_t value) { put(os_, value); }
void BinaryWriter::f64(double value) { put(os_, value); }

void BinaryWriter::vector(const Vec& v) {
    for (Index i = 0; i < v.size(); ++i) f64(v[i]);
}

void BinaryWriter::matrix(const Mat& m) {
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) f64(m(i, j));
}

void BinaryWriter::string(const std::string& s) {
    u64(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryReader::read_raw(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (!is_) throw FormatError("binary read: unexpected end of file");
}

void BinaryReader::expect_magic(std::string_view tag) {
    std::array<char, 8> buf{};
    read_raw(buf.data(), 8);
    std::array<char, 8> want{};
    std::copy_n(tag.begin(), std::min<std::size_t>(tag.size(), 8), want.begin());
    if (buf != want) throw FormatError("binary read: bad magic, expected " + std::string(tag));
}

std::uint32_t BinaryReader::u32() {
    std::uint32_t v;
    read_raw(reinterpret_cast<char*>(&v), sizeof v);
    to_little(v);
    return v;
}

std::uint64_t BinaryReader::u64() {
    std::uint64_t v;
    read_raw(reinterpret_cast<char*>(&v), sizeof v);
    to_little(v);
    return v;
}

double BinaryReader::f64() {
    double v;
    read_raw(reinterpret_cast<char*>(&v), sizeof v);
    to_little(v);
    return v;
}

Vec BinaryReader::vector(Index n) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v[i] = f64();
    return v;
}

Mat BinaryReader::matrix(Index rows, Index cols) {
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = f64();
    return m;
}

std::string BinaryReader::string() {
    const auto n = u64();
    if (n > (1ULL << 32)) throw FormatError("binary read: implausible string length");
    std::string s(n, '\0');
    read_raw(s.data(), n);
    return s;
}

void write_mlp(BinaryWriter& out, const MlpParamsd& params) {
    params.validate();
    out.magic(kMlpMagic);
    out.u32(kFormatVersion);
    out.u32(static_cast<std::uint32_t>(params.activation));
    out.u32(static_cast<std::uint32_t>(params.layers.size()));
    out.u32(params.modified() ? 1 : 0);
    for (const auto& l : params.layers) {
        out.u32(static_cast<std::uint32_t>(l.out_dim()));
        out.u32(static_cast<std::uint32_t>(l.in_dim()));
    }
    if (params.modified()) {
        for (const auto* e : {&params.encoder_u, &params.encoder_v}) {
            out.u32(static_cast<std::uint32_t>(e->out_dim()));
            out.u32(static_cast<std::uint32_t>(e->in_dim()));
        }
    }
    for (const auto& l : params.layers) {
        out.matrix(l.weight);
        out.vector(l.bias);
    }
    if (params.modified()) {
        for (const auto* e : {&params.encoder_u, &params.encoder_v}) {
            out.matrix(e->weight);
            out.vector(e->bias);
        }
    }
}

MlpParamsd read_mlp(BinaryReader& in) {
    in.expect_magic(kMlpMagic);
    if (in.u32() != kFormatVersion) throw FormatError("mlp checkpoint: unsupported version");
    MlpParamsd p;
    const auto act = in.u32();
    if (act > 1) throw FormatError("mlp checkpoint: unknown activation tag");
    p.activation = static_cast<Activation>(act);
    const auto n_layers = in.u32();
    const auto modified = in.u32();
    if (n_layers == 0 || n_layers > 1024 || modified > 1)
        throw FormatError("mlp checkpoint: corrupt header");
    std::vector<std::pair<Index, Index>> dims(n_layers);
    for (auto& [o, i] : dims) {
        o = in.u32();
        i = in.u32();
    }
    std::array<std::pair<Index, Index>, 2> enc_dims{};
    if (modified)
        for (auto& [o, i] : enc_dims) {
            o = in.u32();
            i = in.u32();
        }
    for (const auto& [o, i] : dims) {
        DenseLayer<double> l;
        l.weight = in.matrix(o, i);
        l.bias = in.vector(o);
        p.layers.push_back(std::move(l));
    }
    if (modified) {
        DenseLayer<double>* enc[2] = {&p.encoder_u, &p.encoder_v};
        for (int e = 0; e < 2; ++e) {
            enc[e]->weight = in.matrix(enc_dims[e].first, enc_dims[e].second);
            enc[e]->bias = in.vector(enc_dims[e].first);
        }
    }
    try {
        p.validate();
    } catch (const ShapeError& e) {
        throw FormatError(std::string("mlp checkpoint: ") + e.what());
    }
    return p;
}

void save_mlp(const std::string& path, const MlpParamsd& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    BinaryWriter w(os);
    write_mlp(w, params);
}

MlpParamsd load_mlp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    BinaryReader r(is);
    return read_mlp(r);
}

void write_container(std::ostream& os, std::string_view magic, const nlohmann::json& header) {
    BinaryWriter w(os);
    w.magic(magic);
    w.u32(kFormatVersion);
    w.string(header.dump());
}

nlohmann::json read_container_header(std::istream& is, std::string_view magic) {
    BinaryReader r(is);
    r.expect_magic(magic);
    if (r.u32() != kFormatVersion) throw FormatError("unsupported container version");
    try {
        return nlohmann::json::parse(r.string());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("container header: ") + e.what());
    }
}

} // namespace tlnet
