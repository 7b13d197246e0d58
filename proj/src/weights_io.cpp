// DDSR weights container: little-endian throughout.
//   "DDSR" | u32 version | u32 unit count | f64 depth_norm
//   per unit, per layer: u32 kh, kw, in, out, activation | f64 weights[out][in][kh][kw] | f64 bias[out]

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "ddsr/errors.hpp"
#include "ddsr/srcnn.hpp"

namespace ddsr {

namespace {

constexpr char kMagic[4] = {'D', 'D', 'S', 'R'};
constexpr std::uint32_t kVersion = 1;
// Guards against absurd allocations when reading corrupt headers.
constexpr std::uint32_t kMaxDim = 4096;

class Writer {
public:
    void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    void u32(std::uint32_t v) {
        if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
        bytes(&v, 4);
    }
    void f64(double d) {
        auto v = std::bit_cast<std::uint64_t>(d);
        if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
        bytes(&v, 8);
    }
    const std::string& str() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string buf) : buf_(std::move(buf)) {}
    void bytes(void* p, std::size_t n) {
        if (buf_.size() - pos_ < n) throw FormatError("weights file truncated");
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
        return v;
    }
    double f64() {
        std::uint64_t v;
        bytes(&v, 8);
        if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
        return std::bit_cast<double>(v);
    }
    bool at_end() const { return pos_ == buf_.size(); }

private:
    std::string buf_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_weights(const NetworkWeights& net, const std::filesystem::path& path) {
    net.validate();
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(net.units.size()));
    w.f64(net.depth_norm);
    for (const auto& unit : net.units) {
        for (const auto& l : unit.layers) {
            w.u32(static_cast<std::uint32_t>(l.kernel_h));
            w.u32(static_cast<std::uint32_t>(l.kernel_w));
            w.u32(static_cast<std::uint32_t>(l.in_channels));
            w.u32(static_cast<std::uint32_t>(l.out_channels));
            w.u32(static_cast<std::uint32_t>(l.activation));
            for (double v : l.weights) w.f64(v);
            for (double v : l.bias) w.f64(v);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

NetworkWeights load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    Reader r(ss.str());

    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a DDSR weights file: " + path.string());
    const std::uint32_t version = r.u32();
    if (version != kVersion) throw FormatError(fmt::format("unsupported weights version {}", version));
    const std::uint32_t count = r.u32();
    if (count == 0 || count > 64) throw FormatError(fmt::format("implausible unit count {}", count));

    NetworkWeights net;
    net.depth_norm = r.f64();
    for (std::uint32_t u = 0; u < count; ++u) {
        UnitWeights unit;
        for (auto& l : unit.layers) {
            const std::uint32_t kh = r.u32(), kw = r.u32(), ci = r.u32(), co = r.u32(), act = r.u32();
            if (kh == 0 || kw == 0 || ci == 0 || co == 0 || kh > 64 || kw > 64 || ci > kMaxDim || co > kMaxDim) {
                throw FormatError("implausible layer shape in weights file");
            }
            if (act > 1) throw FormatError(fmt::format("unknown activation code {}", act));
            l = ConvLayer(static_cast<int>(kh), static_cast<int>(kw), static_cast<int>(ci), static_cast<int>(co),
                          static_cast<Activation>(act));
            for (double& v : l.weights) v = r.f64();
            for (double& v : l.bias) v = r.f64();
        }
        net.units.push_back(std::move(unit));
    }
    if (!r.at_end()) throw FormatError("trailing bytes after weights");
    try {
        net.validate();
    } catch (const DimensionError& e) {
        throw FormatError(std::string("inconsistent weights: ") + e.what());
    }
    return net;
}

}  // namespace ddsr
