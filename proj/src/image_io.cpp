#include "ddsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>

#include "ddsr/errors.hpp"

namespace ddsr {

namespace {

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path.string());
    return ss.str();
}

// Cursor over a netpbm-style header: whitespace separated tokens, '#' comments.
class HeaderReader {
public:
    explicit HeaderReader(const std::string& buf) : buf_(buf) {}

    std::string token() {
        skip_space();
        std::size_t start = pos_;
        while (pos_ < buf_.size() && !std::isspace(static_cast<unsigned char>(buf_[pos_]))) ++pos_;
        if (start == pos_) throw FormatError("truncated header");
        return buf_.substr(start, pos_ - start);
    }

    long integer() {
        const std::string t = token();
        try {
            std::size_t used = 0;
            long v = std::stol(t, &used);
            if (used != t.size()) throw FormatError("bad header integer: " + t);
            return v;
        } catch (const std::logic_error&) {
            throw FormatError("bad header integer: " + t);
        }
    }

    double real() {
        const std::string t = token();
        try {
            std::size_t used = 0;
            double v = std::stod(t, &used);
            if (used != t.size()) throw FormatError("bad header number: " + t);
            return v;
        } catch (const std::logic_error&) {
            throw FormatError("bad header number: " + t);
        }
    }

    // Exactly one whitespace byte separates the header from binary data.
    std::size_t data_offset() {
        if (pos_ >= buf_.size() || !std::isspace(static_cast<unsigned char>(buf_[pos_]))) {
            throw FormatError("missing separator before pixel data");
        }
        return pos_ + 1;
    }

private:
    void skip_space() {
        while (pos_ < buf_.size()) {
            const char c = buf_[pos_];
            if (c == '#') {
                while (pos_ < buf_.size() && buf_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::string& buf_;
    std::size_t pos_ = 0;
};

void check_header_dims(long w, long h) {
    if (w <= 0 || h <= 0 || w > (1L << 20) || h > (1L << 20)) {
        throw FormatError("invalid image dimensions in header");
    }
}

DepthMap decode_pfm(const std::string& buf) {
    HeaderReader hr(buf);
    const std::string magic = hr.token();
    if (magic == "PF") throw FormatError("color PFM (PF) is not a depth map");
    if (magic != "Pf") throw FormatError("unsupported magic '" + magic + "'");
    const long w = hr.integer();
    const long h = hr.integer();
    check_header_dims(w, h);
    const double scale = hr.real();
    if (scale == 0.0 || !std::isfinite(scale)) throw FormatError("PFM scale must be nonzero");
    const bool little = scale < 0.0;
    const std::size_t off = hr.data_offset();
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (buf.size() - off < n * 4) throw FormatError("PFM pixel data truncated");

    std::vector<double> data(n);
    const bool swap = little != (std::endian::native == std::endian::little);
    for (long row = 0; row < h; ++row) {
        // PFM rows run bottom-to-top.
        const long y = h - 1 - row;
        for (long x = 0; x < w; ++x) {
            std::uint32_t bits;
            std::memcpy(&bits, buf.data() + off + (static_cast<std::size_t>(row) * w + x) * 4, 4);
            if (swap) bits = __builtin_bswap32(bits);
            const float f = std::bit_cast<float>(bits);
            if (!std::isfinite(f)) throw DataError("PFM contains non-finite values");
            data[static_cast<std::size_t>(y) * w + x] = f;
        }
    }
    return DepthMap(static_cast<int>(w), static_cast<int>(h), std::move(data), 1.0);
}

DepthMap decode_pgm(const std::string& buf) {
    HeaderReader hr(buf);
    const std::string magic = hr.token();
    const long w = hr.integer();
    const long h = hr.integer();
    check_header_dims(w, h);
    const long maxval = hr.integer();
    if (maxval <= 0 || maxval > 65535) throw FormatError("PGM maxval out of range");
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    std::vector<double> data(n);

    if (magic == "P2") {
        for (std::size_t i = 0; i < n; ++i) {
            const long v = hr.integer();
            if (v < 0 || v > maxval) throw FormatError("PGM code exceeds maxval");
            data[i] = static_cast<double>(v);
        }
    } else {
        const std::size_t off = hr.data_offset();
        const std::size_t bpp = maxval > 255 ? 2 : 1;
        if (buf.size() - off < n * bpp) throw FormatError("PGM pixel data truncated");
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + off);
        for (std::size_t i = 0; i < n; ++i) {
            const long v = bpp == 2 ? (static_cast<long>(p[2 * i]) << 8) | p[2 * i + 1] : p[i];
            if (v > maxval) throw FormatError("PGM code exceeds maxval");
            data[i] = static_cast<double>(v);
        }
    }
    return DepthMap(static_cast<int>(w), static_cast<int>(h), std::move(data),
                    static_cast<double>(maxval));
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

DepthMap load_depth(const std::filesystem::path& path) {
    const std::string buf = read_all(path);
    if (buf.size() < 2 || buf[0] != 'P') throw FormatError("unrecognized depth file: " + path.string());
    switch (buf[1]) {
        case 'f':
        case 'F':
            return decode_pfm(buf);
        case '2':
        case '5':
            return decode_pgm(buf);
        default:
            throw FormatError("unsupported magic '" + buf.substr(0, 2) + "' in " + path.string());
    }
}

void save_depth(const DepthMap& map, const std::filesystem::path& path, DepthFormat format) {
    std::string bytes;
    const int w = map.width();
    const int h = map.height();
    if (format == DepthFormat::pfm) {
        bytes = "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
        const std::size_t off = bytes.size();
        bytes.resize(off + map.size() * 4);
        for (int row = 0; row < h; ++row) {
            const int y = h - 1 - row;
            for (int x = 0; x < w; ++x) {
                const double v = map.at(x, y);
                if (std::abs(v) > std::numeric_limits<float>::max()) {
                    throw DataError("depth value exceeds float range");
                }
                std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
                if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
                std::memcpy(bytes.data() + off + (static_cast<std::size_t>(row) * w + x) * 4, &bits, 4);
            }
        }
    } else {
        bytes = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
        const std::size_t off = bytes.size();
        bytes.resize(off + map.size() * 2);
        const double lo = map.min_value();
        const double hi = map.max_value();
        const double k = hi > lo ? 65535.0 / (hi - lo) : 0.0;
        for (std::size_t i = 0; i < map.size(); ++i) {
            const auto code = static_cast<std::uint16_t>(std::lround((map[i] - lo) * k));
            bytes[off + 2 * i] = static_cast<char>(code >> 8);
            bytes[off + 2 * i + 1] = static_cast<char>(code & 0xff);
        }
    }
    write_all(path, bytes);
}

DepthFormat depth_format_for(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".pgm" ? DepthFormat::pgm16 : DepthFormat::pfm;
}

ColorImage load_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    const std::string buf = read_all(path);
    if (!png_image_begin_read_from_memory(&image, buf.data(), buf.size())) {
        throw FormatError("not a readable PNG: " + path.string() + " (" + image.message + ")");
    }
    image.format = PNG_FORMAT_RGB;
    ColorImage out;
    out.width = static_cast<int>(image.width);
    out.height = static_cast<int>(image.height);
    out.rgb.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr)) {
        png_image_free(&image);
        throw FormatError("PNG decode failed: " + path.string());
    }
    return out;
}

void save_png(const ColorImage& img, const std::filesystem::path& path) {
    if (img.width <= 0 || img.height <= 0 ||
        img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
        throw DimensionError("color image buffer does not match dimensions");
    }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.rgb.data(), 0, nullptr)) {
        throw IoError("PNG encode failed");
    }
    std::string bytes(size, '\0');
    if (!png_image_write_to_memory(&image, bytes.data(), &size, 0, img.rgb.data(), 0, nullptr)) {
        throw IoError("PNG encode failed");
    }
    bytes.resize(size);
    write_all(path, bytes);
}

}  // namespace ddsr
