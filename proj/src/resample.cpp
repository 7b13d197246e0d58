#include "ddsr/resample.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ddsr/errors.hpp"

namespace ddsr {

namespace {

constexpr double kCubicA = -0.5;

struct Taps {
    std::array<int, 4> index;
    std::array<double, 4> weight;
};

// Source position of output sample `i` under pixel-center alignment.
double source_coord(int i, int in_size, int out_size) {
    return (i + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
}

std::vector<Taps> cubic_taps(int in_size, int out_size) {
    std::vector<Taps> taps(static_cast<std::size_t>(out_size));
    for (int i = 0; i < out_size; ++i) {
        const double s = source_coord(i, in_size, out_size);
        const double base = std::floor(s);
        const double t = s - base;
        const int b = static_cast<int>(base);
        Taps& tp = taps[static_cast<std::size_t>(i)];
        for (int k = 0; k < 4; ++k) {
            tp.index[k] = std::clamp(b - 1 + k, 0, in_size - 1);
        }
        tp.weight = {cubic_kernel(t + 1.0), cubic_kernel(t), cubic_kernel(1.0 - t),
                     cubic_kernel(2.0 - t)};
    }
    return taps;
}

// Expressed relative to the anchor tap so that the implied anchor weight is
// 1 - (others) and constant inputs come out bit-exact.
inline double apply_taps(const Taps& tp, double c0, double c1, double c2, double c3) {
    return c1 + tp.weight[0] * (c0 - c1) + tp.weight[2] * (c2 - c1) + tp.weight[3] * (c3 - c1);
}

void check_out_dims(int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) {
        throw DimensionError("output size must be at least 1x1, got " + std::to_string(out_w) + "x" +
                             std::to_string(out_h));
    }
}

}  // namespace

double cubic_kernel(double t) noexcept {
    const double x = std::abs(t);
    if (x <= 1.0) return ((kCubicA + 2.0) * x - (kCubicA + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((kCubicA * x - 5.0 * kCubicA) * x + 8.0 * kCubicA) * x - 4.0 * kCubicA;
    return 0.0;
}

DepthMap resize_bicubic(const DepthMap& map, int out_w, int out_h) {
    check_out_dims(out_w, out_h);
    const int in_w = map.width();
    const int in_h = map.height();
    const auto xt = cubic_taps(in_w, out_w);
    const auto yt = cubic_taps(in_h, out_h);

    std::vector<double> horiz(static_cast<std::size_t>(in_h) * out_w);
    for (int y = 0; y < in_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const Taps& tp = xt[static_cast<std::size_t>(x)];
            horiz[static_cast<std::size_t>(y) * out_w + x] =
                apply_taps(tp, map.at(tp.index[0], y), map.at(tp.index[1], y),
                           map.at(tp.index[2], y), map.at(tp.index[3], y));
        }
    }

    std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
    auto row = [&](int y) { return horiz.data() + static_cast<std::size_t>(y) * out_w; };
    for (int y = 0; y < out_h; ++y) {
        const Taps& tp = yt[static_cast<std::size_t>(y)];
        const double* r0 = row(tp.index[0]);
        const double* r1 = row(tp.index[1]);
        const double* r2 = row(tp.index[2]);
        const double* r3 = row(tp.index[3]);
        double* o = out.data() + static_cast<std::size_t>(y) * out_w;
        for (int x = 0; x < out_w; ++x) o[x] = apply_taps(tp, r0[x], r1[x], r2[x], r3[x]);
    }
    return DepthMap(out_w, out_h, std::move(out), map.scale());
}

DepthMap resize_nearest(const DepthMap& map, int out_w, int out_h) {
    check_out_dims(out_w, out_h);
    auto nearest = [](int i, int in_size, int out_size) {
        const double s = (i + 0.5) * static_cast<double>(in_size) / out_size;
        return std::clamp(static_cast<int>(std::floor(s)), 0, in_size - 1);
    };
    std::vector<int> xs(static_cast<std::size_t>(out_w));
    for (int x = 0; x < out_w; ++x) xs[static_cast<std::size_t>(x)] = nearest(x, map.width(), out_w);
    std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
    for (int y = 0; y < out_h; ++y) {
        const int sy = nearest(y, map.height(), out_h);
        for (int x = 0; x < out_w; ++x) {
            out[static_cast<std::size_t>(y) * out_w + x] = map.at(xs[static_cast<std::size_t>(x)], sy);
        }
    }
    return DepthMap(out_w, out_h, std::move(out), map.scale());
}

DegradeResult degrade(const DepthMap& hr, ScaleFactor factor, DegradeMethod method) {
    const int s = factor.value();
    const int cw = hr.width() / s * s;
    const int ch = hr.height() / s * s;
    if (cw == 0 || ch == 0) {
        throw DimensionError("image " + std::to_string(hr.width()) + "x" + std::to_string(hr.height()) +
                             " is smaller than the scale factor " + std::to_string(s));
    }
    const int ow = cw / s;
    const int oh = ch / s;
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    const double inv = 1.0 / (static_cast<double>(s) * s);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double v;
            if (method == DegradeMethod::decimate) {
                v = hr.at(x * s, y * s);
            } else {
                double acc = 0.0;
                for (int dy = 0; dy < s; ++dy)
                    for (int dx = 0; dx < s; ++dx) acc += hr.at(x * s + dx, y * s + dy);
                v = acc * inv;
            }
            out[static_cast<std::size_t>(y) * ow + x] = v;
        }
    }
    return {DepthMap(ow, oh, std::move(out), hr.scale()), cw, ch};
}

}  // namespace ddsr
