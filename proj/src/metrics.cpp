#include "ddsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "ddsr/errors.hpp"

namespace ddsr {

namespace {

void require_same_dims(const DepthMap& a, const DepthMap& b) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw DimensionError(fmt::format("dimension mismatch: {}x{} vs {}x{}", a.width(), a.height(),
                                         b.width(), b.height()));
    }
    if (a.empty()) throw DimensionError("empty depth map");
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

std::vector<double> gaussian_window(int size) {
    const int r = size / 2;
    std::vector<double> g1(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        const double d = i - r;
        g1[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
    }
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    double total = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double v = g1[static_cast<std::size_t>(y)] * g1[static_cast<std::size_t>(x)];
            w[static_cast<std::size_t>(y) * size + x] = v;
            total += v;
        }
    for (double& v : w) v /= total;
    return w;
}

double laplace_cdf(double x, double mu, double b) {
    const double z = (x - mu) / b;
    return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
}

}  // namespace

std::string MetricReport::to_json() const {
    return fmt::format(R"({{"rmse":{},"mae":{},"ssim":{},"n":{}}})", rmse, mae, ssim, n);
}

std::string MetricReport::to_csv() const {
    return fmt::format("{},{},{},{}", rmse, mae, ssim, n);
}

double rmse(const DepthMap& obs, const DepthMap& gt) {
    require_same_dims(obs, gt);
    double acc = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double d = obs[i] - gt[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(obs.size()));
}

double mae(const DepthMap& obs, const DepthMap& gt) {
    require_same_dims(obs, gt);
    double acc = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) acc += std::abs(obs[i] - gt[i]);
    return acc / static_cast<double>(obs.size());
}

double ssim(const DepthMap& obs, const DepthMap& gt, double dynamic_range) {
    require_same_dims(obs, gt);
    if (!(dynamic_range >= 0.0) || !std::isfinite(dynamic_range)) {
        throw DegenerateError("SSIM dynamic range must be finite and non-negative");
    }
    if (dynamic_range == 0.0) {
        if (std::equal(obs.values().begin(), obs.values().end(), gt.values().begin())) {
            return 1.0;
        }
        throw DegenerateError("SSIM dynamic range is zero but the maps differ");
    }

    int win = std::min({kSsimWindow, obs.width(), obs.height()});
    if (win % 2 == 0) --win;
    const auto w = gaussian_window(win);
    const double c1 = (kSsimK1 * dynamic_range) * (kSsimK1 * dynamic_range);
    const double c2 = (kSsimK2 * dynamic_range) * (kSsimK2 * dynamic_range);

    double total = 0.0;
    std::size_t count = 0;
    for (int y0 = 0; y0 + win <= obs.height(); ++y0) {
        for (int x0 = 0; x0 + win <= obs.width(); ++x0) {
            double mx = 0.0, my = 0.0;
            for (int j = 0; j < win; ++j)
                for (int i = 0; i < win; ++i) {
                    const double wt = w[static_cast<std::size_t>(j) * win + i];
                    mx += wt * obs.at(x0 + i, y0 + j);
                    my += wt * gt.at(x0 + i, y0 + j);
                }
            double vx = 0.0, vy = 0.0, cxy = 0.0;
            for (int j = 0; j < win; ++j)
                for (int i = 0; i < win; ++i) {
                    const double wt = w[static_cast<std::size_t>(j) * win + i];
                    const double dx = obs.at(x0 + i, y0 + j) - mx;
                    const double dy = gt.at(x0 + i, y0 + j) - my;
                    vx += wt * (dx * dx);
                    vy += wt * (dy * dy);
                    cxy += wt * (dx * dy);
                }
            const double num = (2.0 * (mx * my) + c1) * (2.0 * cxy + c2);
            const double den = ((mx * mx + my * my) + c1) * ((vx + vy) + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double ssim(const DepthMap& obs, const DepthMap& gt) {
    require_same_dims(obs, gt);
    return ssim(obs, gt, gt.max_value() - gt.min_value());
}

MetricReport evaluate(const DepthMap& obs, const DepthMap& gt) {
    return {rmse(obs, gt), mae(obs, gt), ssim(obs, gt), obs.size()};
}

DepthMap abs_difference(const DepthMap& obs, const DepthMap& gt) {
    require_same_dims(obs, gt);
    std::vector<double> d(obs.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(obs[i] - gt[i]);
    return gt.with_values(std::move(d));
}

LaplaceFit fit_laplace(std::span<const double> samples, int bins) {
    if (samples.empty()) throw DimensionError("no gradient samples to fit");
    if (bins < 1) throw ConfigError("histogram needs at least one bin");

    LaplaceFit fit;
    fit.samples = samples.size();

    std::vector<double> sorted(samples.begin(), samples.end());
    const std::size_t mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
    double median = sorted[mid];
    if (sorted.size() % 2 == 0) {
        const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (lower + median);
    }
    fit.location = median;

    double mad = 0.0;
    for (double x : samples) mad += std::abs(x - median);
    mad /= static_cast<double>(samples.size());
    fit.scale = std::max(mad, kLaplaceScaleFloor);

    fit.histogram.assign(static_cast<std::size_t>(bins), 0.0);
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    for (double x : samples) {
        if (x < -1.0 || x > 1.0) continue;
        int b = static_cast<int>(std::floor((x + 1.0) * bins / 2.0));
        b = std::clamp(b, 0, bins - 1);
        fit.histogram[static_cast<std::size_t>(b)] += inv_n;
    }

    fit.density.resize(static_cast<std::size_t>(bins));
    double sq = 0.0;
    for (int b = 0; b < bins; ++b) {
        const double lo = -1.0 + 2.0 * b / bins;
        const double hi = -1.0 + 2.0 * (b + 1) / bins;
        const double p = laplace_cdf(hi, fit.location, fit.scale) - laplace_cdf(lo, fit.location, fit.scale);
        fit.density[static_cast<std::size_t>(b)] = p;
        const double d = fit.histogram[static_cast<std::size_t>(b)] - p;
        sq += d * d;
    }
    fit.fit_rmse = std::sqrt(sq / bins);
    return fit;
}

std::vector<double> pooled_gradients(std::span<const DepthMap> maps) {
    if (maps.empty()) throw DimensionError("gradient statistics need at least one map");
    double lo = maps.front().min_value();
    double hi = maps.front().max_value();
    for (const auto& m : maps) {
        if (m.width() < 2 || m.height() < 2) {
            throw DimensionError("gradient statistics need maps of at least 2x2 pixels");
        }
        lo = std::min(lo, m.min_value());
        hi = std::max(hi, m.max_value());
    }
    const double k = hi > lo ? 1.0 / (hi - lo) : 0.0;

    std::vector<double> g;
    for (const auto& m : maps) {
        const int w = m.width();
        const int h = m.height();
        g.reserve(g.size() + static_cast<std::size_t>(h) * (w - 1) + static_cast<std::size_t>(w) * (h - 1));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x + 1 < w; ++x) g.push_back((m.at(x + 1, y) - m.at(x, y)) * k);
        for (int y = 0; y + 1 < h; ++y)
            for (int x = 0; x < w; ++x) g.push_back((m.at(x, y + 1) - m.at(x, y)) * k);
    }
    return g;
}

LaplaceFit gradient_laplace_fit(std::span<const DepthMap> maps, int bins) {
    const auto g = pooled_gradients(maps);
    return fit_laplace(g, bins);
}

}  // namespace ddsr
