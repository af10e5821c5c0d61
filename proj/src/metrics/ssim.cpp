#include "nnwd/ssim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nnwd {

namespace {

struct WindowStats {
    double mx, my, exx, eyy, exy;
};

struct Geometry {
    std::size_t win_h, win_w;    // window extent
    std::size_t rows, cols;      // number of window positions
};

Geometry geometry(std::size_t h, std::size_t w, const SsimParams& p) {
    if (p.aggregation == SsimAggregation::global) return {h, w, 1, 1};
    if (p.window > h || p.window > w) {
        throw std::invalid_argument("SSIM window " + std::to_string(p.window) + " exceeds image size " +
                                    std::to_string(h) + "x" + std::to_string(w));
    }
    return {p.window, p.window, h - p.window + 1, w - p.window + 1};
}

WindowStats window_stats(const double* x, const double* y, std::size_t w, std::size_t top, std::size_t left,
                         const Geometry& g) {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t r = top; r < top + g.win_h; ++r) {
        const double* xr = x + r * w;
        const double* yr = y + r * w;
        for (std::size_t c = left; c < left + g.win_w; ++c) {
            sx += xr[c];
            sy += yr[c];
            sxx += xr[c] * xr[c];
            syy += yr[c] * yr[c];
            sxy += xr[c] * yr[c];
        }
    }
    const double n = static_cast<double>(g.win_h * g.win_w);
    return {sx / n, sy / n, sxx / n, syy / n, sxy / n};
}

/// Local SSIM. Swapping x and y permutes the operands of every + and * only,
/// so the result is exactly symmetric, and x == y gives numerator == denominator.
double local_ssim(const WindowStats& s, double c1, double c2, SsimForm form) {
    const double vx = s.exx - s.mx * s.mx;
    const double vy = s.eyy - s.my * s.my;
    const double cxy = s.exy - s.mx * s.my;
    const double a1 = 2.0 * s.mx * s.my + c1;
    const double a2 = 2.0 * cxy + c2;
    const double b1 = s.mx * s.mx + s.my * s.my + c1;
    const double b2 = vx + vy + c2;
    if (form == SsimForm::printed_sum) return (a1 + a2) / (b1 * b2);
    return (a1 * a2) / (b1 * b2);
}

void check_plane(std::span<const double> x, std::span<const double> y, std::size_t h, std::size_t w, double range) {
    if (h == 0 || w == 0) throw std::invalid_argument("SSIM on an empty image");
    if (x.size() != y.size() || x.size() % (h * w) != 0) {
        throw std::invalid_argument("SSIM inputs differ in size: " + std::to_string(x.size()) + " vs " +
                                    std::to_string(y.size()));
    }
    for (std::span<const double> s : {x, y}) {
        for (double v : s) {
            if (!(v >= 0.0 && v <= range)) throw std::invalid_argument("SSIM input value outside [0, L]");
        }
    }
}

std::vector<double> plane_map(const double* x, const double* y, std::size_t h, std::size_t w, const SsimParams& p) {
    const Geometry g = geometry(h, w, p);
    const double c1 = p.c1();
    const double c2 = p.c2();
    std::vector<double> out(g.rows * g.cols);
    for (std::size_t i = 0; i < g.rows; ++i) {
        for (std::size_t j = 0; j < g.cols; ++j) out[i * g.cols + j] = local_ssim(window_stats(x, y, w, i, j, g), c1, c2, p.form);
    }
    return out;
}

std::vector<double> channel_plane(std::span<const double> v, std::size_t hw, std::size_t channels, std::size_t ch) {
    std::vector<double> plane(hw);
    for (std::size_t i = 0; i < hw; ++i) plane[i] = v[i * channels + ch];
    return plane;
}

}  // namespace

void SsimParams::validate() const {
    if (!(k1 > 0.0 && k1 < 1.0 && k2 > 0.0 && k2 < 1.0)) throw std::invalid_argument("SSIM K1 and K2 must lie in (0, 1)");
    if (!(range > 0.0)) throw std::invalid_argument("SSIM data range L must be positive");
    if (window == 0 || window % 2 == 0) throw std::invalid_argument("SSIM window must be odd");
}

std::string to_string(SsimAggregation aggregation) {
    return aggregation == SsimAggregation::global ? "global" : "windowed-mean";
}

SsimAggregation ssim_aggregation_from_string(const std::string& name) {
    if (name == "global") return SsimAggregation::global;
    if (name == "windowed-mean" || name == "windowed") return SsimAggregation::windowed_mean;
    throw std::invalid_argument("unknown SSIM aggregation '" + name + "' (global, windowed-mean)");
}

double SsimMap::mean() const {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

Image SsimMap::to_image() const {
    Image img(height, width, 1);
    for (std::size_t i = 0; i < values.size(); ++i) img.pixels[i] = std::clamp((values[i] + 1.0) / 2.0, 0.0, 1.0);
    return img;
}

SsimMap ssim_map(const Image& x, const Image& y, const SsimParams& p) {
    p.validate();
    if (!x.same_dims(y)) throw std::invalid_argument("SSIM inputs have different dimensions");
    check_plane(x.pixels, y.pixels, x.height, x.width, p.range);
    const Geometry g = geometry(x.height, x.width, p);
    SsimMap map{g.rows, g.cols, {}};
    const std::size_t hw = x.height * x.width;
    if (x.channels == 1) {
        map.values = plane_map(x.pixels.data(), y.pixels.data(), x.height, x.width, p);
        return map;
    }
    map.values.assign(g.rows * g.cols, 0.0);
    for (std::size_t ch = 0; ch < x.channels; ++ch) {
        const auto xp = channel_plane(x.pixels, hw, x.channels, ch);
        const auto yp = channel_plane(y.pixels, hw, y.channels, ch);
        const auto m = plane_map(xp.data(), yp.data(), x.height, x.width, p);
        for (std::size_t i = 0; i < m.size(); ++i) map.values[i] += m[i] / static_cast<double>(x.channels);
    }
    return map;
}

double ssim(const Image& x, const Image& y, const SsimParams& p) { return ssim_map(x, y, p).mean(); }

double ssim_plane(std::span<const double> x, std::span<const double> y, std::size_t h, std::size_t w,
                  const SsimParams& p) {
    p.validate();
    check_plane(x, y, h, w, p.range);
    if (x.size() != h * w) throw std::invalid_argument("ssim_plane expects a single channel");
    const auto m = plane_map(x.data(), y.data(), h, w, p);
    return std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
}

SsimGradient ssim_gradient(std::span<const double> x, std::span<const double> y, std::size_t h, std::size_t w,
                           std::size_t channels, const SsimParams& p) {
    p.validate();
    if (p.form != SsimForm::product) throw std::invalid_argument("SSIM gradient is defined for the product form only");
    check_plane(x, y, h, w, p.range);
    if (x.size() != h * w * channels) throw std::invalid_argument("SSIM gradient: size does not match dims");
    const Geometry g = geometry(h, w, p);
    const double c1 = p.c1();
    const double c2 = p.c2();
    const double n = static_cast<double>(g.win_h * g.win_w);
    const double scale = 1.0 / static_cast<double>(g.rows * g.cols * channels);
    const std::size_t hw = h * w;

    SsimGradient out{0.0, std::vector<double>(x.size(), 0.0), std::vector<double>(y.size(), 0.0)};
    // Per-pixel sums of the window coefficients: d/dx_p = ax + bx x_p + c y_p.
    std::vector<double> ax(hw), ay(hw), bx(hw), cc(hw);
    for (std::size_t ch = 0; ch < channels; ++ch) {
        const auto xp = channel_plane(x, hw, channels, ch);
        const auto yp = channel_plane(y, hw, channels, ch);
        std::fill(ax.begin(), ax.end(), 0.0);
        std::fill(bx.begin(), bx.end(), 0.0);
        std::fill(ay.begin(), ay.end(), 0.0);
        std::fill(cc.begin(), cc.end(), 0.0);
        double sum = 0.0;
        for (std::size_t i = 0; i < g.rows; ++i) {
            for (std::size_t j = 0; j < g.cols; ++j) {
                const WindowStats s = window_stats(xp.data(), yp.data(), w, i, j, g);
                const double vx = s.exx - s.mx * s.mx;
                const double vy = s.eyy - s.my * s.my;
                const double a1 = 2.0 * s.mx * s.my + c1;
                const double a2 = 2.0 * (s.exy - s.mx * s.my) + c2;
                const double b1 = s.mx * s.mx + s.my * s.my + c1;
                const double b2 = vx + vy + c2;
                const double d = b1 * b2;
                const double v = a1 * a2 / d;
                sum += v;
                const double d_mx = 2.0 * s.my * (a2 - a1) / d - v * (2.0 * s.mx / b1 - 2.0 * s.mx / b2);
                const double d_my = 2.0 * s.mx * (a2 - a1) / d - v * (2.0 * s.my / b1 - 2.0 * s.my / b2);
                const double d_exx = -v / b2;  // same for eyy
                const double d_exy = 2.0 * a1 / d;
                const double k_ax = d_mx / n, k_ay = d_my / n, k_b = 2.0 * d_exx / n, k_c = d_exy / n;
                for (std::size_t r = i; r < i + g.win_h; ++r) {
                    for (std::size_t c = j; c < j + g.win_w; ++c) {
                        const std::size_t q = r * w + c;
                        ax[q] += k_ax;
                        ay[q] += k_ay;
                        bx[q] += k_b;
                        cc[q] += k_c;
                    }
                }
            }
        }
        out.value += sum * scale;
        for (std::size_t q = 0; q < hw; ++q) {
            out.dx[q * channels + ch] = (ax[q] + bx[q] * xp[q] + cc[q] * yp[q]) * scale;
            out.dy[q * channels + ch] = (ay[q] + bx[q] * yp[q] + cc[q] * xp[q]) * scale;
        }
    }
    return out;
}

double rmse(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) throw std::invalid_argument("rmse inputs must be non-empty and equal in size");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s / static_cast<double>(x.size()));
}

double rmse(const Image& x, const Image& y) {
    if (!x.same_dims(y)) throw std::invalid_argument("rmse inputs have different dimensions");
    return rmse(std::span<const double>(x.pixels), std::span<const double>(y.pixels));
}

}  // namespace nnwd
