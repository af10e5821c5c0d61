#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nnwd/image.hpp"

namespace nnwd {

enum class SsimAggregation { windowed_mean, global };

/// `printed_sum` evaluates (2μxμy + C1) + (2σxy + C2) in the numerator. It is a
/// diagnostic for comparing against the literal sum reading only: it does not
/// satisfy ssim(x, x) = 1 and has no gradient.
enum class SsimForm { product, printed_sum };

struct SsimParams {
    double k1 = 0.01;
    double k2 = 0.03;
    double range = 1.0;
    std::size_t window = 7;
    SsimAggregation aggregation = SsimAggregation::windowed_mean;
    SsimForm form = SsimForm::product;

    double c1() const { return (k1 * range) * (k1 * range); }
    double c2() const { return (k2 * range) * (k2 * range); }

    /// Throws std::invalid_argument unless 0 < K1, K2 < 1, L > 0 and the window is odd.
    void validate() const;
};

std::string to_string(SsimAggregation aggregation);
SsimAggregation ssim_aggregation_from_string(const std::string& name);

/// Per-window local SSIM, (h - win + 1) x (w - win + 1) windows, or 1x1 in
/// global mode. Multi-channel images average the channel maps.
struct SsimMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    double mean() const;
    /// Values mapped from [-1, 1] to [0, 1] for display.
    Image to_image() const;
};

/// Mean of ssim_map. Throws std::invalid_argument on a dim mismatch, a window
/// larger than the image, or values outside [0, L].
double ssim(const Image& x, const Image& y, const SsimParams& p = {});
SsimMap ssim_map(const Image& x, const Image& y, const SsimParams& p = {});

/// Plane-level form used by batch scoring: single channel, row-major h x w.
double ssim_plane(std::span<const double> x, std::span<const double> y, std::size_t h, std::size_t w,
                  const SsimParams& p = {});

struct SsimGradient {
    double value = 0.0;
    std::vector<double> dx;  // d ssim / d x, same layout as the image
    std::vector<double> dy;
};

/// Analytic gradient of ssim (product form) with respect to both images.
SsimGradient ssim_gradient(std::span<const double> x, std::span<const double> y, std::size_t h, std::size_t w,
                           std::size_t channels, const SsimParams& p = {});

double rmse(const Image& x, const Image& y);
double rmse(std::span<const double> x, std::span<const double> y);

}  // namespace nnwd
