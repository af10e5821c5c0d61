#include "nnwd/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nnwd {

namespace {

/// Bilinear sample with zero outside the frame.
double sample(const Image& img, double y, double x, std::size_t ch) {
    const double fy = std::floor(y);
    const double fx = std::floor(x);
    const double dy = y - fy;
    const double dx = x - fx;
    auto at = [&](double r, double c) {
        if (r < 0 || c < 0 || r >= static_cast<double>(img.height) || c >= static_cast<double>(img.width)) return 0.0;
        return img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch);
    };
    return (at(fy, fx) * (1 - dx) + at(fy, fx + 1) * dx) * (1 - dy) +
           (at(fy + 1, fx) * (1 - dx) + at(fy + 1, fx + 1) * dx) * dy;
}

}  // namespace

std::string to_string(AugmentKind kind) {
    switch (kind) {
        case AugmentKind::rotate: return "rotate";
        case AugmentKind::crop_resize: return "crop-resize";
        case AugmentKind::horizontal_flip: return "horizontal-flip";
        case AugmentKind::grayscale: return "grayscale";
    }
    return "?";
}

void AugmentationSpec::validate() const {
    for (const auto& op : ops) {
        switch (op.kind) {
            case AugmentKind::rotate:
                if (!(op.value >= 0.0 && op.value <= 180.0)) throw std::invalid_argument("rotate angle must be in [0, 180]");
                break;
            case AugmentKind::crop_resize:
                if (!(op.value > 0.0 && op.value <= 1.0)) throw std::invalid_argument("crop fraction must be in (0, 1]");
                break;
            case AugmentKind::horizontal_flip:
            case AugmentKind::grayscale:
                if (!(op.value >= 0.0 && op.value <= 1.0)) {
                    throw std::invalid_argument(to_string(op.kind) + " probability must be in [0, 1]");
                }
                break;
        }
    }
}

AugmentationSpec AugmentationSpec::standard() {
    return {{{AugmentKind::rotate, 10.0},
             {AugmentKind::crop_resize, 0.85},
             {AugmentKind::horizontal_flip, 0.5},
             {AugmentKind::grayscale, 0.2}}};
}

Image rotate_image(const Image& image, double degrees) {
    if (degrees == 0.0) return image;
    const double a = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(a);
    const double s = std::sin(a);
    const double cy = (static_cast<double>(image.height) - 1) / 2.0;
    const double cx = (static_cast<double>(image.width) - 1) / 2.0;
    Image out(image.height, image.width, image.channels);
    for (std::size_t r = 0; r < image.height; ++r) {
        for (std::size_t col = 0; col < image.width; ++col) {
            const double y = static_cast<double>(r) - cy;
            const double x = static_cast<double>(col) - cx;
            // Inverse map: output pixel looks up the source rotated back.
            const double sx = c * x - s * y + cx;
            const double sy = s * x + c * y + cy;
            for (std::size_t ch = 0; ch < image.channels; ++ch) {
                out.at(r, col, ch) = std::clamp(sample(image, sy, sx, ch), 0.0, 1.0);
            }
        }
    }
    return out;
}

Image flip_horizontal(const Image& image) {
    Image out(image.height, image.width, image.channels);
    for (std::size_t r = 0; r < image.height; ++r) {
        for (std::size_t c = 0; c < image.width; ++c) {
            for (std::size_t ch = 0; ch < image.channels; ++ch) out.at(r, c, ch) = image.at(r, image.width - 1 - c, ch);
        }
    }
    return out;
}

Image crop_resize(const Image& image, std::size_t top, std::size_t left, std::size_t height, std::size_t width) {
    if (height == 0 || width == 0 || top + height > image.height || left + width > image.width) {
        throw std::invalid_argument("crop window outside the image");
    }
    if (height == image.height && width == image.width) return image;
    Image out(image.height, image.width, image.channels);
    const double sy = image.height > 1 ? static_cast<double>(height - 1) / static_cast<double>(image.height - 1) : 0.0;
    const double sx = image.width > 1 ? static_cast<double>(width - 1) / static_cast<double>(image.width - 1) : 0.0;
    for (std::size_t r = 0; r < image.height; ++r) {
        for (std::size_t c = 0; c < image.width; ++c) {
            const double y = static_cast<double>(top) + sy * static_cast<double>(r);
            const double x = static_cast<double>(left) + sx * static_cast<double>(c);
            for (std::size_t ch = 0; ch < image.channels; ++ch) {
                // Clamp the far neighbour to the crop so no zero padding leaks in.
                const double yy = std::min(y, static_cast<double>(top + height - 1));
                const double xx = std::min(x, static_cast<double>(left + width - 1));
                const auto y0 = static_cast<std::size_t>(yy);
                const auto x0 = static_cast<std::size_t>(xx);
                const std::size_t y1 = std::min(y0 + 1, top + height - 1);
                const std::size_t x1 = std::min(x0 + 1, left + width - 1);
                const double dy = yy - static_cast<double>(y0);
                const double dx = xx - static_cast<double>(x0);
                const double v = (image.at(y0, x0, ch) * (1 - dx) + image.at(y0, x1, ch) * dx) * (1 - dy) +
                                 (image.at(y1, x0, ch) * (1 - dx) + image.at(y1, x1, ch) * dx) * dy;
                out.at(r, c, ch) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

Image grayscale_replicated(const Image& image) {
    if (image.channels == 1) return image;
    const Image gray = to_grayscale(image);
    Image out(image.height, image.width, image.channels);
    for (std::size_t i = 0; i < gray.size(); ++i) {
        for (std::size_t ch = 0; ch < image.channels; ++ch) out.pixels[i * image.channels + ch] = gray.pixels[i];
    }
    return out;
}

Image augment(const Image& image, const AugmentationSpec& spec, Rng& rng) {
    Image out = image;
    for (const auto& op : spec.ops) {
        switch (op.kind) {
            case AugmentKind::rotate:
                if (op.value > 0.0) out = rotate_image(out, rng.uniform(-op.value, op.value));
                break;
            case AugmentKind::crop_resize:
                if (op.value < 1.0) {
                    const double frac = rng.uniform(op.value, 1.0);
                    const auto ch = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frac * static_cast<double>(out.height))));
                    const auto cw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frac * static_cast<double>(out.width))));
                    const std::size_t top = rng.below(out.height - ch + 1);
                    const std::size_t left = rng.below(out.width - cw + 1);
                    out = crop_resize(out, top, left, ch, cw);
                }
                break;
            case AugmentKind::horizontal_flip:
                if (rng.bernoulli(op.value)) out = flip_horizontal(out);
                break;
            case AugmentKind::grayscale:
                if (rng.bernoulli(op.value)) out = grayscale_replicated(out);
                break;
        }
    }
    out.clip();
    return out;
}

}  // namespace nnwd
