#pragma once

#include <string>
#include <vector>

#include "nnwd/image.hpp"
#include "nnwd/rng.hpp"

namespace nnwd {

enum class AugmentKind { rotate, crop_resize, horizontal_flip, grayscale };

/// `value` is the maximum angle in degrees for rotate, the minimum side
/// fraction for crop_resize and the application probability otherwise.
struct AugmentOp {
    AugmentKind kind;
    double value;
};

struct AugmentationSpec {
    std::vector<AugmentOp> ops;

    /// Throws std::invalid_argument for probabilities outside [0, 1], crop
    /// fractions outside (0, 1] or negative angles.
    void validate() const;

    /// rotate 10, crop-resize 0.85, flip 0.5, grayscale 0.2.
    static AugmentationSpec standard();
    static AugmentationSpec none() { return {}; }
};

std::string to_string(AugmentKind kind);

/// Applies the ops in order. Output has the input's dims and values in [0, 1].
Image augment(const Image& image, const AugmentationSpec& spec, Rng& rng);

/// Bilinear rotation about the image center; samples outside the frame read 0.
Image rotate_image(const Image& image, double degrees);
Image flip_horizontal(const Image& image);
/// Crops the window and resizes it back to the full frame bilinearly.
Image crop_resize(const Image& image, std::size_t top, std::size_t left, std::size_t height, std::size_t width);
/// Luma replicated across channels; a single-channel image is unchanged.
Image grayscale_replicated(const Image& image);

}  // namespace nnwd
