#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnwd/tensor.hpp"

namespace nnwd {

/// Row-major image with interleaved channels, values in [0, 1].
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;
    std::vector<double> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w, std::size_t c = 1, double fill = 0.0);

    std::size_t size() const { return pixels.size(); }
    bool same_dims(const Image& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }
    double& at(std::size_t r, std::size_t c, std::size_t ch = 0) { return pixels[(r * width + c) * channels + ch]; }
    double at(std::size_t r, std::size_t c, std::size_t ch = 0) const {
        return pixels[(r * width + c) * channels + ch];
    }

    /// Throws if dimensions are zero, channels not in {1, 3}, or any value leaves [0, 1].
    void validate() const;
    void clip();

    friend bool operator==(const Image&, const Image&) = default;
};

/// Luma conversion 0.299 R + 0.587 G + 0.114 B; single-channel input is returned as is.
Image to_grayscale(const Image& image);

/// Flattened [n, h*w*c] batch of images with identical dims.
Tensor images_to_batch(const std::vector<const Image*>& images);
Tensor image_to_batch(const Image& image);
Image image_from_values(std::span<const double> values, std::size_t h, std::size_t w, std::size_t c = 1);

/// Netpbm parse failure; `offset` is the byte position where parsing stopped.
class ImageFormatError : public std::runtime_error {
public:
    ImageFormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Reads binary PGM (P5) or PPM (P6), maxval up to 65535. Values scaled to [0, 1].
Image read_netpbm(const std::filesystem::path& path);
Image decode_netpbm(const std::string& bytes);

/// Writes P5 for one channel, P6 for three, maxval 255.
void write_netpbm(const Image& image, const std::filesystem::path& path);
std::string encode_netpbm(const Image& image);

/// Grid of tiles with one-pixel separators and frame, single channel.
Image contact_sheet(const std::vector<Image>& tiles, std::size_t columns, double separator = 1.0);

}  // namespace nnwd
