#include "nnwd/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace nnwd {

Image::Image(std::size_t h, std::size_t w, std::size_t c, double fill)
    : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

void Image::validate() const {
    if (height == 0 || width == 0) throw ShapeError("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw ShapeError("image must have 1 or 3 channels");
    if (pixels.size() != height * width * channels) throw ShapeError("image pixel count does not match dimensions");
    for (double v : pixels) {
        if (!(v >= 0.0 && v <= 1.0)) throw ShapeError("image value outside [0, 1]");
    }
}

void Image::clip() {
    for (double& v : pixels) v = std::clamp(v, 0.0, 1.0);
}

Image to_grayscale(const Image& image) {
    if (image.channels == 1) return image;
    Image out(image.height, image.width, 1);
    for (std::size_t i = 0; i < image.height * image.width; ++i) {
        const double* px = &image.pixels[i * 3];
        out.pixels[i] = std::clamp(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2], 0.0, 1.0);
    }
    return out;
}

Tensor images_to_batch(const std::vector<const Image*>& images) {
    if (images.empty()) throw ShapeError("cannot batch zero images");
    const std::size_t width = images.front()->size();
    Buffer data;
    data.reserve(images.size() * width);
    for (const Image* img : images) {
        if (!img->same_dims(*images.front())) throw ShapeError("batched images must share dimensions");
        data.insert(data.end(), img->pixels.begin(), img->pixels.end());
    }
    return Tensor({images.size(), width}, std::move(data));
}

Tensor image_to_batch(const Image& image) { return images_to_batch({&image}); }

Image image_from_values(std::span<const double> values, std::size_t h, std::size_t w, std::size_t c) {
    if (values.size() != h * w * c) throw ShapeError("value count does not match image dimensions");
    Image img(h, w, c);
    std::copy(values.begin(), values.end(), img.pixels.begin());
    return img;
}

namespace {

class HeaderParser {
public:
    explicit HeaderParser(const std::string& bytes) : bytes_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const char ch = bytes_[pos_];
            if (ch == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::size_t number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        std::size_t value = 0;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
            if (value > 1u << 20) throw ImageFormatError(std::string("netpbm ") + what + " too large", start);
            ++pos_;
        }
        if (pos_ == start) throw ImageFormatError(std::string("netpbm header: expected ") + what, pos_);
        return value;
    }

    std::size_t pos_ = 0;

private:
    const std::string& bytes_;
};

}  // namespace

Image decode_netpbm(const std::string& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw ImageFormatError("not a binary PGM/PPM file (expected P5 or P6 magic)", 0);
    }
    const std::size_t channels = bytes[1] == '5' ? 1 : 3;
    HeaderParser p(bytes);
    p.pos_ = 2;
    const std::size_t width = p.number("width");
    const std::size_t height = p.number("height");
    const std::size_t maxval = p.number("maxval");
    if (width == 0 || height == 0) throw ImageFormatError("netpbm dimensions must be positive", p.pos_);
    if (maxval == 0 || maxval > 65535) throw ImageFormatError("netpbm maxval must be in 1..65535", p.pos_);
    if (p.pos_ >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[p.pos_]))) {
        throw ImageFormatError("netpbm header must end with one whitespace byte", p.pos_);
    }
    ++p.pos_;
    const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
    const std::size_t count = width * height * channels;
    if (bytes.size() - p.pos_ < count * sample_bytes) {
        throw ImageFormatError("netpbm pixel data truncated", bytes.size());
    }
    Image img(height, width, channels);
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + p.pos_);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t v = sample_bytes == 1 ? data[i] : (std::size_t{data[2 * i]} << 8) | data[2 * i + 1];
        if (v > maxval) throw ImageFormatError("netpbm sample exceeds maxval", p.pos_ + i * sample_bytes);
        img.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
    }
    return img;
}

Image read_netpbm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageFormatError("cannot open " + path.string(), 0);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_netpbm(bytes);
}

std::string encode_netpbm(const Image& image) {
    image.validate();
    std::ostringstream out;
    out << (image.channels == 1 ? "P5" : "P6") << '\n' << image.width << ' ' << image.height << "\n255\n";
    std::string header = out.str();
    std::string bytes = header;
    bytes.reserve(header.size() + image.size());
    for (double v : image.pixels) bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    return bytes;
}

void write_netpbm(const Image& image, const std::filesystem::path& path) {
    const std::string bytes = encode_netpbm(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Image contact_sheet(const std::vector<Image>& tiles, std::size_t columns, double separator) {
    if (tiles.empty()) return Image(1, 1, 1, separator);
    columns = std::max<std::size_t>(1, std::min(columns, tiles.size()));
    const std::size_t rows = (tiles.size() + columns - 1) / columns;
    const std::size_t th = tiles.front().height;
    const std::size_t tw = tiles.front().width;
    Image sheet(rows * (th + 1) + 1, columns * (tw + 1) + 1, 1, separator);
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        const Image gray = to_grayscale(tiles[i]);
        if (gray.height != th || gray.width != tw) throw ShapeError("contact sheet tiles must share dimensions");
        const std::size_t top = (i / columns) * (th + 1) + 1;
        const std::size_t left = (i % columns) * (tw + 1) + 1;
        for (std::size_t r = 0; r < th; ++r) {
            for (std::size_t c = 0; c < tw; ++c) sheet.at(top + r, left + c) = std::clamp(gray.at(r, c), 0.0, 1.0);
        }
    }
    return sheet;
}

}  // namespace nnwd
