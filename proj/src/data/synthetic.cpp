#include "nnwd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "nnwd/rng.hpp"

namespace nnwd {

namespace {

constexpr double kPi = std::numbers::pi;

double radians(double deg) { return deg * kPi / 180.0; }

struct Point {
    double x;
    double y;
};

Point rotate(Point p, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
}

bool inside_polygon(Point p, int sides, double angle) {
    const double half = kPi / sides;
    const double apothem = std::cos(half);
    for (int k = 0; k < sides; ++k) {
        const double a = angle + half + 2.0 * kPi * k / sides;
        if (p.x * std::cos(a) + p.y * std::sin(a) > apothem) return false;
    }
    return true;
}

bool inside_glyph(const Glyph& g, Point p) {
    const double r = std::hypot(p.x, p.y);
    if (r > 1.0) return false;
    const double a = radians(g.angle_deg);
    switch (g.kind) {
        case GlyphKind::polygon: return inside_polygon(p, g.sides, a);
        case GlyphKind::disk: return r <= 0.9;
        case GlyphKind::ring: return r >= 0.55 && r <= 0.95;
        case GlyphKind::bars: {
            const Point q = rotate(p, -a);
            if (std::abs(q.x) > 0.6) return false;
            for (double c : {-0.55, 0.0, 0.55}) {
                if (std::abs(q.y - c) <= 0.17) return true;
            }
            return false;
        }
        case GlyphKind::cross: {
            const Point q = rotate(p, -a);
            return (std::abs(q.x) <= 0.2 && std::abs(q.y) <= 0.9) || (std::abs(q.y) <= 0.2 && std::abs(q.x) <= 0.9);
        }
    }
    return false;
}

/// Placement of a unit-circle shape in pixel space.
struct Placement {
    double cx;
    double cy;
    double radius;
    double angle;
};

/// Anti-aliased coverage of `inside` (unit coordinates, y up) at every pixel.
std::vector<double> coverage(std::size_t h, std::size_t w, std::size_t ss, const Placement& at,
                             const std::function<bool(Point)>& inside) {
    std::vector<double> cov(h * w, 0.0);
    const double inv = 1.0 / static_cast<double>(ss * ss);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            std::size_t hits = 0;
            for (std::size_t i = 0; i < ss; ++i) {
                for (std::size_t j = 0; j < ss; ++j) {
                    const double py = static_cast<double>(r) + (static_cast<double>(i) + 0.5) / static_cast<double>(ss);
                    const double px = static_cast<double>(c) + (static_cast<double>(j) + 0.5) / static_cast<double>(ss);
                    Point u{(px - at.cx) / at.radius, -(py - at.cy) / at.radius};
                    if (inside(rotate(u, -at.angle))) ++hits;
                }
            }
            cov[r * w + c] = static_cast<double>(hits) * inv;
        }
    }
    return cov;
}

Image to_channels(std::vector<double> gray, std::size_t h, std::size_t w, std::size_t channels) {
    Image img(h, w, channels);
    for (std::size_t i = 0; i < h * w; ++i) {
        const double v = std::clamp(gray[i], 0.0, 1.0);
        for (std::size_t ch = 0; ch < channels; ++ch) img.pixels[i * channels + ch] = v;
    }
    return img;
}

void check_range(double lo, double hi, const char* what) {
    if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) {
        throw std::invalid_argument(std::string(what) + " range must satisfy 0 <= min <= max <= 1");
    }
}

Image render_in(const SyntheticSpec& spec, const Glyph& glyph, Rng& rng) {
    const std::size_t h = spec.height;
    const std::size_t w = spec.width;
    const double base = spec.radius_fraction * static_cast<double>(std::min(h, w));
    Placement at{static_cast<double>(w) / 2.0 + rng.uniform(-spec.jitter_px, spec.jitter_px),
                 static_cast<double>(h) / 2.0 + rng.uniform(-spec.jitter_px, spec.jitter_px),
                 base * rng.uniform(spec.scale_min, spec.scale_max),
                 radians(rng.uniform(-spec.rotation_deg, spec.rotation_deg))};
    const double bg = rng.uniform(spec.background_min, spec.background_max);
    const double fg = rng.uniform(spec.foreground_min, spec.foreground_max);
    auto cov = coverage(h, w, spec.supersample, at, [&](Point p) { return inside_glyph(glyph, p); });
    for (auto& v : cov) v = bg + (fg - bg) * v + rng.uniform(-spec.noise, spec.noise);
    return to_channels(std::move(cov), h, w, spec.channels);
}

std::vector<double> render_texture(std::size_t h, std::size_t w, Rng& rng) {
    const std::size_t g = 3 + rng.below(6);
    std::vector<double> grid(g * g);
    for (auto& v : grid) v = rng.uniform();
    const double fine = rng.uniform(0.05, 0.2);
    std::vector<double> out(h * w);
    for (std::size_t r = 0; r < h; ++r) {
        const double gy = static_cast<double>(r) * static_cast<double>(g - 1) / static_cast<double>(h - 1 ? h - 1 : 1);
        const std::size_t y0 = std::min(static_cast<std::size_t>(gy), g - 2);
        const double fy = gy - static_cast<double>(y0);
        for (std::size_t c = 0; c < w; ++c) {
            const double gx = static_cast<double>(c) * static_cast<double>(g - 1) / static_cast<double>(w - 1 ? w - 1 : 1);
            const std::size_t x0 = std::min(static_cast<std::size_t>(gx), g - 2);
            const double fx = gx - static_cast<double>(x0);
            const double top = grid[y0 * g + x0] * (1 - fx) + grid[y0 * g + x0 + 1] * fx;
            const double bottom = grid[(y0 + 1) * g + x0] * (1 - fx) + grid[(y0 + 1) * g + x0 + 1] * fx;
            out[r * w + c] = top * (1 - fy) + bottom * fy + rng.uniform(-fine, fine);
        }
    }
    return out;
}

std::vector<double> render_alien(std::size_t h, std::size_t w, Rng& rng) {
    const double side = static_cast<double>(std::min(h, w));
    Placement at{static_cast<double>(w) / 2.0 + rng.uniform(-2.0, 2.0), static_cast<double>(h) / 2.0 + rng.uniform(-2.0, 2.0),
                 side * rng.uniform(0.28, 0.38), rng.uniform(0.0, 2.0 * kPi)};
    const double bg = rng.uniform(0.65, 0.9);
    const double fg = rng.uniform(0.05, 0.3);
    std::function<bool(Point)> inside;
    switch (rng.below(4)) {
        case 0: {  // five-pointed star
            inside = [](Point p) {
                const double r = std::hypot(p.x, p.y);
                const double a = std::atan2(p.y, p.x);
                const double sector = 2.0 * kPi / 5.0;
                const double t = std::abs(std::remainder(a, sector)) / (sector / 2.0);
                return r <= 0.95 - 0.55 * t;
            };
            break;
        }
        case 1: {  // crescent
            const double shift = rng.uniform(0.3, 0.5);
            inside = [shift](Point p) { return std::hypot(p.x, p.y) <= 0.9 && std::hypot(p.x - shift, p.y) > 0.7; };
            break;
        }
        case 2: {  // a few thick strokes
            struct Stroke {
                Point a, b;
            };
            std::vector<Stroke> strokes(2 + rng.below(2));
            for (auto& s : strokes) {
                const double t0 = rng.uniform(0.0, 2.0 * kPi);
                const double t1 = t0 + rng.uniform(0.6 * kPi, 1.4 * kPi);
                s = {{0.8 * std::cos(t0), 0.8 * std::sin(t0)}, {0.8 * std::cos(t1), 0.8 * std::sin(t1)}};
            }
            inside = [strokes](Point p) {
                for (const auto& s : strokes) {
                    const Point d{s.b.x - s.a.x, s.b.y - s.a.y};
                    const double t = std::clamp(((p.x - s.a.x) * d.x + (p.y - s.a.y) * d.y) / (d.x * d.x + d.y * d.y), 0.0, 1.0);
                    if (std::hypot(p.x - s.a.x - t * d.x, p.y - s.a.y - t * d.y) <= 0.14) return true;
                }
                return false;
            };
            break;
        }
        default: {  // checkerboard patch
            inside = [](Point p) {
                if (std::abs(p.x) > 0.7 || std::abs(p.y) > 0.7) return false;
                const int i = static_cast<int>(std::floor((p.x + 0.7) / 0.35));
                const int j = static_cast<int>(std::floor((p.y + 0.7) / 0.35));
                return (i + j) % 2 == 0;
            };
            break;
        }
    }
    auto cov = coverage(h, w, 4, at, inside);
    for (auto& v : cov) v = bg + (fg - bg) * v + rng.uniform(-0.01, 0.01);
    return cov;
}

}  // namespace

std::vector<Glyph> default_glyphs(std::size_t classes) {
    std::vector<Glyph> glyphs = {
        {GlyphKind::polygon, 3, 90.0},  {GlyphKind::polygon, 3, -90.0}, {GlyphKind::polygon, 4, 45.0},
        {GlyphKind::polygon, 4, 0.0},   {GlyphKind::disk, 0, 0.0},      {GlyphKind::ring, 0, 0.0},
        {GlyphKind::bars, 0, 0.0},      {GlyphKind::bars, 0, 90.0},     {GlyphKind::cross, 0, 0.0},
        {GlyphKind::cross, 0, 45.0},
    };
    for (int sides = 5; glyphs.size() < classes; ++sides) glyphs.push_back({GlyphKind::polygon, sides, 90.0});
    glyphs.resize(classes);
    return glyphs;
}

std::vector<Glyph> SyntheticSpec::resolved_glyphs() const { return glyphs.empty() ? default_glyphs(classes) : glyphs; }

void SyntheticSpec::validate() const {
    if (classes == 0) throw std::invalid_argument("synthetic spec needs at least one class");
    if (height < 8 || width < 8) throw std::invalid_argument("synthetic images must be at least 8x8");
    if (channels != 1 && channels != 3) throw std::invalid_argument("synthetic channels must be 1 or 3");
    if (!glyphs.empty() && glyphs.size() != classes) {
        throw std::invalid_argument("synthetic spec lists " + std::to_string(glyphs.size()) + " glyphs for " +
                                    std::to_string(classes) + " classes");
    }
    for (const auto& g : resolved_glyphs()) {
        if (g.kind == GlyphKind::polygon && g.sides < 3) throw std::invalid_argument("polygon glyph needs 3+ sides");
    }
    if (!(scale_min > 0.0 && scale_min <= scale_max)) throw std::invalid_argument("scale range must be 0 < min <= max");
    if (!(jitter_px >= 0.0 && rotation_deg >= 0.0 && noise >= 0.0 && radius_fraction > 0.0)) {
        throw std::invalid_argument("jitter, rotation, noise and radius must be non-negative");
    }
    check_range(background_min, background_max, "background");
    check_range(foreground_min, foreground_max, "foreground");
    if (supersample == 0) throw std::invalid_argument("supersample must be positive");
    const double half = static_cast<double>(std::min(height, width)) / 2.0 - 0.5;
    const double reach = jitter_px + scale_max * radius_fraction * static_cast<double>(std::min(height, width));
    if (reach > half) {
        throw std::invalid_argument("jitter " + std::to_string(jitter_px) + " px plus glyph radius " +
                                    std::to_string(reach - jitter_px) + " px exceeds the frame half-width " +
                                    std::to_string(half));
    }
}

Dataset synth_in_distribution(const SyntheticSpec& spec, std::uint64_t seed, std::size_t n, const std::string& name) {
    spec.validate();
    if (n < spec.classes) throw std::invalid_argument("need at least one sample per class");
    const auto glyphs = spec.resolved_glyphs();
    Dataset out;
    out.manifest = {name, n, spec.classes, spec.width, spec.height, spec.channels, seed, Provenance::synthetic_in, {}};
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, i));
        const int cls = static_cast<int>(i % spec.classes);
        out.samples[i] = {render_in(spec, glyphs[static_cast<std::size_t>(cls)], rng), cls, DistributionLabel::in, name};
    }
    return out;
}

std::string to_string(OodKind kind) {
    switch (kind) {
        case OodKind::texture_noise: return "texture-noise";
        case OodKind::alien_glyphs: return "alien-glyphs";
        case OodKind::blended: return "blended";
    }
    return "?";
}

OodKind ood_kind_from_string(const std::string& name) {
    for (auto k : {OodKind::texture_noise, OodKind::alien_glyphs, OodKind::blended}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown OOD kind '" + name + "' (texture-noise, alien-glyphs, blended)");
}

Dataset synth_ood(OodKind kind, std::uint64_t seed, std::size_t n, std::size_t height, std::size_t width,
                  std::size_t channels, const std::string& name) {
    if (height < 8 || width < 8) throw std::invalid_argument("OOD images must be at least 8x8");
    if (channels != 1 && channels != 3) throw std::invalid_argument("OOD channels must be 1 or 3");
    const std::string set_name = name.empty() ? to_string(kind) : name;
    Dataset out;
    out.manifest = {set_name, n, 0, width, height, channels, seed, Provenance::synthetic_ood, {}};
    out.samples.resize(n);
    const std::uint64_t stream = mix64(seed ^ (0x7a3d1f00ULL + static_cast<std::uint64_t>(kind)));
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(stream, i));
        std::vector<double> gray;
        switch (kind) {
            case OodKind::texture_noise: gray = render_texture(height, width, rng); break;
            case OodKind::alien_glyphs: gray = render_alien(height, width, rng); break;
            case OodKind::blended: {
                Rng a = rng.split(0);
                Rng b = rng.split(1);
                gray = render_texture(height, width, a);
                const auto alien = render_alien(height, width, b);
                for (std::size_t k = 0; k < gray.size(); ++k) gray[k] = 0.5 * gray[k] + 0.5 * alien[k];
                break;
            }
        }
        out.samples[i] = {to_channels(std::move(gray), height, width, channels), std::nullopt, DistributionLabel::out,
                          set_name};
    }
    return out;
}

}  // namespace nnwd
