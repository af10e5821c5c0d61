#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nnwd/dataset.hpp"

namespace nnwd {

enum class GlyphKind { polygon, disk, ring, bars, cross };

/// A class template drawn in unit coordinates; every glyph fits inside the
/// unit circle so rotation cannot push it past its bounding radius.
struct Glyph {
    GlyphKind kind = GlyphKind::disk;
    int sides = 0;           // polygon only
    double angle_deg = 0.0;  // orientation of the first vertex, bar normal or cross arm
};

/// The ten default templates, extended by polygons of 5, 6, ... sides when
/// more classes are requested.
std::vector<Glyph> default_glyphs(std::size_t classes);

struct SyntheticSpec {
    std::size_t classes = 10;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t channels = 1;
    std::vector<Glyph> glyphs;  // empty: default_glyphs(classes)

    double radius_fraction = 0.34;  // glyph radius relative to min(height, width)
    double scale_min = 0.92;
    double scale_max = 1.0;
    double jitter_px = 0.75;
    double rotation_deg = 6.0;
    double background_min = 0.15;
    double background_max = 0.25;
    double foreground_min = 0.80;
    double foreground_max = 0.90;
    double noise = 0.01;  // uniform per-pixel amplitude
    std::size_t supersample = 4;

    /// Throws std::invalid_argument for inconsistent ranges or when the worst
    /// case jitter and scale would let a glyph leave the frame.
    void validate() const;
    std::vector<Glyph> resolved_glyphs() const;
};

/// n samples, sample i has class i % K and draws from derive_seed(seed, i).
Dataset synth_in_distribution(const SyntheticSpec& spec, std::uint64_t seed, std::size_t n,
                              const std::string& name = "synthetic-in");

enum class OodKind { texture_noise, alien_glyphs, blended };

std::string to_string(OodKind kind);
OodKind ood_kind_from_string(const std::string& name);

Dataset synth_ood(OodKind kind, std::uint64_t seed, std::size_t n, std::size_t height, std::size_t width,
                  std::size_t channels = 1, const std::string& name = "");

}  // namespace nnwd
