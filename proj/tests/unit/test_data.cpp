#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "nnwd/augment.hpp"
#include "nnwd/dataset.hpp"
#include "nnwd/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace nnwd;

namespace {

double l2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

std::vector<double> mean_image(const std::vector<const Image*>& imgs) {
    std::vector<double> m(imgs.front()->size(), 0.0);
    for (const Image* img : imgs) {
        for (std::size_t i = 0; i < m.size(); ++i) m[i] += img->pixels[i];
    }
    for (auto& v : m) v /= static_cast<double>(imgs.size());
    return m;
}

bool in_unit_range(const Image& img) {
    return std::all_of(img.pixels.begin(), img.pixels.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

}  // namespace

TEST_CASE("in-distribution generator is deterministic") {
    const SyntheticSpec spec;
    const auto a = synth_in_distribution(spec, 7, 1000);
    const auto b = synth_in_distribution(spec, 7, 1000);
    REQUIRE(a.size() == 1000);
    CHECK(dataset_hash(a) == dataset_hash(b));
    bool identical = true;
    for (std::size_t i = 0; i < a.size(); ++i) identical = identical && a.samples[i].image == b.samples[i].image;
    CHECK(identical);
    CHECK(dataset_hash(synth_in_distribution(spec, 8, 1000)) != dataset_hash(a));
    for (const auto& s : a.samples) {
        CHECK(s.distribution == DistributionLabel::in);
        CHECK(in_unit_range(s.image));
    }
}

TEST_CASE("class balance") {
    const SyntheticSpec spec;
    const auto ten = synth_in_distribution(spec, 1, 10);
    std::map<int, int> counts;
    for (const auto& s : ten.samples) ++counts[*s.class_label];
    CHECK(counts.size() == 10);
    for (auto [_, c] : counts) CHECK(c == 1);

    counts.clear();
    for (const auto& s : synth_in_distribution(spec, 1, 997).samples) ++counts[*s.class_label];
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end(),
                                              [](auto& x, auto& y) { return x.second < y.second; });
    CHECK(hi->second - lo->second <= 1);
    CHECK_THROWS_AS(synth_in_distribution(spec, 1, 9), std::invalid_argument);
}

TEST_CASE("frame containment is enforced") {
    SyntheticSpec spec;
    spec.jitter_px = 6.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = SyntheticSpec{};
    spec.scale_max = 1.5;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = SyntheticSpec{};
    spec.glyphs.resize(3);
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    CHECK_NOTHROW(SyntheticSpec{}.validate());
}

TEST_CASE("class means are well separated") {
    // Between-class: mean pairwise distance of the class-mean images.
    // Within-class: distance between the means of two disjoint halves of a
    // class, i.e. how much a class mean moves under resampling.
    const auto data = synth_in_distribution(SyntheticSpec{}, 11, 1000);
    std::vector<std::vector<const Image*>> halves[2];
    halves[0].resize(10);
    halves[1].resize(10);
    std::vector<std::vector<const Image*>> all(10);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto c = static_cast<std::size_t>(*data.samples[i].class_label);
        all[c].push_back(&data.samples[i].image);
        halves[(i / 10) % 2][c].push_back(&data.samples[i].image);
    }
    std::vector<std::vector<double>> means;
    for (const auto& group : all) means.push_back(mean_image(group));
    double between = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a < 10; ++a) {
        for (std::size_t b = a + 1; b < 10; ++b) {
            between += l2(means[a], means[b]);
            ++pairs;
        }
    }
    between /= pairs;
    double within = 0.0;
    double spread = 0.0;
    for (std::size_t c = 0; c < 10; ++c) {
        within += l2(mean_image(halves[0][c]), mean_image(halves[1][c]));
        for (const Image* img : all[c]) spread += l2(img->pixels, means[c]);
    }
    within /= 10.0;
    spread /= static_cast<double>(data.size());
    MESSAGE("between " << between << " half-split within " << within << " sample spread " << spread);
    CHECK(between > 10.0 * within);
    CHECK(between > spread);
}

TEST_CASE("OOD generators") {
    for (auto kind : {OodKind::texture_noise, OodKind::alien_glyphs, OodKind::blended}) {
        const auto a = synth_ood(kind, 3, 50, 32, 32);
        const auto b = synth_ood(kind, 3, 50, 32, 32);
        CHECK(dataset_hash(a) == dataset_hash(b));
        CHECK(a.manifest.provenance == Provenance::synthetic_ood);
        for (const auto& s : a.samples) {
            CHECK(s.distribution == DistributionLabel::out);
            CHECK_FALSE(s.class_label.has_value());
            CHECK(in_unit_range(s.image));
        }
    }
    CHECK(ood_kind_from_string("alien-glyphs") == OodKind::alien_glyphs);
    CHECK_THROWS_AS(ood_kind_from_string("cifar"), std::invalid_argument);

    for (const auto& s : synth_ood(OodKind::texture_noise, 5, 200, 32, 32).samples) {
        const double mean = std::accumulate(s.image.pixels.begin(), s.image.pixels.end(), 0.0) / 1024.0;
        double var = 0.0;
        for (double v : s.image.pixels) var += (v - mean) * (v - mean);
        CHECK(var > 0.0);
    }
}

TEST_CASE("nearest centroid separates alien glyphs from in-distribution") {
    const auto in = synth_in_distribution(SyntheticSpec{}, 21, 1000);
    const auto out = synth_ood(OodKind::alien_glyphs, 22, 1000, 32, 32);
    // Fit centroids on the first half of each set, score the held-out half.
    std::vector<const Image*> fit_in, fit_out;
    for (std::size_t i = 0; i < 500; ++i) {
        fit_in.push_back(&in.samples[i].image);
        fit_out.push_back(&out.samples[i].image);
    }
    const auto c_in = mean_image(fit_in);
    const auto c_out = mean_image(fit_out);
    int correct = 0;
    for (std::size_t i = 500; i < 1000; ++i) {
        correct += l2(in.samples[i].image.pixels, c_in) < l2(in.samples[i].image.pixels, c_out);
        correct += l2(out.samples[i].image.pixels, c_out) < l2(out.samples[i].image.pixels, c_in);
    }
    const double accuracy = correct / 1000.0;
    MESSAGE("nearest-centroid accuracy " << accuracy);
    CHECK(accuracy > 0.9);
}

TEST_CASE("augmentation identities") {
    const auto data = synth_in_distribution(SyntheticSpec{}, 4, 20);
    Rng rng(9);
    AugmentationSpec off{{{AugmentKind::rotate, 0.0},
                          {AugmentKind::crop_resize, 1.0},
                          {AugmentKind::horizontal_flip, 0.0},
                          {AugmentKind::grayscale, 0.0}}};
    for (const auto& s : data.samples) {
        CHECK(augment(s.image, off, rng) == s.image);
        CHECK(flip_horizontal(flip_horizontal(s.image)) == s.image);
        CHECK(rotate_image(s.image, 0.0) == s.image);
        CHECK(grayscale_replicated(s.image) == s.image);
        CHECK(crop_resize(s.image, 0, 0, 32, 32) == s.image);
    }
    CHECK(flip_horizontal(data.samples[0].image) != data.samples[0].image);

    Image rgb(4, 5, 3);
    Rng fill(3);
    for (auto& v : rgb.pixels) v = fill.uniform();
    CHECK(flip_horizontal(flip_horizontal(rgb)) == rgb);
    const Image g = grayscale_replicated(rgb);
    CHECK(g.channels == 3);
    CHECK(g.at(1, 2, 0) == g.at(1, 2, 2));
}

TEST_CASE("rotation and crop geometry") {
    Image img(5, 5, 1, 0.0);
    img.at(2, 4) = 1.0;
    // A quarter turn about the center moves the right-middle pixel onto a
    // vertical neighbour of the center column.
    const Image r = rotate_image(img, 90.0);
    CHECK(r.at(2, 4) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.at(0, 2) + r.at(4, 2) == doctest::Approx(1.0).epsilon(1e-9));
    // Corners are padded with zeros after rotating a constant image.
    const Image bright(8, 8, 1, 0.8);
    const Image rb = rotate_image(bright, 45.0);
    CHECK(rb.at(0, 0) == 0.0);
    CHECK(rb.at(4, 4) == doctest::Approx(0.8));

    Image ramp(4, 4);
    for (std::size_t r0 = 0; r0 < 4; ++r0) {
        for (std::size_t c = 0; c < 4; ++c) ramp.at(r0, c) = 0.1 * static_cast<double>(c);
    }
    const Image cr = crop_resize(ramp, 0, 2, 4, 2);
    CHECK(cr.at(0, 0) == doctest::Approx(0.2));
    CHECK(cr.at(0, 3) == doctest::Approx(0.3));
    CHECK_THROWS_AS(crop_resize(ramp, 0, 3, 4, 2), std::invalid_argument);
}

TEST_CASE("augmented images stay in range and keep dims") {
    const auto data = synth_in_distribution(SyntheticSpec{}, 5, 200);
    AugmentationSpec heavy{{{AugmentKind::rotate, 45.0},
                            {AugmentKind::crop_resize, 0.5},
                            {AugmentKind::horizontal_flip, 0.5},
                            {AugmentKind::grayscale, 1.0}}};
    Rng rng(1);
    for (const auto& s : data.samples) {
        const Image a = augment(s.image, heavy, rng);
        CHECK(a.same_dims(s.image));
        CHECK(in_unit_range(a));
    }
    Rng r1(2), r2(2);
    CHECK(augment(data.samples[0].image, AugmentationSpec::standard(), r1) ==
          augment(data.samples[0].image, AugmentationSpec::standard(), r2));
    CHECK_THROWS_AS((AugmentationSpec{{{AugmentKind::horizontal_flip, 1.5}}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((AugmentationSpec{{{AugmentKind::crop_resize, 0.0}}}.validate()), std::invalid_argument);
    CHECK_NOTHROW(AugmentationSpec::standard().validate());
}

TEST_CASE("mix counts and determinism") {
    // Label-only stand-ins keep the large count check cheap.
    auto stub = [](std::size_t n, DistributionLabel label, const std::string& name) {
        Dataset d;
        d.manifest = {name, n, 10, 1, 1, 1, 0, Provenance::synthetic_in, {}};
        d.samples.resize(n, LabeledSample{Image(1, 1), std::nullopt, label, name});
        return d;
    };
    const auto big = mix(stub(12600, DistributionLabel::in, "in"),
                         {stub(10000, DistributionLabel::out, "a"), stub(10000, DistributionLabel::out, "b")}, 1);
    CHECK(big.size() == 32600);
    CHECK(big.manifest.count == 32600);

    const auto in = synth_in_distribution(SyntheticSpec{}, 1, 600);
    const auto ood_a = synth_ood(OodKind::texture_noise, 2, 600, 32, 32);
    const auto ood_b = synth_ood(OodKind::alien_glyphs, 3, 600, 32, 32);
    const auto m1 = mix(in, {ood_a, ood_b}, 99);
    const auto m2 = mix(in, {ood_a, ood_b}, 99);
    REQUIRE(m1.size() == 1800);
    std::size_t in_count = 0;
    std::map<std::string, std::size_t> per_source;
    for (const auto& s : m1.samples) {
        in_count += s.distribution == DistributionLabel::in;
        ++per_source[s.origin];
        CHECK(s.class_label.has_value() == (s.distribution == DistributionLabel::in));
    }
    CHECK(in_count * 3 == m1.size());
    CHECK(per_source["synthetic-in"] == 600);
    CHECK(per_source["texture-noise"] == 600);
    CHECK(per_source["alien-glyphs"] == 600);
    CHECK(m1.manifest.sources.size() == 3);
    CHECK(dataset_hash(m1) == dataset_hash(m2));
    CHECK(dataset_hash(m1) != dataset_hash(mix(in, {ood_a, ood_b}, 100)));
    CHECK(m1.manifest.provenance == Provenance::mixed);

    const auto small = synth_ood(OodKind::texture_noise, 2, 5, 16, 16);
    CHECK_THROWS_AS(mix(in, {small}, 1), DatasetError);
}

TEST_CASE("save and load round trip") {
    TempDir tmp;
    const auto in = synth_in_distribution(SyntheticSpec{}, 1, 30);
    const auto mixed = mix(in, {synth_ood(OodKind::blended, 2, 20, 32, 32)}, 5, "eval");
    save_dataset(mixed, tmp.path() / "eval");
    CHECK(std::filesystem::exists(tmp.path() / "eval" / "000000.pgm"));
    const auto back = load_dataset(tmp.path() / "eval");
    REQUIRE(back.size() == mixed.size());
    CHECK(back.manifest.name == "eval");
    CHECK(back.manifest.provenance == Provenance::mixed);
    CHECK(back.manifest.sources == mixed.manifest.sources);
    double worst = 0.0;
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back.samples[i].class_label == mixed.samples[i].class_label);
        CHECK(back.samples[i].distribution == mixed.samples[i].distribution);
        for (std::size_t k = 0; k < back.samples[i].image.size(); ++k) {
            worst = std::max(worst, std::abs(back.samples[i].image.pixels[k] - mixed.samples[i].image.pixels[k]));
        }
    }
    CHECK(worst <= 0.5 / 255.0 + 1e-12);

    std::ifstream labels(tmp.path() / "eval" / "labels.csv");
    std::string header;
    std::getline(labels, header);
    CHECK(header == "filename,class_label,distribution_label");
}

TEST_CASE("load errors are structured") {
    TempDir tmp;
    save_dataset(synth_in_distribution(SyntheticSpec{}, 1, 10), tmp.path() / "d");
    CHECK_THROWS_AS(load_dataset(tmp.path() / "missing"), DatasetError);

    std::ofstream(tmp.path() / "d" / "labels.csv", std::ios::trunc).close();
    CHECK_THROWS_WITH_AS(load_dataset(tmp.path() / "d"), doctest::Contains("count"), DatasetError);

    {
        std::ofstream out(tmp.path() / "d" / "labels.csv", std::ios::trunc);
        out << "filename,class_label,distribution_label\n999999.pgm,0,IN\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(tmp.path() / "d"), doctest::Contains("missing file"), DatasetError);
    std::filesystem::remove(tmp.path() / "d" / "manifest.json");
    CHECK_THROWS_WITH_AS(load_dataset(tmp.path() / "d"), doctest::Contains("manifest"), DatasetError);
}

TEST_CASE("import of a foreign directory") {
    TempDir tmp;
    Image gray(6, 7, 1, 0.5);
    Image color(6, 7, 3, 0.0);
    for (std::size_t i = 0; i < color.size(); i += 3) color.pixels[i] = 1.0;
    write_netpbm(gray, tmp.path() / "a.pgm");
    write_netpbm(color, tmp.path() / "b.ppm");
    std::ofstream(tmp.path() / "notes.txt") << "ignored";
    const auto d = import_directory(tmp.path(), DistributionLabel::out);
    REQUIRE(d.size() == 2);
    CHECK(d.manifest.provenance == Provenance::imported);
    CHECK(d.manifest.channels == 1);
    CHECK(d.samples[1].image.pixels[0] == doctest::Approx(0.299));
    CHECK_FALSE(d.samples[0].class_label.has_value());
    CHECK_NOTHROW(d.validate());

    TempDir empty;
    CHECK_THROWS_AS(import_directory(empty.path(), DistributionLabel::out), DatasetError);
}
