#include "nnwd/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "nnwd/rng.hpp"

namespace nnwd {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(DistributionLabel label) { return label == DistributionLabel::in ? "IN" : "OUT"; }

std::string to_string(Provenance provenance) {
    switch (provenance) {
        case Provenance::synthetic_in: return "synthetic-in";
        case Provenance::synthetic_ood: return "synthetic-ood";
        case Provenance::imported: return "imported";
        case Provenance::generated_boundary: return "generated-boundary";
        case Provenance::mixed: return "mixed";
    }
    return "?";
}

Provenance provenance_from_string(const std::string& name) {
    for (auto p : {Provenance::synthetic_in, Provenance::synthetic_ood, Provenance::imported,
                   Provenance::generated_boundary, Provenance::mixed}) {
        if (to_string(p) == name) return p;
    }
    throw DatasetError("unknown provenance '" + name + "'");
}

void Dataset::validate() const {
    if (manifest.count != samples.size()) {
        throw DatasetError("manifest count " + std::to_string(manifest.count) + " but " +
                           std::to_string(samples.size()) + " samples");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.image.height != manifest.height || s.image.width != manifest.width ||
            s.image.channels != manifest.channels) {
            throw DatasetError("sample " + std::to_string(i) + " dims differ from manifest");
        }
        if (s.class_label && (*s.class_label < 0 || static_cast<std::size_t>(*s.class_label) >= manifest.classes)) {
            throw DatasetError("sample " + std::to_string(i) + " class label out of range");
        }
    }
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
    std::vector<const Image*> imgs;
    imgs.reserve(indices.size());
    for (auto i : indices) imgs.push_back(&samples.at(i).image);
    return images_to_batch(imgs);
}

Tensor Dataset::batch() const { return images_to_batch(images()); }

std::vector<const Image*> Dataset::images() const {
    std::vector<const Image*> imgs;
    imgs.reserve(samples.size());
    for (const auto& s : samples) imgs.push_back(&s.image);
    return imgs;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end, const std::string& name) const {
    if (begin > end || end > samples.size()) throw DatasetError("slice out of range");
    Dataset out{manifest, {samples.begin() + static_cast<std::ptrdiff_t>(begin),
                           samples.begin() + static_cast<std::ptrdiff_t>(end)}};
    out.manifest.name = name;
    out.manifest.count = out.samples.size();
    out.manifest.sources.clear();
    return out;
}

Dataset Dataset::filter(DistributionLabel label, const std::string& name) const {
    Dataset out{manifest, {}};
    for (const auto& s : samples) {
        if (s.distribution == label) out.samples.push_back(s);
    }
    out.manifest.name = name;
    out.manifest.count = out.samples.size();
    out.manifest.sources.clear();
    return out;
}

std::uint64_t dataset_hash(const Dataset& dataset) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    feed(dataset.samples.size());
    for (const auto& s : dataset.samples) {
        feed(s.class_label ? static_cast<std::uint64_t>(*s.class_label) : ~0ULL);
        feed(s.distribution == DistributionLabel::in ? 1 : 0);
        feed(s.image.height);
        feed(s.image.width);
        feed(s.image.channels);
        for (double v : s.image.pixels) feed(std::bit_cast<std::uint64_t>(v));
    }
    return h;
}

Dataset mix(const Dataset& in_set, const std::vector<Dataset>& ood_sets, std::uint64_t seed, const std::string& name) {
    Dataset out;
    out.manifest = in_set.manifest;
    out.manifest.name = name;
    out.manifest.seed = seed;
    out.manifest.provenance = Provenance::mixed;
    auto append = [&](const Dataset& d) {
        if (d.manifest.height != out.manifest.height || d.manifest.width != out.manifest.width ||
            d.manifest.channels != out.manifest.channels) {
            throw DatasetError("mix: dataset '" + d.manifest.name + "' dims differ from '" + in_set.manifest.name + "'");
        }
        for (auto s : d.samples) {
            s.origin = d.manifest.name;
            out.samples.push_back(std::move(s));
        }
        out.manifest.sources.emplace_back(d.manifest.name, d.samples.size());
    };
    append(in_set);
    for (const auto& d : ood_sets) append(d);

    Rng rng(seed);
    for (std::size_t i = out.samples.size(); i > 1; --i) {
        std::swap(out.samples[i - 1], out.samples[rng.below(i)]);
    }
    out.manifest.count = out.samples.size();
    return out;
}

namespace {

std::string sample_filename(std::size_t index, std::size_t channels) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.%s", index, channels == 1 ? "pgm" : "ppm");
    return buf;
}

json manifest_to_json(const DatasetManifest& m) {
    json j = {{"name", m.name},         {"count", m.count},       {"classes", m.classes},
              {"width", m.width},       {"height", m.height},     {"channels", m.channels},
              {"seed", m.seed},         {"provenance", to_string(m.provenance)}};
    if (!m.sources.empty()) {
        json sources = json::array();
        for (const auto& [source, count] : m.sources) sources.push_back({{"name", source}, {"count", count}});
        j["sources"] = sources;
    }
    return j;
}

DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.count = j.at("count").get<std::size_t>();
        m.classes = j.at("classes").get<std::size_t>();
        m.width = j.at("width").get<std::size_t>();
        m.height = j.at("height").get<std::size_t>();
        m.channels = j.at("channels").get<std::size_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.provenance = provenance_from_string(j.at("provenance").get<std::string>());
        if (j.contains("sources")) {
            for (const auto& s : j.at("sources")) {
                m.sources.emplace_back(s.at("name").get<std::string>(), s.at("count").get<std::size_t>());
            }
        }
    } catch (const json::exception& e) {
        throw DatasetError(std::string("malformed manifest.json: ") + e.what());
    }
    return m;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

}  // namespace

void save_dataset(const Dataset& dataset, const fs::path& dir) {
    dataset.validate();
    fs::create_directories(dir);
    std::ofstream labels(dir / "labels.csv", std::ios::binary | std::ios::trunc);
    if (!labels) throw DatasetError("cannot write " + (dir / "labels.csv").string());
    labels << "filename,class_label,distribution_label\n";
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const auto& s = dataset.samples[i];
        const std::string file = sample_filename(i, s.image.channels);
        write_netpbm(s.image, dir / file);
        labels << file << ',' << (s.class_label ? std::to_string(*s.class_label) : "NONE") << ','
               << to_string(s.distribution) << '\n';
    }
    std::ofstream manifest(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    manifest << manifest_to_json(dataset.manifest).dump(2) << '\n';
    if (!labels || !manifest) throw DatasetError("write failed in " + dir.string());
}

Dataset load_dataset(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream manifest_in(manifest_path);
    if (!manifest_in) throw DatasetError("missing manifest: " + manifest_path.string());
    json j;
    try {
        j = json::parse(manifest_in);
    } catch (const json::exception& e) {
        throw DatasetError("malformed manifest.json: " + std::string(e.what()));
    }
    Dataset dataset{manifest_from_json(j), {}};

    std::ifstream labels(dir / "labels.csv");
    if (!labels) throw DatasetError("missing labels.csv in " + dir.string());
    std::string line;
    std::getline(labels, line);
    if (!line.empty() && line != "filename,class_label,distribution_label") {
        throw DatasetError("labels.csv has an unexpected header: '" + line + "'");
    }
    std::size_t row = 1;
    while (std::getline(labels, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 3) throw DatasetError("labels.csv row " + std::to_string(row) + " needs 3 fields");
        const fs::path image_path = dir / fields[0];
        if (!fs::exists(image_path)) {
            throw DatasetError("labels.csv row " + std::to_string(row) + " references missing file " + fields[0]);
        }
        LabeledSample s;
        s.image = read_netpbm(image_path);
        if (fields[1] != "NONE") {
            try {
                s.class_label = std::stoi(fields[1]);
            } catch (const std::exception&) {
                throw DatasetError("labels.csv row " + std::to_string(row) + " has a bad class label");
            }
        }
        if (fields[2] == "IN") {
            s.distribution = DistributionLabel::in;
        } else if (fields[2] == "OUT") {
            s.distribution = DistributionLabel::out;
        } else {
            throw DatasetError("labels.csv row " + std::to_string(row) + " has a bad distribution label");
        }
        s.origin = dataset.manifest.name;
        dataset.samples.push_back(std::move(s));
    }
    dataset.validate();
    return dataset;
}

Dataset import_directory(const fs::path& dir, DistributionLabel label, std::optional<int> class_label,
                         bool grayscale) {
    if (!fs::is_directory(dir)) throw DatasetError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto ext = entry.path().extension().string();
        if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DatasetError("no .pgm/.ppm files in " + dir.string());

    Dataset dataset;
    dataset.manifest.name = dir.filename().string();
    dataset.manifest.provenance = Provenance::imported;
    for (const auto& f : files) {
        LabeledSample s;
        s.image = read_netpbm(f);
        if (grayscale) s.image = to_grayscale(s.image);
        if (!dataset.samples.empty() && !s.image.same_dims(dataset.samples.front().image)) {
            throw DatasetError("imported image " + f.filename().string() + " has different dimensions");
        }
        s.class_label = class_label;
        s.distribution = label;
        s.origin = dataset.manifest.name;
        dataset.samples.push_back(std::move(s));
    }
    const auto& first = dataset.samples.front().image;
    dataset.manifest.height = first.height;
    dataset.manifest.width = first.width;
    dataset.manifest.channels = first.channels;
    dataset.manifest.count = dataset.samples.size();
    dataset.manifest.classes = class_label ? static_cast<std::size_t>(*class_label + 1) : 0;
    return dataset;
}

}  // namespace nnwd
