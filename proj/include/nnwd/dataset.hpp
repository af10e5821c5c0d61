#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nnwd/image.hpp"
#include "nnwd/tensor.hpp"

namespace nnwd {

enum class DistributionLabel { in, out };

std::string to_string(DistributionLabel label);

struct LabeledSample {
    Image image;
    std::optional<int> class_label;  // nullopt for out-of-distribution data
    DistributionLabel distribution = DistributionLabel::in;
    std::string origin;  // name of the dataset the sample came from (in memory only)
};

enum class Provenance { synthetic_in, synthetic_ood, imported, generated_boundary, mixed };

std::string to_string(Provenance provenance);
Provenance provenance_from_string(const std::string& name);

struct DatasetManifest {
    std::string name;
    std::size_t count = 0;
    std::size_t classes = 0;
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;
    std::uint64_t seed = 0;
    Provenance provenance = Provenance::synthetic_in;
    std::vector<std::pair<std::string, std::size_t>> sources;  // filled by mix()
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<LabeledSample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    /// Throws DatasetError when counts or dims disagree with the manifest.
    void validate() const;

    /// Flattened [n, h*w*c] batch of the given sample indices.
    Tensor batch(std::span<const std::size_t> indices) const;
    Tensor batch() const;

    std::vector<const Image*> images() const;

    /// Samples [begin, end) as a new dataset with the same manifest fields.
    Dataset slice(std::size_t begin, std::size_t end, const std::string& name) const;
    Dataset filter(DistributionLabel label, const std::string& name) const;
};

/// FNV-1a over labels and pixel bit patterns; identifies evaluation sets.
std::uint64_t dataset_hash(const Dataset& dataset);

/// Concatenates then shuffles with `seed`. Dual labels are preserved and the
/// manifest records per-source counts.
Dataset mix(const Dataset& in_set, const std::vector<Dataset>& ood_sets, std::uint64_t seed,
            const std::string& name = "mixed");

/// Writes NNNNNN.pgm/.ppm images, labels.csv and manifest.json into `dir`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Reads a directory written by save_dataset. Throws DatasetError on a missing
/// manifest, a label row pointing at a missing file, or count mismatches.
Dataset load_dataset(const std::filesystem::path& dir);

/// Reads every .pgm/.ppm file of a foreign directory (sorted by name) as an
/// imported dataset. Color images are converted to luma when `grayscale`.
Dataset import_directory(const std::filesystem::path& dir, DistributionLabel label,
                         std::optional<int> class_label = std::nullopt, bool grayscale = true);

}  // namespace nnwd
