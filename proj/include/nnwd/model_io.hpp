#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnwd/network.hpp"

namespace nnwd {

/// Model file layout (all integers little-endian):
///   "NNWD" | u16 version | u32 text length | canonical text (UTF-8)
///   | u64 tensor count | per tensor: u8 rank, u32 dims[rank], f64 values
///   | u32 CRC-32 of every byte between the magic and the checksum.
/// The canonical text is NetworkSpec::to_text() followed by one
/// `@params seed=<u64> epochs=<u32>` line. Tensors are ordered by dense layer
/// index, weight before bias.
inline constexpr std::uint16_t kModelFormatVersion = 1;

class ModelFileError : public std::runtime_error {
public:
    enum class Kind { not_model_file, version_mismatch, checksum_mismatch, truncated, malformed, io };

    ModelFileError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct Model {
    NetworkSpec spec;
    ParameterSet params;
};

std::vector<std::uint8_t> encode_model(const NetworkSpec& spec, const ParameterSet& params);
Model decode_model(const std::vector<std::uint8_t>& bytes);

void save_params(const NetworkSpec& spec, const ParameterSet& params, const std::filesystem::path& path);
Model load_params(const std::filesystem::path& path);

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size);

}  // namespace nnwd
