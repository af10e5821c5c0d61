#include "nnwd/model_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace nnwd {

namespace {

constexpr char kMagic[4] = {'N', 'N', 'W', 'D'};
constexpr std::string_view kMetaPrefix = "@params ";

class Writer {
public:
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void raw(std::string_view s) { bytes.insert(bytes.end(), s.begin(), s.end()); }

    std::vector<std::uint8_t> bytes;

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& bytes, std::size_t begin, std::size_t end)
        : bytes_(bytes), pos_(begin), end_(end) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(get(8)); }

    std::string text(std::size_t n) {
        need(n);
        std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }

    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (end_ - pos_ < n) {
            throw ModelFileError(ModelFileError::Kind::truncated,
                                 "model file truncated at byte " + std::to_string(pos_));
        }
    }

    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_;
    std::size_t end_;
};

void write_tensor(Writer& w, const Tensor& t) {
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.values()) w.f64(v);
}

Tensor read_tensor(Reader& r) {
    const std::uint8_t rank = r.u8();
    if (rank == 0) throw ModelFileError(ModelFileError::Kind::malformed, "tensor of rank 0");
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
        d = r.u32();
        if (d == 0) throw ModelFileError(ModelFileError::Kind::malformed, "tensor with a zero dimension");
        count *= d;
        if (count > (1ULL << 32)) throw ModelFileError(ModelFileError::Kind::malformed, "tensor too large");
    }
    Buffer values(count);
    for (auto& v : values) v = r.f64();
    return Tensor(std::move(shape), std::move(values));
}

}  // namespace

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
    uLong crc = crc32(0L, Z_NULL, 0);
    while (size > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_model(const NetworkSpec& spec, const ParameterSet& params) {
    check_params(spec, params);
    const std::string text = spec.to_text() + std::string(kMetaPrefix) + "seed=" + std::to_string(params.seed) +
                             " epochs=" + std::to_string(params.epochs) + "\n";
    Writer w;
    w.raw(std::string_view(kMagic, 4));
    w.u16(kModelFormatVersion);
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.raw(text);
    w.u64(2 * params.dense.size());
    for (const auto& [_, p] : params.dense) {
        write_tensor(w, p.weight);
        write_tensor(w, p.bias);
    }
    w.u32(crc32_of(w.bytes.data() + 4, w.bytes.size() - 4));
    return std::move(w.bytes);
}

Model decode_model(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw ModelFileError(ModelFileError::Kind::not_model_file, "not a model file (bad magic bytes)");
    }
    if (bytes.size() < 4 + 2 + 4) throw ModelFileError(ModelFileError::Kind::truncated, "model file truncated in header");
    // The checksum occupies the last four bytes; parse everything before it.
    Reader r(bytes, 4, bytes.size() - 4);
    const std::uint16_t version = r.u16();
    if (version != kModelFormatVersion) {
        throw ModelFileError(ModelFileError::Kind::version_mismatch,
                             "model format version " + std::to_string(version) + ", expected " +
                                 std::to_string(kModelFormatVersion));
    }

    std::vector<Tensor> tensors;
    std::string text;
    try {
        text = r.text(r.u32());
        const std::uint64_t count = r.u64();
        if (count > (1u << 20)) throw ModelFileError(ModelFileError::Kind::malformed, "implausible tensor count");
        for (std::uint64_t i = 0; i < count; ++i) tensors.push_back(read_tensor(r));
    } catch (const ModelFileError& e) {
        // A damaged length field reads as truncation; report the checksum when it disagrees.
        Reader tail(bytes, bytes.size() - 4, bytes.size());
        if (e.kind() == ModelFileError::Kind::truncated &&
            tail.u32() != crc32_of(bytes.data() + 4, bytes.size() - 8)) {
            throw ModelFileError(ModelFileError::Kind::truncated,
                                 std::string(e.what()) + " (checksum also does not match)");
        }
        throw;
    }
    if (r.position() != bytes.size() - 4) {
        throw ModelFileError(ModelFileError::Kind::malformed, "trailing bytes after tensors");
    }
    Reader tail(bytes, bytes.size() - 4, bytes.size());
    const std::uint32_t stored = tail.u32();
    if (stored != crc32_of(bytes.data() + 4, bytes.size() - 8)) {
        throw ModelFileError(ModelFileError::Kind::checksum_mismatch, "model file checksum mismatch");
    }

    const auto meta_at = text.rfind(kMetaPrefix);
    if (meta_at == std::string::npos) throw ModelFileError(ModelFileError::Kind::malformed, "missing @params line");
    Model model;
    try {
        model.spec = NetworkSpec::from_text(text.substr(0, meta_at));
    } catch (const std::exception& e) {
        throw ModelFileError(ModelFileError::Kind::malformed, std::string("bad network text: ") + e.what());
    }
    std::istringstream meta(text.substr(meta_at + kMetaPrefix.size()));
    std::string seed_field, epochs_field;
    meta >> seed_field >> epochs_field;
    if (seed_field.rfind("seed=", 0) != 0 || epochs_field.rfind("epochs=", 0) != 0) {
        throw ModelFileError(ModelFileError::Kind::malformed, "malformed @params line");
    }
    model.params.seed = std::stoull(seed_field.substr(5));
    model.params.epochs = static_cast<std::uint32_t>(std::stoul(epochs_field.substr(7)));

    std::size_t next = 0;
    for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
        if (!std::holds_alternative<DenseLayer>(model.spec.layers[i])) continue;
        if (next + 2 > tensors.size()) throw ModelFileError(ModelFileError::Kind::malformed, "too few tensors");
        model.params.dense.emplace(i, DenseParams{std::move(tensors[next]), std::move(tensors[next + 1])});
        next += 2;
    }
    if (next != tensors.size()) throw ModelFileError(ModelFileError::Kind::malformed, "too many tensors");
    try {
        check_params(model.spec, model.params);
    } catch (const ShapeError& e) {
        throw ModelFileError(ModelFileError::Kind::malformed, e.what());
    }
    return model;
}

void save_params(const NetworkSpec& spec, const ParameterSet& params, const std::filesystem::path& path) {
    const auto bytes = encode_model(spec, params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelFileError(ModelFileError::Kind::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ModelFileError(ModelFileError::Kind::io, "write failed for " + path.string());
}

Model load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFileError(ModelFileError::Kind::io, "cannot read " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_model(bytes);
}

}  // namespace nnwd
