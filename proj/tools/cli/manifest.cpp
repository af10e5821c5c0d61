#include "manifest.hpp"

#include <fstream>
#include <memory>
#include <stdexcept>

#include <json.hpp>
#include <openssl/evp.h>

namespace nnwd::cli {

namespace fs = std::filesystem;

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("SHA-256 init failed");
    }
    void update(const void* data, std::size_t n) {
        if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw std::runtime_error("SHA-256 update failed");
    }
    std::string hex() {
        unsigned char digest[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), digest, &len) != 1) throw std::runtime_error("SHA-256 final failed");
        static const char* digits = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out += digits[digest[i] >> 4];
            out += digits[digest[i] & 15];
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, void (*)(EVP_MD_CTX*)> ctx_;
};

}  // namespace

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
    Sha256 h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

std::string sha256_text(const std::string& text) {
    Sha256 h;
    h.update(text.data(), text.size());
    return h.hex();
}

fs::path RunManifest::file(const fs::path& out_dir) { return out_dir / "manifest.json"; }

RunManifest RunManifest::load(const fs::path& out_dir) {
    RunManifest m;
    std::ifstream in(file(out_dir));
    if (!in) return m;
    const auto j = nlohmann::json::parse(in);
    m.tool_version = j.value("tool_version", "");
    m.config_hash = j.value("config_hash", "");
    for (const auto& [path, a] : j.at("artifacts").items()) {
        m.artifacts[path] = {a.at("stage"), a.at("sha256"), a.at("bytes")};
    }
    for (const auto& [name, s] : j.at("stages").items()) m.stages[name] = {s.at("config_hash"), s.at("seconds")};
    return m;
}

void RunManifest::save(const fs::path& out_dir) const {
    nlohmann::json j;
    j["tool_version"] = tool_version;
    j["config_hash"] = config_hash;
    j["artifacts"] = nlohmann::json::object();
    for (const auto& [path, a] : artifacts) j["artifacts"][path] = {{"stage", a.stage}, {"sha256", a.sha256}, {"bytes", a.bytes}};
    j["stages"] = nlohmann::json::object();
    for (const auto& [name, s] : stages) j["stages"][name] = {{"config_hash", s.config_hash}, {"seconds", s.seconds}};
    const fs::path tmp = file(out_dir).string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << j.dump(2) << '\n';
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    }
    fs::rename(tmp, file(out_dir));
}

void RunManifest::record(const std::string& stage, const fs::path& out_dir, const std::vector<fs::path>& files,
                         const std::string& hash, double seconds) {
    std::erase_if(artifacts, [&](const auto& kv) { return kv.second.stage == stage; });
    for (const auto& f : files) {
        const fs::path full = out_dir / f;
        artifacts[f.generic_string()] = {stage, sha256_file(full), fs::file_size(full)};
    }
    stages[stage] = {hash, seconds};
    config_hash = hash;
}

std::vector<std::string> RunManifest::audit(const fs::path& out_dir) const {
    std::vector<std::string> problems;
    for (const auto& [path, a] : artifacts) {
        const fs::path full = out_dir / path;
        if (!fs::is_regular_file(full)) {
            problems.push_back(path + ": missing");
        } else if (fs::file_size(full) != a.bytes) {
            problems.push_back(path + ": size " + std::to_string(fs::file_size(full)) + " != " + std::to_string(a.bytes));
        } else if (sha256_file(full) != a.sha256) {
            problems.push_back(path + ": checksum mismatch");
        }
    }
    return problems;
}

}  // namespace nnwd::cli
