#include "mscr/manifest.hpp"

#include "mscr/common.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

namespace mscr::manifest {

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::string hex;
    hex.reserve(2 * len);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
    nlohmann::json j = {
        {"command", m.command},
        {"version", m.version},
        {"config_file", m.config_file},
        {"config_sha256", m.config_sha256},
        {"effective_config_sha256", m.effective_sha256},
        {"overrides", m.overrides},
        {"seed", m.seed},
        {"isa", m.isa},
        {"started_utc", m.started_utc},
        {"wall_clock_s", m.wall_clock_s},
        {"files", m.files},
    };
    auto final_path = dir / "manifest.json";
    auto tmp = dir / "manifest.json.tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << j.dump(2) << '\n';
        if (!out.flush()) throw Error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, final_path);
}

RunManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    auto j = nlohmann::json::parse(in);
    RunManifest m;
    m.command = j.value("command", "");
    m.version = j.value("version", "");
    m.config_file = j.value("config_file", "");
    m.config_sha256 = j.value("config_sha256", "");
    m.effective_sha256 = j.value("effective_config_sha256", "");
    m.overrides = j.value("overrides", std::vector<std::string>{});
    m.seed = j.value("seed", std::uint64_t{0});
    m.isa = j.value("isa", "");
    m.started_utc = j.value("started_utc", "");
    m.wall_clock_s = j.value("wall_clock_s", 0.0);
    m.files = j.value("files", std::vector<std::string>{});
    return m;
}

}  // namespace mscr::manifest
