#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mscr::manifest {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/** @brief Record of one CLI run, written next to its artifacts. */
struct RunManifest {
    std::string command;
    std::string version;
    std::string config_file;
    std::string config_sha256;     // input file bytes
    std::string effective_sha256;  // document after overrides
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    std::string isa;
    std::string started_utc;
    double wall_clock_s = 0.0;
    std::vector<std::string> files;  // relative to the output directory
};

/// Writes manifest.json through a temporary file and rename.
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);

RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace mscr::manifest
