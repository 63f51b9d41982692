#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mars {

inline constexpr const char* kToolVersion = "0.1.0";

// Path relative to the manifest's directory plus the file's FNV-1a64 hash.
struct FileStamp {
    std::string path;
    std::uint64_t hash = 0;
};

// One manifest.json per artifact directory: what command produced it, from
// which inputs, under which configuration.
struct RunManifest {
    std::string command;
    std::string toolVersion = kToolVersion;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> config;  // sorted echo
    std::vector<FileStamp> inputs;
    std::vector<FileStamp> outputs;
};

void writeManifest(const RunManifest& m, const std::string& dir);
RunManifest readManifest(const std::string& dir);
bool manifestExists(const std::string& dir);

// Stamp for an existing file; path is recorded relative to baseDir.
FileStamp stampFile(const std::string& path, const std::string& baseDir);

// Re-hashes every output listed in dir's manifest. Throws naming the first
// missing or mismatching file.
void verifyManifestOutputs(const std::string& dir);

}  // namespace mars
