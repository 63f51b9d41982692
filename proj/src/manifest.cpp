#include "mars/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "mars/nn.hpp"

namespace mars {

namespace fs = std::filesystem;

namespace {

nlohmann::json stampsToJson(const std::vector<FileStamp>& stamps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : stamps) arr.push_back({{"path", s.path}, {"fnv1a64", s.hash}});
    return arr;
}

std::vector<FileStamp> stampsFromJson(const nlohmann::json& arr) {
    std::vector<FileStamp> out;
    for (const auto& e : arr)
        out.push_back({e.at("path").get<std::string>(), e.at("fnv1a64").get<std::uint64_t>()});
    return out;
}

}  // namespace

void writeManifest(const RunManifest& m, const std::string& dir) {
    nlohmann::json j;
    j["format"] = "mars-run-manifest";
    j["version"] = 1;
    j["command"] = m.command;
    j["tool_version"] = m.toolVersion;
    j["seed"] = m.seed;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [key, value] : m.config) cfg[key] = value;
    j["config"] = cfg;
    j["inputs"] = stampsToJson(m.inputs);
    j["outputs"] = stampsToJson(m.outputs);

    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw std::runtime_error("writeManifest: cannot open manifest.json in " + dir);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("writeManifest: write failed in " + dir);
}

RunManifest readManifest(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw std::runtime_error("readManifest: cannot open manifest.json in " + dir);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("readManifest: malformed manifest in " + dir + ": " + e.what());
    }
    if (j.value("format", "") != "mars-run-manifest" || j.value("version", 0) != 1)
        throw std::runtime_error("readManifest: not a run manifest: " + dir);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.toolVersion = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [key, value] : j.at("config").items())
        m.config.emplace_back(key, value.get<std::string>());
    m.inputs = stampsFromJson(j.at("inputs"));
    m.outputs = stampsFromJson(j.at("outputs"));
    return m;
}

bool manifestExists(const std::string& dir) { return fs::exists(fs::path(dir) / "manifest.json"); }

FileStamp stampFile(const std::string& path, const std::string& baseDir) {
    FileStamp s;
    s.hash = ad::fnv1a64File(path);
    const fs::path rel = fs::relative(fs::path(path), fs::path(baseDir));
    // Paths outside baseDir (inputs from elsewhere) are kept as given.
    s.path = (rel.empty() || rel.native().rfind("..", 0) == 0) ? fs::path(path).generic_string()
                                                               : rel.generic_string();
    return s;
}

void verifyManifestOutputs(const std::string& dir) {
    const RunManifest m = readManifest(dir);
    for (const auto& s : m.outputs) {
        const fs::path p = fs::path(dir) / s.path;
        if (!fs::exists(p))
            throw std::runtime_error("manifest check: missing output " + p.string());
        if (ad::fnv1a64File(p.string()) != s.hash)
            throw std::runtime_error("manifest check: hash mismatch on " + p.string());
    }
}

}  // namespace mars
