#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mars/dataset.hpp"
#include "mars/motion.hpp"
#include "mars/network.hpp"
#include "mars/trainer.hpp"

namespace mars {

// Unparseable file, unknown key, or out-of-domain value. The message always
// names the offending key (or file:line for syntax errors).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// INI-style run configuration: "[section]" headers, "key = value" lines,
// '#'/';' comments. Keys are stored flattened as "section.key"; a later
// assignment to the same key wins.
class Config {
public:
    static Config parseFile(const std::string& path);
    static Config parseText(const std::string& text, const std::string& origin = "<text>");

    void set(const std::string& dottedKey, std::string value);
    bool has(const std::string& dottedKey) const;

    std::string getString(const std::string& key, const std::string& fallback) const;
    int getInt(const std::string& key, int fallback) const;
    double getDouble(const std::string& key, double fallback) const;
    bool getBool(const std::string& key, bool fallback) const;
    std::uint64_t getU64(const std::string& key, std::uint64_t fallback) const;
    // Comma-separated, surrounding whitespace per item trimmed.
    std::vector<std::string> getList(const std::string& key,
                                     const std::vector<std::string>& fallback) const;

    // Sorted key/value pairs, used for the manifest's config echo.
    std::vector<std::pair<std::string, std::string>> entries() const;

private:
    std::map<std::string, std::string> kv_;
};

// Every setting a command can need, fully resolved. Unset seeds derive from
// the master seed, so one "run.seed" pins the whole run while any stage seed
// can still be overridden individually.
struct RunSettings {
    std::uint64_t masterSeed = 1;
    CorpusSpec corpus;
    std::vector<std::string> corpusSensors;  // streams recorded at synthesis
    SigprocOptions signal;
    FusionVariant fusion = FusionVariant::v3;
    TrainConfig training;
    std::uint64_t modelSeed = 0;
    std::uint64_t headSeed = 0;  // fresh fusion stage when fine-tuning
    std::vector<std::string> ablationSets;
    std::string evalSplit = "test";
};

// Defaults overlaid with the parsed config. Rejects keys outside the known
// schema and values outside their domain, naming the key either way.
RunSettings resolveSettings(const Config& cfg);

}  // namespace mars
