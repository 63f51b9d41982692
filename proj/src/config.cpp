#include "mars/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "mars/rng.hpp"

namespace mars {
namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

[[noreturn]] void badValue(const std::string& key, const std::string& value, const char* want) {
    throw ConfigError("config key '" + key + "': cannot read '" + value + "' as " + want);
}

}  // namespace

Config Config::parseText(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        const std::size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ConfigError(origin + ":" + std::to_string(lineNo) + ": malformed section '" +
                                  line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineNo) + ": empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineNo) + ": expected key = value, got '" +
                              line + "'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineNo) + ": empty key");
        if (section.empty())
            throw ConfigError(origin + ":" + std::to_string(lineNo) + ": key '" + key +
                              "' appears before any [section]");
        cfg.set(section + "." + key, trim(line.substr(eq + 1)));
    }
    return cfg;
}

Config Config::parseFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parseText(buf.str(), path);
}

void Config::set(const std::string& dottedKey, std::string value) {
    kv_[dottedKey] = std::move(value);
}

bool Config::has(const std::string& dottedKey) const { return kv_.count(dottedKey) != 0; }

std::string Config::getString(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

int Config::getInt(const std::string& key, int fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const int v = std::stoi(it->second, &pos);
        if (pos != it->second.size()) badValue(key, it->second, "an integer");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        badValue(key, it->second, "an integer");
    }
}

double Config::getDouble(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) badValue(key, it->second, "a number");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        badValue(key, it->second, "a number");
    }
}

bool Config::getBool(const std::string& key, bool fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    const std::string v = lower(it->second);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    badValue(key, it->second, "a boolean");
}

std::uint64_t Config::getU64(const std::string& key, std::uint64_t fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) badValue(key, it->second, "an unsigned integer");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        badValue(key, it->second, "an unsigned integer");
    }
}

std::vector<std::string> Config::getList(const std::string& key,
                                         const std::vector<std::string>& fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(it->second);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    if (out.empty()) badValue(key, it->second, "a comma-separated list");
    return out;
}

std::vector<std::pair<std::string, std::string>> Config::entries() const {
    return {kv_.begin(), kv_.end()};  // std::map iterates in key order
}

namespace {

const std::set<std::string>& knownKeys() {
    static const std::set<std::string> keys = {
        "run.seed",
        "corpus.domain",
        "corpus.sequences_per_class",
        "corpus.duration_min_sec",
        "corpus.duration_max_sec",
        "corpus.frame_rate",
        "corpus.accel_noise_std",
        "corpus.accel_bias_std",
        "corpus.orientation_noise_rad",
        "corpus.seed",
        "corpus.sensors",
        "signal.sensors",
        "signal.cutoff_hz",
        "signal.window",
        "signal.stride",
        "signal.root_relative",
        "signal.root_sensor",
        "signal.train_fraction",
        "signal.split_seed",
        "architecture.fusion",
        "training.max_epochs",
        "training.batch_size",
        "training.lr0",
        "training.lr_decay",
        "training.lr_decay_every",
        "training.beta1",
        "training.beta2",
        "training.beta3",
        "training.shuffle_seed",
        "training.model_seed",
        "training.convergence_threshold",
        "training.convergence_window",
        "training.stop_on_convergence",
        "training.eval_test_each_epoch",
        "transfer.head_seed",
        "ablation.sets",
        "eval.split",
    };
    return keys;
}

void requireRange(bool ok, const std::string& key, const char* what) {
    if (!ok) throw ConfigError("config key '" + key + "': " + what);
}

}  // namespace

RunSettings resolveSettings(const Config& cfg) {
    for (const auto& [key, value] : cfg.entries()) {
        (void)value;
        if (knownKeys().count(key) == 0) throw ConfigError("unknown config key '" + key + "'");
    }

    RunSettings s;
    s.masterSeed = cfg.getU64("run.seed", 1);

    const std::string domain = lower(cfg.getString("corpus.domain", "target"));
    if (domain == "target")
        s.corpus = defaultTargetSpec();
    else if (domain == "source")
        s.corpus = defaultSourceSpec();
    else
        throw ConfigError("config key 'corpus.domain': expected target or source, got '" + domain +
                          "'");
    s.corpus.sequencesPerClass =
        cfg.getInt("corpus.sequences_per_class", s.corpus.sequencesPerClass);
    s.corpus.durationMinSec = cfg.getDouble("corpus.duration_min_sec", s.corpus.durationMinSec);
    s.corpus.durationMaxSec = cfg.getDouble("corpus.duration_max_sec", s.corpus.durationMaxSec);
    s.corpus.frameRate = cfg.getDouble("corpus.frame_rate", s.corpus.frameRate);
    s.corpus.noise.accelNoiseStd =
        cfg.getDouble("corpus.accel_noise_std", s.corpus.noise.accelNoiseStd);
    s.corpus.noise.accelBiasStd =
        cfg.getDouble("corpus.accel_bias_std", s.corpus.noise.accelBiasStd);
    s.corpus.noise.orientationNoiseRad =
        cfg.getDouble("corpus.orientation_noise_rad", s.corpus.noise.orientationNoiseRad);
    s.corpus.seed = cfg.getU64("corpus.seed", mixSeed(s.masterSeed, 1));
    s.corpusSensors = cfg.getList(
        "corpus.sensors", {"head", "l_wrist", "r_knee", "spine", "l_knee", "r_wrist"});

    requireRange(s.corpus.sequencesPerClass >= 1, "corpus.sequences_per_class", "must be >= 1");
    requireRange(s.corpus.durationMinSec > 0.0, "corpus.duration_min_sec", "must be positive");
    requireRange(s.corpus.durationMaxSec >= s.corpus.durationMinSec, "corpus.duration_max_sec",
                 "must be >= duration_min_sec");
    requireRange(s.corpus.frameRate > 0.0, "corpus.frame_rate", "must be positive");
    requireRange(s.corpus.noise.accelNoiseStd >= 0.0, "corpus.accel_noise_std",
                 "must be non-negative");
    requireRange(s.corpus.noise.accelBiasStd >= 0.0, "corpus.accel_bias_std",
                 "must be non-negative");
    requireRange(s.corpus.noise.orientationNoiseRad >= 0.0, "corpus.orientation_noise_rad",
                 "must be non-negative");

    s.signal.sensors = cfg.getList("signal.sensors", s.signal.sensors);
    s.signal.cutoffHz = cfg.getDouble("signal.cutoff_hz", s.signal.cutoffHz);
    s.signal.window = cfg.getInt("signal.window", s.signal.window);
    s.signal.stride = cfg.getInt("signal.stride", s.signal.stride);
    s.signal.rootRelative = cfg.getBool("signal.root_relative", s.signal.rootRelative);
    s.signal.rootSensor = cfg.getString("signal.root_sensor", s.signal.rootSensor);
    s.signal.trainFraction = cfg.getDouble("signal.train_fraction", s.signal.trainFraction);
    s.signal.splitSeed = cfg.getU64("signal.split_seed", mixSeed(s.masterSeed, 2));
    requireRange(s.signal.cutoffHz > 0.0, "signal.cutoff_hz", "must be positive");
    requireRange(s.signal.window >= 3, "signal.window", "must be >= 3");
    requireRange(s.signal.stride >= 1, "signal.stride", "must be >= 1");
    requireRange(s.signal.trainFraction > 0.0 && s.signal.trainFraction < 1.0,
                 "signal.train_fraction", "must lie in (0, 1)");

    const std::string fusion = lower(cfg.getString("architecture.fusion", "v3"));
    if (fusion == "v1")
        s.fusion = FusionVariant::v1;
    else if (fusion == "v2")
        s.fusion = FusionVariant::v2;
    else if (fusion == "v3")
        s.fusion = FusionVariant::v3;
    else
        throw ConfigError("config key 'architecture.fusion': expected v1, v2 or v3, got '" +
                          fusion + "'");

    s.training.maxEpochs = cfg.getInt("training.max_epochs", s.training.maxEpochs);
    s.training.batchSize = cfg.getInt("training.batch_size", s.training.batchSize);
    s.training.lr0 = cfg.getDouble("training.lr0", s.training.lr0);
    s.training.lrDecay = cfg.getDouble("training.lr_decay", s.training.lrDecay);
    s.training.lrDecayEvery = cfg.getInt("training.lr_decay_every", s.training.lrDecayEvery);
    s.training.loss.beta1 = cfg.getDouble("training.beta1", s.training.loss.beta1);
    s.training.loss.beta2 = cfg.getDouble("training.beta2", s.training.loss.beta2);
    s.training.loss.beta3 = cfg.getDouble("training.beta3", s.training.loss.beta3);
    s.training.shuffleSeed = cfg.getU64("training.shuffle_seed", mixSeed(s.masterSeed, 3));
    s.training.convergenceThreshold =
        cfg.getDouble("training.convergence_threshold", s.training.convergenceThreshold);
    s.training.convergenceWindow =
        cfg.getInt("training.convergence_window", s.training.convergenceWindow);
    s.training.stopOnConvergence =
        cfg.getBool("training.stop_on_convergence", s.training.stopOnConvergence);
    s.training.evaluateTestEachEpoch =
        cfg.getBool("training.eval_test_each_epoch", s.training.evaluateTestEachEpoch);
    try {
        s.training.validate();
        s.training.loss.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("[training] ") + e.what());
    }

    s.modelSeed = cfg.getU64("training.model_seed", mixSeed(s.masterSeed, 4));
    s.headSeed = cfg.getU64("transfer.head_seed", mixSeed(s.masterSeed, 5));

    s.ablationSets = cfg.getList("ablation.sets", {"3", "4", "5-knee", "5-wrist", "6"});

    s.evalSplit = lower(cfg.getString("eval.split", "test"));
    if (s.evalSplit != "train" && s.evalSplit != "test")
        throw ConfigError("config key 'eval.split': expected train or test, got '" + s.evalSplit +
                          "'");

    return s;
}

}  // namespace mars
