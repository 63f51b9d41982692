#include "mars/ablation.hpp"

#include <stdexcept>

namespace mars {

std::vector<SensorSet> resolveSensorSets(const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw std::invalid_argument("resolveSensorSets: no sensor sets named");
    const std::vector<SensorSet> all = standardSensorSets();
    auto lookup = [&all](const std::string& token) -> const SensorSet& {
        std::string name = token;
        if (token == "3") name = "base3";
        else if (token == "4") name = "base4";
        else if (token == "5-knee") name = "base5_knee";
        else if (token == "5-wrist") name = "base5_wrist";
        else if (token == "6") name = "all6";
        for (const auto& s : all)
            if (s.name == name) return s;
        throw std::invalid_argument("unknown sensor set '" + token + "'");
    };
    std::vector<SensorSet> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(lookup(t));
    return out;
}

std::vector<AblationRun> ablateSensors(
    const RawCorpus& corpus, const std::vector<SensorSet>& sets, const SigprocOptions& base,
    FusionVariant variant, const TrainConfig& training, std::uint64_t modelSeed,
    const std::function<void(const AblationRun&)>& onRun) {
    if (sets.empty()) throw std::invalid_argument("ablateSensors: no sensor sets");
    for (const auto& set : sets)
        for (const auto& name : set.sensors) {
            bool found = false;
            for (const auto& have : corpus.sensorNames) found = found || have == name;
            if (!found)
                throw std::invalid_argument("ablateSensors: corpus lacks sensor '" + name + "'");
        }

    std::vector<AblationRun> runs;
    runs.reserve(sets.size());
    for (const auto& set : sets) {
        SigprocOptions opt = base;
        opt.sensors = set.sensors;
        const DatasetPair pair = prepareDatasets(corpus, opt);

        AblationRun run;
        run.setName = set.name;
        run.sensors = set.sensors;
        run.channels = pair.train.channels;

        const auto spec =
            ArchitectureSpec::standard(pair.train.channels, opt.window, pair.train.classCount);
        MarsNet net(spec, variant, modelSeed);
        run.report = train(net, pair.train, pair.test, training);
        if (onRun) onRun(run);
        runs.push_back(std::move(run));
    }
    return runs;
}

}  // namespace mars
