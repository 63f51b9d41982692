#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mars/dataset.hpp"
#include "mars/trainer.hpp"

namespace mars {

struct AblationRun {
    std::string setName;
    std::vector<std::string> sensors;
    int channels = 0;
    RunReport report;
};

// Accepts the shorthand tokens "3", "4", "5-knee", "5-wrist", "6" as well as
// the canonical set names from standardSensorSets(). Unknown tokens are
// rejected.
std::vector<SensorSet> resolveSensorSets(const std::vector<std::string>& tokens);

// Sensor-count sweep: windows are re-cut from the same corpus per subset
// (channel count 12 per sensor), and a fresh network is trained per subset
// from the same model seed. Sample counts agree across subsets because
// windowing depends only on time. onRun fires after each completed run.
std::vector<AblationRun> ablateSensors(
    const RawCorpus& corpus, const std::vector<SensorSet>& sets, const SigprocOptions& base,
    FusionVariant variant, const TrainConfig& training, std::uint64_t modelSeed,
    const std::function<void(const AblationRun&)>& onRun = {});

}  // namespace mars
