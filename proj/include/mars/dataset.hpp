#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mars/motion.hpp"
#include "mars/signal.hpp"

namespace mars {

// Standardized training windows. Values are stored as float32, the same
// precision as the on-disk format, so a dataset survives a save/load round
// trip bit for bit; the network widens to double at its input.
struct WindowedDataset {
    int channels = 0;
    int window = 0;
    int classCount = 0;
    std::vector<std::int32_t> labels;
    std::vector<float> values;  // [sample][channel][time]

    // Provenance kept in memory only (not serialized).
    std::vector<std::int32_t> sourceSequence;
    std::vector<std::int32_t> startFrame;

    int sampleCount() const { return static_cast<int>(labels.size()); }
    const float* sample(int i) const {
        return values.data() + std::size_t(i) * channels * window;
    }
    void validate() const;
};

// Binary container: magic "MARSWIN1", then sampleCount, channels, window,
// classCount as little-endian uint32, then per sample a uint32 label followed
// by channels*window little-endian float32 values in channel-major order.
void saveDataset(const WindowedDataset& ds, const std::string& path);
WindowedDataset loadDataset(const std::string& path);

struct SigprocOptions {
    std::vector<std::string> sensors = {"head", "l_wrist", "r_knee"};
    double cutoffHz = 10.0;
    int window = 60;
    int stride = 30;
    bool rootRelative = true;
    std::string rootSensor = "head";
    double trainFraction = 0.8;
    std::uint64_t splitSeed = 7;
};

struct DatasetPair {
    WindowedDataset train;
    WindowedDataset test;
    ChannelLayout layout;
    ChannelStats stats;  // computed on the training split only
};

// Raw corpus to model-ready tensors: select the layout's sensors, normalize
// to the root sensor's frame, low-pass, window, split train/test stratified
// by sequence, then standardize both splits with training statistics.
DatasetPair prepareDatasets(const RawCorpus& corpus, const SigprocOptions& options);

// The sensor subsets exercised by the sensor-count ablation, keyed by name:
// base3, base3+spine, base3+spine+l_knee, base3+spine+r_wrist, all6.
struct SensorSet {
    std::string name;
    std::vector<std::string> sensors;
};
std::vector<SensorSet> standardSensorSets();

}  // namespace mars
