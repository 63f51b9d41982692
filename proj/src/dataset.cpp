#include "mars/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "mars/rng.hpp"

namespace mars {
namespace {

constexpr char kMagic[8] = {'M', 'A', 'R', 'S', 'W', 'I', 'N', '1'};

void writeU32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t readU32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

void writeF32(std::ofstream& out, const float* data, std::size_t count) {
    static_assert(sizeof(float) == 4);
    // x86 is little endian; write verbatim.
    out.write(reinterpret_cast<const char*>(data), count * 4);
}

}  // namespace

void WindowedDataset::validate() const {
    if (channels <= 0 || window <= 0 || classCount <= 0)
        throw std::invalid_argument("WindowedDataset: non-positive dimensions");
    if (values.size() != std::size_t(sampleCount()) * channels * window)
        throw std::invalid_argument("WindowedDataset: value buffer size mismatch");
    for (const auto l : labels)
        if (l < 0 || l >= classCount)
            throw std::invalid_argument("WindowedDataset: label out of range");
}

void saveDataset(const WindowedDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("saveDataset: cannot open " + path);
    out.write(kMagic, 8);
    writeU32(out, static_cast<std::uint32_t>(ds.sampleCount()));
    writeU32(out, static_cast<std::uint32_t>(ds.channels));
    writeU32(out, static_cast<std::uint32_t>(ds.window));
    writeU32(out, static_cast<std::uint32_t>(ds.classCount));
    const std::size_t per = std::size_t(ds.channels) * ds.window;
    for (int i = 0; i < ds.sampleCount(); ++i) {
        writeU32(out, static_cast<std::uint32_t>(ds.labels[i]));
        writeF32(out, ds.values.data() + std::size_t(i) * per, per);
    }
    if (!out) throw std::runtime_error("saveDataset: write failed for " + path);
}

WindowedDataset loadDataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("loadDataset: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("loadDataset: bad magic in " + path);

    WindowedDataset ds;
    const std::uint32_t samples = readU32(in);
    ds.channels = static_cast<int>(readU32(in));
    ds.window = static_cast<int>(readU32(in));
    ds.classCount = static_cast<int>(readU32(in));
    if (!in) throw std::runtime_error("loadDataset: truncated header in " + path);
    if (ds.channels <= 0 || ds.window <= 0 || ds.classCount <= 0 ||
        std::size_t(ds.channels) * ds.window > (1u << 24))
        throw std::runtime_error("loadDataset: implausible header in " + path);

    const std::size_t per = std::size_t(ds.channels) * ds.window;
    ds.labels.resize(samples);
    ds.values.resize(per * samples);
    for (std::uint32_t i = 0; i < samples; ++i) {
        ds.labels[i] = static_cast<std::int32_t>(readU32(in));
        in.read(reinterpret_cast<char*>(ds.values.data() + std::size_t(i) * per),
                static_cast<std::streamsize>(per * 4));
    }
    if (!in) throw std::runtime_error("loadDataset: truncated payload in " + path);
    ds.validate();
    return ds;
}

DatasetPair prepareDatasets(const RawCorpus& corpus, const SigprocOptions& options) {
    if (corpus.sequences.empty()) throw std::invalid_argument("prepareDatasets: empty corpus");
    if (options.trainFraction <= 0.0 || options.trainFraction >= 1.0)
        throw std::invalid_argument("prepareDatasets: trainFraction outside (0, 1)");

    ChannelLayout layout;
    layout.sensors = options.sensors;
    layout.validate();

    std::vector<int> streamOf;  // layout sensor -> corpus stream index
    for (const auto& name : layout.sensors) {
        int idx = -1;
        for (std::size_t i = 0; i < corpus.sensorNames.size(); ++i)
            if (corpus.sensorNames[i] == name) idx = static_cast<int>(i);
        if (idx < 0)
            throw std::invalid_argument("prepareDatasets: corpus has no sensor '" + name + "'");
        streamOf.push_back(idx);
    }
    int rootInLayout = -1;
    if (options.rootRelative) {
        rootInLayout = layout.sensorIndex(options.rootSensor);
        if (rootInLayout < 0)
            throw std::invalid_argument("prepareDatasets: root sensor '" + options.rootSensor +
                                        "' not in the selected layout");
    }

    struct Item {
        Window window;
        int label;
        int sequence;
    };
    std::vector<Item> items;
    std::map<int, std::vector<int>> sequencesByClass;  // class -> sequence ids with windows
    for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
        const auto& rec = corpus.sequences[s];
        std::vector<std::vector<VirtualImuSample>> streams;
        for (const int idx : streamOf) streams.push_back(rec.streams.at(idx));
        if (options.rootRelative) streams = normalizeToRoot(streams, rootInLayout);
        MultiChannelSeries series = assemble(layout, streams);
        lowpassFilter(series, options.cutoffHz, corpus.spec.frameRate);
        auto windows = slidingWindows(series, options.window, options.stride);
        if (windows.empty()) continue;
        auto& ids = sequencesByClass[rec.classId];
        if (ids.empty() || ids.back() != static_cast<int>(s)) ids.push_back(static_cast<int>(s));
        for (auto& w : windows)
            items.push_back({std::move(w), rec.classId, static_cast<int>(s)});
    }
    if (items.empty()) throw std::invalid_argument("prepareDatasets: no full windows produced");

    // Stratified split on whole sequences so a sequence's windows never
    // straddle the train/test boundary.
    std::vector<char> isTrain(corpus.sequences.size(), 0);
    for (auto& [classId, ids] : sequencesByClass) {
        Rng rng(mixSeed(options.splitSeed, static_cast<std::uint64_t>(classId)));
        rng.shuffle(ids);
        const int take = std::max(
            1, std::min(static_cast<int>(ids.size()),
                        static_cast<int>(options.trainFraction * ids.size() + 0.5)));
        for (int i = 0; i < static_cast<int>(ids.size()); ++i)
            isTrain[ids[i]] = i < take ? 1 : 0;
    }

    int classCount = 0;
    for (const auto& c : corpus.spec.taxonomy.classes) classCount = std::max(classCount, c.id + 1);

    std::vector<const Item*> trainItems, testItems;
    for (const auto& item : items)
        (isTrain[item.sequence] ? trainItems : testItems).push_back(&item);
    if (trainItems.empty() || testItems.empty())
        throw std::invalid_argument("prepareDatasets: degenerate split (add sequences)");

    std::vector<Window> trainWindows;
    trainWindows.reserve(trainItems.size());
    for (const auto* it : trainItems) trainWindows.push_back(it->window);
    const ChannelStats stats =
        computeChannelStats(trainWindows, layout.channels(), options.window);

    auto pack = [&](const std::vector<const Item*>& src) {
        WindowedDataset ds;
        ds.channels = layout.channels();
        ds.window = options.window;
        ds.classCount = classCount;
        ds.values.reserve(src.size() * std::size_t(ds.channels) * ds.window);
        for (const auto* it : src) {
            Window w = it->window;
            standardizeWindow(w, stats, ds.channels, ds.window);
            ds.labels.push_back(it->label);
            ds.sourceSequence.push_back(it->sequence);
            ds.startFrame.push_back(w.startFrame);
            for (const double v : w.values) ds.values.push_back(static_cast<float>(v));
        }
        ds.validate();
        return ds;
    };

    DatasetPair pair;
    pair.layout = layout;
    pair.stats = stats;
    pair.train = pack(trainItems);
    pair.test = pack(testItems);
    return pair;
}

std::vector<SensorSet> standardSensorSets() {
    return {
        {"base3", {"head", "l_wrist", "r_knee"}},
        {"base4", {"head", "l_wrist", "r_knee", "spine"}},
        {"base5_knee", {"head", "l_wrist", "r_knee", "spine", "l_knee"}},
        {"base5_wrist", {"head", "l_wrist", "r_knee", "spine", "r_wrist"}},
        {"all6", {"head", "l_wrist", "r_knee", "spine", "l_knee", "r_wrist"}},
    };
}

}  // namespace mars
