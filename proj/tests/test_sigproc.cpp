#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "mars/dataset.hpp"
#include "mars/motion.hpp"
#include "mars/rng.hpp"
#include "mars/signal.hpp"

using namespace mars;

namespace {
const double kPi = 3.14159265358979323846;

Mat3 randomRotation(Rng& rng) {
    const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    return axisAngleRotation(axis, rng.uniform(-kPi, kPi));
}

std::vector<std::vector<VirtualImuSample>> randomStreams(int sensors, int len, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<VirtualImuSample>> streams(sensors,
                                                       std::vector<VirtualImuSample>(len));
    for (auto& stream : streams)
        for (auto& s : stream) {
            s.orientation = randomRotation(rng);
            s.acceleration = Vec3(rng.normal(), rng.normal(), rng.normal());
        }
    return streams;
}

// Reference biquad: same Butterworth bilinear-transform coefficients, run as
// a plain direct-form-I difference equation.
std::vector<double> referenceLowpass(const std::vector<double>& x, double fc, double fs) {
    const double K = std::tan(kPi * fc / fs);
    const double norm = 1.0 / (1.0 + std::sqrt(2.0) * K + K * K);
    const double b0 = K * K * norm, b1 = 2.0 * b0, b2 = b0;
    const double a1 = 2.0 * (K * K - 1.0) * norm;
    const double a2 = (1.0 - std::sqrt(2.0) * K + K * K) * norm;

    std::vector<double> y(x.size());
    double x1 = x.empty() ? 0.0 : x[0], x2 = x1, y1 = x1, y2 = x1;  // DC-primed history
    for (std::size_t n = 0; n < x.size(); ++n) {
        y[n] = b0 * x[n] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x[n];
        y2 = y1;
        y1 = y[n];
    }
    return y;
}

CorpusSpec smallSpec(std::uint64_t seed) {
    CorpusSpec spec;
    spec.taxonomy = targetTaxonomy();
    spec.sequencesPerClass = 6;
    spec.durationMinSec = 3.0;
    spec.durationMaxSec = 4.0;
    spec.seed = seed;
    return spec;
}
}  // namespace

TEST_CASE("three-sensor layout places channels at the documented rows") {
    ChannelLayout layout;
    layout.sensors = {"head", "l_wrist", "r_knee"};
    REQUIRE(layout.channels() == 36);
    // 1-based: head acc 1-3, head ori 4-12, wrist acc 13-15, wrist ori 16-24,
    // knee acc 25-27, knee ori 28-36.
    CHECK(layout.accelStart(0) == 0);
    CHECK(layout.orientStart(0) == 3);
    CHECK(layout.accelStart(1) == 12);
    CHECK(layout.orientStart(1) == 15);
    CHECK(layout.accelStart(2) == 24);
    CHECK(layout.orientStart(2) == 27);
    CHECK(layout.sensorIndex("l_wrist") == 1);
    CHECK(layout.sensorIndex("pelvis") == -1);

    ChannelLayout six;
    six.sensors = {"head", "l_wrist", "r_knee", "spine", "l_knee", "r_wrist"};
    CHECK(six.channels() == 72);

    ChannelLayout bad;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.sensors = {"head", "head"};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("assemble writes every sensor's values into its own span") {
    ChannelLayout layout;
    layout.sensors = {"a", "b", "c"};
    const int len = 4;
    std::vector<std::vector<VirtualImuSample>> streams(3, std::vector<VirtualImuSample>(len));
    for (int s = 0; s < 3; ++s)
        for (int t = 0; t < len; ++t) {
            auto& smp = streams[s][t];
            smp.acceleration = Vec3(100 * s + 1, 100 * s + 2, 100 * s + 3) + Vec3(t, t, t);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) smp.orientation(r, c) = 10 * s + 3 * r + c + 0.5 * t;
        }

    const MultiChannelSeries series = assemble(layout, streams);
    REQUIRE(series.channels == 36);
    REQUIRE(series.length == len);
    for (int s = 0; s < 3; ++s)
        for (int t = 0; t < len; ++t) {
            for (int a = 0; a < 3; ++a)
                CHECK(series.at(layout.accelStart(s) + a, t) ==
                      streams[s][t].acceleration(a));
            for (int k = 0; k < 9; ++k)
                CHECK(series.at(layout.orientStart(s) + k, t) ==
                      streams[s][t].orientation(k / 3, k % 3));
        }

    // Round trip restores the inputs bit for bit.
    const auto back = disassemble(layout, series);
    REQUIRE(back.size() == streams.size());
    for (int s = 0; s < 3; ++s)
        for (int t = 0; t < len; ++t) {
            CHECK(back[s][t].acceleration == streams[s][t].acceleration);
            CHECK(back[s][t].orientation == streams[s][t].orientation);
        }

    streams[1].pop_back();
    CHECK_THROWS_AS(assemble(layout, streams), std::invalid_argument);
}

TEST_CASE("root normalization composes against the root frame") {
    auto streams = randomStreams(3, 20, 41);
    const int root = 1;
    const auto normalized = normalizeToRoot(streams, root);

    for (int t = 0; t < 20; ++t) {
        const Mat3 rootT = streams[root][t].orientation.transpose();
        for (int s = 0; s < 3; ++s) {
            CHECK((normalized[s][t].orientation - rootT * streams[s][t].orientation).norm() <
                  1e-12);
            CHECK((normalized[s][t].acceleration - rootT * streams[s][t].acceleration).norm() <
                  1e-12);
        }
        CHECK((normalized[root][t].orientation - Mat3::Identity()).norm() < 1e-12);
    }
}

TEST_CASE("sensors sharing the root's orientation normalize to identity") {
    Rng rng(7);
    std::vector<std::vector<VirtualImuSample>> streams(3, std::vector<VirtualImuSample>(10));
    for (int t = 0; t < 10; ++t) {
        const Mat3 shared = randomRotation(rng);
        for (auto& stream : streams) stream[t].orientation = shared;
    }
    const auto normalized = normalizeToRoot(streams, 0);
    for (const auto& stream : normalized)
        for (const auto& s : stream)
            CHECK((s.orientation - Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("root normalization cancels a constant global rotation") {
    const auto streams = randomStreams(3, 15, 43);
    Rng rng(44);
    const Mat3 g = randomRotation(rng);
    auto rotated = streams;
    for (auto& stream : rotated)
        for (auto& s : stream) {
            s.orientation = g * s.orientation;
            s.acceleration = g * s.acceleration;
        }

    const auto a = normalizeToRoot(streams, 0);
    const auto b = normalizeToRoot(rotated, 0);
    for (int s = 0; s < 3; ++s)
        for (int t = 0; t < 15; ++t) {
            CHECK((a[s][t].orientation - b[s][t].orientation).norm() < 1e-12);
            CHECK((a[s][t].acceleration - b[s][t].acceleration).norm() < 1e-12);
        }
}

TEST_CASE("root normalization is idempotent") {
    const auto once = normalizeToRoot(randomStreams(4, 12, 47), 2);
    const auto twice = normalizeToRoot(once, 2);
    for (int s = 0; s < 4; ++s)
        for (int t = 0; t < 12; ++t) {
            CHECK((once[s][t].orientation - twice[s][t].orientation).norm() < 1e-12);
            CHECK((once[s][t].acceleration - twice[s][t].acceleration).norm() < 1e-12);
        }

    CHECK_THROWS_AS(normalizeToRoot(once, 4), std::invalid_argument);
    CHECK_THROWS_AS(normalizeToRoot(once, -1), std::invalid_argument);
}

TEST_CASE("low-pass filter passes constants through unchanged") {
    const std::vector<double> x(200, 3.25);
    const auto y = lowpassChannel(x, 10.0, 60.0);
    REQUIRE(y.size() == x.size());
    for (const double v : y) CHECK(std::abs(v - 3.25) < 1e-9);

    CHECK_THROWS_AS(lowpassChannel(x, 0.0, 60.0), std::invalid_argument);
    CHECK_THROWS_AS(lowpassChannel(x, 30.0, 60.0), std::invalid_argument);
    CHECK_THROWS_AS(lowpassChannel(x, -1.0, 60.0), std::invalid_argument);
    CHECK(lowpassChannel({}, 10.0, 60.0).empty());
}

TEST_CASE("impulse response matches an independent recursion") {
    std::vector<double> x(512, 0.0);
    x[100] = 1.0;  // away from the start so priming sees a zero state
    const auto y = lowpassChannel(x, 10.0, 60.0);
    const auto ref = referenceLowpass(x, 10.0, 60.0);

    double energy = 0.0, refEnergy = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        CHECK(std::abs(y[n] - ref[n]) < 1e-12);
        energy += y[n] * y[n];
        refEnergy += ref[n] * ref[n];
    }
    CHECK(std::abs(energy - refEnergy) < 1e-12);
    CHECK(energy > 0.0);

    // A noisy random signal agrees with the reference recursion too.
    Rng rng(9);
    std::vector<double> noise(400);
    for (auto& v : noise) v = rng.normal();
    const auto yn = lowpassChannel(noise, 10.0, 60.0);
    const auto rn = referenceLowpass(noise, 10.0, 60.0);
    for (std::size_t n = 0; n < noise.size(); ++n) CHECK(std::abs(yn[n] - rn[n]) < 1e-10);
}

TEST_CASE("a tone at four times the cutoff is strongly attenuated") {
    const double fs = 60.0, fc = 5.0, tone = 20.0;
    std::vector<double> x(600);
    for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::sin(2.0 * kPi * tone * n / fs);
    const auto y = lowpassChannel(x, fc, fs);

    double peak = 0.0;
    for (std::size_t n = 120; n < y.size(); ++n) peak = std::max(peak, std::abs(y[n]));
    CHECK(peak < 0.2);
}

TEST_CASE("sliding windows enumerate every full stride position") {
    MultiChannelSeries series(2, 60);
    CHECK(slidingWindows(series, 60, 30).size() == 1);

    MultiChannelSeries longer(2, 120);
    for (int c = 0; c < 2; ++c)
        for (int t = 0; t < 120; ++t) longer.at(c, t) = 100.0 * c + t;
    const auto windows = slidingWindows(longer, 60, 30);
    REQUIRE(windows.size() == 3);
    CHECK(windows[0].startFrame == 0);
    CHECK(windows[1].startFrame == 30);
    CHECK(windows[2].startFrame == 60);
    for (const auto& w : windows)
        for (int c = 0; c < 2; ++c)
            for (int t = 0; t < 60; ++t)
                CHECK(w.values[std::size_t(c) * 60 + t] == longer.at(c, w.startFrame + t));

    CHECK(slidingWindows(MultiChannelSeries(2, 59), 60, 30).empty());
    CHECK_THROWS_AS(slidingWindows(series, 0, 30), std::invalid_argument);
    CHECK_THROWS_AS(slidingWindows(series, 60, 0), std::invalid_argument);
}

TEST_CASE("window counts match brute-force enumeration") {
    Rng rng(71);
    for (int trial = 0; trial < 50; ++trial) {
        const int len = static_cast<int>(rng.below(200));
        const int T = 1 + static_cast<int>(rng.below(80));
        const int stride = 1 + static_cast<int>(rng.below(40));
        const auto windows = slidingWindows(MultiChannelSeries(1, len), T, stride);

        std::vector<int> expected;
        for (int start = 0; start + T <= len; start += stride) expected.push_back(start);
        REQUIRE(windows.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i)
            CHECK(windows[i].startFrame == expected[i]);
    }
}

TEST_CASE("standardization zeroes means and normalizes spread on its own split") {
    Rng rng(3);
    const int channels = 5, length = 30;
    std::vector<Window> windows(40);
    for (auto& w : windows) {
        w.values.resize(std::size_t(channels) * length);
        for (int c = 0; c < channels; ++c)
            for (int t = 0; t < length; ++t)
                w.values[std::size_t(c) * length + t] =
                    c == 3 ? 42.0 : rng.normal(2.0 * c, 0.5 + c);  // channel 3 is constant
    }

    const ChannelStats stats = computeChannelStats(windows, channels, length);
    auto standardized = windows;
    for (auto& w : standardized) standardizeWindow(w, stats, channels, length);

    const std::size_t n = windows.size() * static_cast<std::size_t>(length);
    for (int c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (const auto& w : standardized)
            for (int t = 0; t < length; ++t) mean += w.values[std::size_t(c) * length + t];
        mean /= static_cast<double>(n);
        CHECK(std::abs(mean) < 1e-9);

        double var = 0.0;
        for (const auto& w : standardized)
            for (int t = 0; t < length; ++t) {
                const double d = w.values[std::size_t(c) * length + t] - mean;
                var += d * d;
            }
        var /= static_cast<double>(n);
        if (c == 3)  // constant channel maps to exact zeros, not amplified noise
            for (const auto& w : standardized)
                for (int t = 0; t < length; ++t)
                    CHECK(w.values[std::size_t(c) * length + t] == 0.0);
        else
            CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
    }
}

TEST_CASE("channel statistics match a plain accumulation oracle") {
    Rng rng(13);
    const int channels = 4, length = 25;
    std::vector<Window> windows(17);
    for (auto& w : windows) {
        w.values.resize(std::size_t(channels) * length);
        for (auto& v : w.values) v = rng.uniform(-5.0, 5.0);
    }

    const ChannelStats stats = computeChannelStats(windows, channels, length);
    for (int c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (const auto& w : windows)
            for (int t = 0; t < length; ++t) sum += w.values[std::size_t(c) * length + t];
        const double mean = sum / (windows.size() * static_cast<double>(length));
        double acc = 0.0;
        for (const auto& w : windows)
            for (int t = 0; t < length; ++t) {
                const double d = w.values[std::size_t(c) * length + t] - mean;
                acc += d * d;
            }
        const double stddev = std::sqrt(acc / (windows.size() * static_cast<double>(length)));
        CHECK(stats.mean[c] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(stats.stddev[c] == doctest::Approx(stddev).epsilon(1e-12));
    }

    // Permuting the windows moves the statistics by at most 1e-12.
    auto shuffled = windows;
    Rng perm(99);
    perm.shuffle(shuffled);
    const ChannelStats again = computeChannelStats(shuffled, channels, length);
    for (int c = 0; c < channels; ++c) {
        CHECK(std::abs(stats.mean[c] - again.mean[c]) <= 1e-12);
        CHECK(std::abs(stats.stddev[c] - again.stddev[c]) <= 1e-12);
    }

    CHECK_THROWS_AS(computeChannelStats({}, channels, length), std::invalid_argument);
}

TEST_CASE("prepared datasets carry construction labels and a clean split") {
    const RawCorpus corpus = buildCorpus(smallSpec(5), defaultSkeleton(),
                                         {"head", "l_wrist", "r_knee", "spine"});
    SigprocOptions opt;
    const DatasetPair pair = prepareDatasets(corpus, opt);

    CHECK(pair.train.channels == 36);
    CHECK(pair.train.window == 60);
    CHECK(pair.train.classCount == 5);
    CHECK(pair.test.channels == 36);
    CHECK(pair.train.sampleCount() > 0);
    CHECK(pair.test.sampleCount() > 0);
    CHECK(pair.layout.sensors == opt.sensors);

    // Every window's label equals its source sequence's class.
    for (int i = 0; i < pair.train.sampleCount(); ++i)
        CHECK(pair.train.labels[i] ==
              corpus.sequences[pair.train.sourceSequence[i]].classId);
    for (int i = 0; i < pair.test.sampleCount(); ++i)
        CHECK(pair.test.labels[i] == corpus.sequences[pair.test.sourceSequence[i]].classId);

    // No sequence contributes to both splits.
    std::set<int> trainSeqs(pair.train.sourceSequence.begin(), pair.train.sourceSequence.end());
    for (const int s : pair.test.sourceSequence) CHECK(trainSeqs.count(s) == 0);

    // Same corpus and options give the same bytes.
    const DatasetPair rerun = prepareDatasets(corpus, opt);
    CHECK(rerun.train.values == pair.train.values);
    CHECK(rerun.test.values == pair.test.values);
    CHECK(rerun.train.labels == pair.train.labels);

    SigprocOptions bad = opt;
    bad.sensors = {"head", "no_such"};
    CHECK_THROWS_AS(prepareDatasets(corpus, bad), std::invalid_argument);
    bad = opt;
    bad.rootSensor = "l_knee";  // not among the selected sensors
    CHECK_THROWS_AS(prepareDatasets(corpus, bad), std::invalid_argument);
}

TEST_CASE("training statistics standardize both splits") {
    const RawCorpus corpus =
        buildCorpus(smallSpec(6), defaultSkeleton(), {"head", "l_wrist", "r_knee"});
    const DatasetPair pair = prepareDatasets(corpus, SigprocOptions{});

    // Training split: near-zero mean and near-unit spread per channel (float
    // storage keeps this to about single precision).
    const int N = pair.train.channels, T = pair.train.window;
    for (int c = 0; c < N; ++c) {
        double mean = 0.0, var = 0.0;
        const std::size_t n = std::size_t(pair.train.sampleCount()) * T;
        for (int i = 0; i < pair.train.sampleCount(); ++i)
            for (int t = 0; t < T; ++t) mean += pair.train.sample(i)[std::size_t(c) * T + t];
        mean /= static_cast<double>(n);
        for (int i = 0; i < pair.train.sampleCount(); ++i)
            for (int t = 0; t < T; ++t) {
                const double d = pair.train.sample(i)[std::size_t(c) * T + t] - mean;
                var += d * d;
            }
        var /= static_cast<double>(n);
        CHECK(std::abs(mean) < 1e-5);
        // Root-relative channels of the root sensor are constant up to filter
        // rounding and collapse to ~0; every varying channel lands on unit
        // spread.
        if (var > 0.5)
            CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-4);
        else
            for (int i = 0; i < pair.train.sampleCount(); ++i)
                for (int t = 0; t < T; ++t)
                    CHECK(std::abs(pair.train.sample(i)[std::size_t(c) * T + t]) < 1e-9f);
    }

    // Held-out split reuses training statistics, so its means drift off zero.
    double worst = 0.0;
    for (int c = 0; c < N; ++c) {
        double mean = 0.0;
        for (int i = 0; i < pair.test.sampleCount(); ++i)
            for (int t = 0; t < T; ++t) mean += pair.test.sample(i)[std::size_t(c) * T + t];
        mean /= std::size_t(pair.test.sampleCount()) * T;
        worst = std::max(worst, std::abs(mean));
    }
    CHECK(worst > 1e-4);
}

TEST_CASE("windowed datasets survive the binary round trip") {
    namespace fs = std::filesystem;
    const RawCorpus corpus =
        buildCorpus(smallSpec(8), defaultSkeleton(), {"head", "l_wrist", "r_knee"});
    const DatasetPair pair = prepareDatasets(corpus, SigprocOptions{});

    const auto path = fs::temp_directory_path() / "mars_test_windows.bin";
    saveDataset(pair.train, path.string());
    const WindowedDataset loaded = loadDataset(path.string());

    CHECK(loaded.channels == pair.train.channels);
    CHECK(loaded.window == pair.train.window);
    CHECK(loaded.classCount == pair.train.classCount);
    CHECK(loaded.labels == pair.train.labels);
    CHECK(loaded.values == pair.train.values);  // float32 exact

    // Truncated files are rejected.
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    fs::resize_file(path, size / 2, ec);
    CHECK_THROWS(loadDataset(path.string()));
    fs::remove(path, ec);
    CHECK_THROWS(loadDataset(path.string()));
}

TEST_CASE("ablation sensor sets grow from three to six sensors") {
    const auto sets = standardSensorSets();
    REQUIRE(sets.size() == 5);
    CHECK(sets[0].sensors.size() == 3);
    CHECK(sets[1].sensors.size() == 4);
    CHECK(sets[2].sensors.size() == 5);
    CHECK(sets[3].sensors.size() == 5);
    CHECK(sets[4].sensors.size() == 6);
    for (const auto& set : sets) {
        ChannelLayout layout;
        layout.sensors = set.sensors;
        layout.validate();  // unique, non-empty names
        CHECK(layout.channels() == 12 * static_cast<int>(set.sensors.size()));
    }
    // Every set extends the three-sensor base.
    for (const auto& name : sets[0].sensors)
        for (const auto& set : sets)
            CHECK(std::find(set.sensors.begin(), set.sensors.end(), name) != set.sensors.end());
}
