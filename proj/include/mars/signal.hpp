#pragma once

#include <string>
#include <vector>

#include "mars/skeleton.hpp"

namespace mars {

// Channel order of the assembled matrix: 12 rows per sensor, acceleration
// x,y,z first, then the nine orientation entries in row-major order. Sensors
// appear in the order given here.
struct ChannelLayout {
    std::vector<std::string> sensors;

    int channels() const { return 12 * static_cast<int>(sensors.size()); }
    int accelStart(int sensor) const { return 12 * sensor; }
    int orientStart(int sensor) const { return 12 * sensor + 3; }
    int sensorIndex(const std::string& name) const;  // -1 when absent

    void validate() const;  // non-empty, names unique and non-empty
};

// Dense channels-by-time matrix, row (channel) major.
struct MultiChannelSeries {
    int channels = 0;
    int length = 0;
    std::vector<double> values;

    MultiChannelSeries() = default;
    MultiChannelSeries(int c, int l) : channels(c), length(l), values(std::size_t(c) * l, 0.0) {}
    double& at(int c, int t) { return values[std::size_t(c) * length + t]; }
    double at(int c, int t) const { return values[std::size_t(c) * length + t]; }
    double* row(int c) { return values.data() + std::size_t(c) * length; }
    const double* row(int c) const { return values.data() + std::size_t(c) * length; }
};

// Re-expresses every sensor in the root sensor's frame sample by sample:
// ori' = R_root^T * ori, acc' = R_root^T * acc. The root sensor's own
// orientation becomes the identity everywhere.
std::vector<std::vector<VirtualImuSample>> normalizeToRoot(
    const std::vector<std::vector<VirtualImuSample>>& streams, int rootIndex);

// Packs per-sensor streams into the layout's channel order. Streams must be
// equally long and match the layout's sensor count.
MultiChannelSeries assemble(const ChannelLayout& layout,
                            const std::vector<std::vector<VirtualImuSample>>& streams);

// Inverse of assemble (orientations are taken verbatim, not re-orthonormalized).
std::vector<std::vector<VirtualImuSample>> disassemble(const ChannelLayout& layout,
                                                       const MultiChannelSeries& series);

// Causal second-order Butterworth low-pass (bilinear transform), applied per
// channel. State is primed with the first sample, so constant signals pass
// through unchanged. Requires 0 < cutoff < sampleRate / 2.
std::vector<double> lowpassChannel(const std::vector<double>& x, double cutoffHz,
                                   double sampleRateHz);
void lowpassFilter(MultiChannelSeries& series, double cutoffHz, double sampleRateHz);

// Full windows of the given length at the given stride; start offsets are
// 0, stride, 2*stride, ... Windows stay channel-major.
struct Window {
    int startFrame = 0;
    std::vector<double> values;  // channels x length
};
std::vector<Window> slidingWindows(const MultiChannelSeries& series, int length, int stride);

// Per-channel affine standardization. Channels with tiny variance keep scale
// 1 so constant channels map to zero instead of amplified noise.
struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

ChannelStats computeChannelStats(const std::vector<Window>& windows, int channels, int length);
void standardizeWindow(Window& w, const ChannelStats& stats, int channels, int length);

}  // namespace mars
