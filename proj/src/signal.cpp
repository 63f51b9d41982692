#include "mars/signal.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace mars {

int ChannelLayout::sensorIndex(const std::string& name) const {
    for (std::size_t i = 0; i < sensors.size(); ++i)
        if (sensors[i] == name) return static_cast<int>(i);
    return -1;
}

void ChannelLayout::validate() const {
    if (sensors.empty()) throw std::invalid_argument("ChannelLayout: no sensors");
    std::set<std::string> seen;
    for (const auto& s : sensors) {
        if (s.empty()) throw std::invalid_argument("ChannelLayout: empty sensor name");
        if (!seen.insert(s).second)
            throw std::invalid_argument("ChannelLayout: duplicate sensor '" + s + "'");
    }
}

std::vector<std::vector<VirtualImuSample>> normalizeToRoot(
    const std::vector<std::vector<VirtualImuSample>>& streams, int rootIndex) {
    if (streams.empty()) throw std::invalid_argument("normalizeToRoot: no streams");
    if (rootIndex < 0 || rootIndex >= static_cast<int>(streams.size()))
        throw std::invalid_argument("normalizeToRoot: invalid root index");
    const std::size_t len = streams[0].size();
    for (const auto& s : streams)
        if (s.size() != len) throw std::invalid_argument("normalizeToRoot: ragged streams");

    std::vector<std::vector<VirtualImuSample>> out(streams.size(),
                                                   std::vector<VirtualImuSample>(len));
    for (std::size_t t = 0; t < len; ++t) {
        const Mat3 rootT = streams[rootIndex][t].orientation.transpose();
        for (std::size_t s = 0; s < streams.size(); ++s) {
            out[s][t].orientation = rootT * streams[s][t].orientation;
            out[s][t].acceleration = rootT * streams[s][t].acceleration;
        }
    }
    return out;
}

MultiChannelSeries assemble(const ChannelLayout& layout,
                            const std::vector<std::vector<VirtualImuSample>>& streams) {
    layout.validate();
    if (streams.size() != layout.sensors.size())
        throw std::invalid_argument("assemble: stream count does not match layout");
    const std::size_t len = streams.empty() ? 0 : streams[0].size();
    for (const auto& s : streams)
        if (s.size() != len) throw std::invalid_argument("assemble: ragged streams");

    MultiChannelSeries series(layout.channels(), static_cast<int>(len));
    for (std::size_t s = 0; s < streams.size(); ++s) {
        const int acc = layout.accelStart(static_cast<int>(s));
        const int ori = layout.orientStart(static_cast<int>(s));
        for (std::size_t t = 0; t < len; ++t) {
            const auto& sample = streams[s][t];
            for (int a = 0; a < 3; ++a) series.at(acc + a, static_cast<int>(t)) = sample.acceleration(a);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    series.at(ori + 3 * r + c, static_cast<int>(t)) = sample.orientation(r, c);
        }
    }
    return series;
}

std::vector<std::vector<VirtualImuSample>> disassemble(const ChannelLayout& layout,
                                                       const MultiChannelSeries& series) {
    layout.validate();
    if (series.channels != layout.channels())
        throw std::invalid_argument("disassemble: channel count does not match layout");
    std::vector<std::vector<VirtualImuSample>> streams(
        layout.sensors.size(), std::vector<VirtualImuSample>(series.length));
    for (std::size_t s = 0; s < streams.size(); ++s) {
        const int acc = layout.accelStart(static_cast<int>(s));
        const int ori = layout.orientStart(static_cast<int>(s));
        for (int t = 0; t < series.length; ++t) {
            auto& sample = streams[s][t];
            for (int a = 0; a < 3; ++a) sample.acceleration(a) = series.at(acc + a, t);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) sample.orientation(r, c) = series.at(ori + 3 * r + c, t);
        }
    }
    return streams;
}

std::vector<double> lowpassChannel(const std::vector<double>& x, double cutoffHz,
                                   double sampleRateHz) {
    if (sampleRateHz <= 0) throw std::invalid_argument("lowpassChannel: bad sample rate");
    if (cutoffHz <= 0 || cutoffHz >= 0.5 * sampleRateHz)
        throw std::invalid_argument("lowpassChannel: cutoff outside (0, Nyquist)");
    if (x.empty()) return {};

    const double K = std::tan(3.14159265358979323846 * cutoffHz / sampleRateHz);
    const double sqrt2 = 1.41421356237309504880;
    const double norm = 1.0 / (1.0 + sqrt2 * K + K * K);
    const double b0 = K * K * norm;
    const double b1 = 2.0 * b0;
    const double b2 = b0;
    const double a1 = 2.0 * (K * K - 1.0) * norm;
    const double a2 = (1.0 - sqrt2 * K + K * K) * norm;

    // Direct form II transposed, primed at the DC steady state of x[0].
    double z1 = (1.0 - b0) * x[0];
    double z2 = (b2 - a2) * x[0];
    std::vector<double> y(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double v = b0 * x[n] + z1;
        z1 = b1 * x[n] - a1 * v + z2;
        z2 = b2 * x[n] - a2 * v;
        y[n] = v;
    }
    return y;
}

void lowpassFilter(MultiChannelSeries& series, double cutoffHz, double sampleRateHz) {
    for (int c = 0; c < series.channels; ++c) {
        std::vector<double> channel(series.row(c), series.row(c) + series.length);
        const std::vector<double> filtered = lowpassChannel(channel, cutoffHz, sampleRateHz);
        std::copy(filtered.begin(), filtered.end(), series.row(c));
    }
}

std::vector<Window> slidingWindows(const MultiChannelSeries& series, int length, int stride) {
    if (length <= 0 || stride <= 0)
        throw std::invalid_argument("slidingWindows: length and stride must be positive");
    std::vector<Window> out;
    for (int start = 0; start + length <= series.length; start += stride) {
        Window w;
        w.startFrame = start;
        w.values.resize(std::size_t(series.channels) * length);
        for (int c = 0; c < series.channels; ++c)
            for (int t = 0; t < length; ++t)
                w.values[std::size_t(c) * length + t] = series.at(c, start + t);
        out.push_back(std::move(w));
    }
    return out;
}

ChannelStats computeChannelStats(const std::vector<Window>& windows, int channels, int length) {
    if (windows.empty()) throw std::invalid_argument("computeChannelStats: no windows");
    ChannelStats stats;
    stats.mean.assign(channels, 0.0);
    stats.stddev.assign(channels, 1.0);

    // Two-pass with Kahan compensation; the result is independent of how the
    // caller ordered the windows only up to fixed iteration order, which is
    // why iteration order here is part of the contract: window-major, then time.
    const std::size_t perChannel = windows.size() * static_cast<std::size_t>(length);
    for (int c = 0; c < channels; ++c) {
        double sum = 0.0, comp = 0.0;
        for (const auto& w : windows)
            for (int t = 0; t < length; ++t) {
                const double v = w.values[std::size_t(c) * length + t] - comp;
                const double next = sum + v;
                comp = (next - sum) - v;
                sum = next;
            }
        const double mean = sum / static_cast<double>(perChannel);
        double acc = 0.0, comp2 = 0.0;
        for (const auto& w : windows)
            for (int t = 0; t < length; ++t) {
                const double d = w.values[std::size_t(c) * length + t] - mean;
                const double v = d * d - comp2;
                const double next = acc + v;
                comp2 = (next - acc) - v;
                acc = next;
            }
        const double var = acc / static_cast<double>(perChannel);
        stats.mean[c] = mean;
        stats.stddev[c] = var > 1e-16 ? std::sqrt(var) : 1.0;
    }
    return stats;
}

void standardizeWindow(Window& w, const ChannelStats& stats, int channels, int length) {
    if (static_cast<int>(stats.mean.size()) != channels ||
        static_cast<int>(stats.stddev.size()) != channels)
        throw std::invalid_argument("standardizeWindow: stats shape mismatch");
    for (int c = 0; c < channels; ++c) {
        const double mean = stats.mean[c];
        const double inv = 1.0 / stats.stddev[c];
        for (int t = 0; t < length; ++t) {
            auto& v = w.values[std::size_t(c) * length + t];
            v = (v - mean) * inv;
        }
    }
}

}  // namespace mars
