#include "mars/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mars/rng.hpp"

namespace mars::ad {

Tensor xavierInit(const std::vector<int>& shape, std::uint64_t seed) {
    Tensor t(shape);
    double fanIn, fanOut;
    if (shape.size() >= 2) {
        double kernel = 1.0;
        for (std::size_t i = 2; i < shape.size(); ++i) kernel *= shape[i];
        fanIn = shape[1] * kernel;
        fanOut = shape[0] * kernel;
    } else {
        fanIn = fanOut = static_cast<double>(shape.at(0));
    }
    const double bound = std::sqrt(6.0 / (fanIn + fanOut));
    mars::Rng rng(seed);
    for (auto& x : t.v) x = rng.uniform(-bound, bound);
    return t;
}

int ParamStore::add(std::string name, Tensor value, bool decay) {
    if (find(name) >= 0) throw std::invalid_argument("ParamStore: duplicate name " + name);
    Parameter p;
    p.name = std::move(name);
    p.grad = Tensor(value.shape, 0.0);
    p.value = std::move(value);
    p.decay = decay;
    params_.push_back(std::move(p));
    return count() - 1;
}

int ParamStore::find(const std::string& name) const {
    for (int i = 0; i < count(); ++i)
        if (params_[i].name == name) return i;
    return -1;
}

void ParamStore::zeroGrads() {
    for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::sgdStep(double lr) {
    for (auto& p : params_) {
        double* v = p.value.data();
        const double* g = p.grad.data();
        const std::size_t n = p.value.numel();
        for (std::size_t i = 0; i < n; ++i) v[i] -= lr * g[i];
    }
    zeroGrads();
}

double ParamStore::squaredWeightNorm() const {
    double sum = 0.0;
    for (const auto& p : params_) {
        if (!p.decay) continue;
        for (const double x : p.value.v) sum += x * x;
    }
    return sum;
}

void ParamStore::addWeightDecayGrads(double beta2) {
    if (beta2 == 0.0) return;
    for (auto& p : params_) {
        if (!p.decay) continue;
        double* g = p.grad.data();
        const double* v = p.value.data();
        const std::size_t n = p.value.numel();
        for (std::size_t i = 0; i < n; ++i) g[i] += beta2 * 2.0 * v[i];
    }
}

std::vector<Tensor> ParamStore::makeGradSink() const {
    std::vector<Tensor> sink;
    sink.reserve(params_.size());
    for (const auto& p : params_) sink.emplace_back(p.value.shape, 0.0);
    return sink;
}

void ParamStore::accumulateGrads(const std::vector<Tensor>& sink) {
    if (sink.size() != params_.size())
        throw std::invalid_argument("ParamStore: grad sink size mismatch");
    for (std::size_t i = 0; i < sink.size(); ++i) {
        double* g = params_[i].grad.data();
        const double* s = sink[i].data();
        const std::size_t n = params_[i].grad.numel();
        for (std::size_t k = 0; k < n; ++k) g[k] += s[k];
    }
}

std::size_t ParamStore::totalParameters() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
}

std::uint64_t fnv1a64(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a64File(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("fnv1a64File: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (n < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    return h;
}

namespace {

constexpr char kMagic[8] = {'M', 'A', 'R', 'S', 'C', 'K', 'P', 'T'};

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

}  // namespace

void saveCheckpoint(const ParamStore& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("saveCheckpoint: cannot open " + path);
    out.write(kMagic, 8);
    writeU32(out, static_cast<std::uint32_t>(params.count()));
    for (int i = 0; i < params.count(); ++i) {
        const auto& p = params.at(i);
        writeU32(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        writeU32(out, static_cast<std::uint32_t>(p.value.rank()));
        for (const int d : p.value.shape) writeU32(out, static_cast<std::uint32_t>(d));
        static_assert(sizeof(double) == 8);
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(p.value.numel() * 8));
    }
    if (!out) throw std::runtime_error("saveCheckpoint: write failed for " + path);
}

std::vector<CheckpointEntry> readCheckpointEntries(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("readCheckpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("readCheckpoint: bad magic in " + path);

    const std::uint32_t count = readU32(in);
    if (!in || count > 4096) throw std::runtime_error("readCheckpoint: implausible entry count");
    std::vector<CheckpointEntry> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        const std::uint32_t nameLen = readU32(in);
        if (!in || nameLen > 4096) throw std::runtime_error("readCheckpoint: bad name length");
        e.name.resize(nameLen);
        in.read(e.name.data(), nameLen);
        const std::uint32_t rank = readU32(in);
        if (!in || rank > 8) throw std::runtime_error("readCheckpoint: bad rank");
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const std::uint32_t dim = readU32(in);
            if (!in || dim == 0 || dim > (1u << 24))
                throw std::runtime_error("readCheckpoint: bad dimension");
            e.shape.push_back(static_cast<int>(dim));
            numel *= dim;
        }
        e.values.resize(numel);
        in.read(reinterpret_cast<char*>(e.values.data()), static_cast<std::streamsize>(numel * 8));
        if (!in) throw std::runtime_error("readCheckpoint: truncated payload in " + path);
        entries.push_back(std::move(e));
    }
    return entries;
}

void loadCheckpoint(ParamStore& params, const std::string& path) {
    const auto entries = readCheckpointEntries(path);
    if (static_cast<int>(entries.size()) != params.count())
        throw std::runtime_error("loadCheckpoint: parameter count mismatch");
    for (const auto& e : entries) {
        const int idx = params.find(e.name);
        if (idx < 0) throw std::runtime_error("loadCheckpoint: unexpected parameter " + e.name);
        auto& p = params.at(idx);
        if (p.value.shape != e.shape)
            throw std::runtime_error("loadCheckpoint: shape mismatch for " + e.name + ": stored " +
                                     shapeString(e.shape) + ", expected " +
                                     shapeString(p.value.shape));
        p.value.v.assign(e.values.begin(), e.values.end());
    }
}

}  // namespace mars::ad
