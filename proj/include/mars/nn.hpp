#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mars/tensor.hpp"

namespace mars::ad {

// Xavier/Glorot uniform on +-sqrt(6 / (fanIn + fanOut)). For rank >= 2 the
// fans are shape[1] * kernel and shape[0] * kernel where kernel is the
// product of trailing dimensions; rank-1 tensors use their length for both.
Tensor xavierInit(const std::vector<int>& shape, std::uint64_t seed);

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool decay = true;  // participates in the squared-norm penalty (weights yes, biases no)
};

// Owns every learnable tensor of a model. Indices are stable after creation;
// the tape references parameters by index.
class ParamStore {
public:
    int add(std::string name, Tensor value, bool decay);
    int count() const { return static_cast<int>(params_.size()); }
    Parameter& at(int i) { return params_.at(i); }
    const Parameter& at(int i) const { return params_.at(i); }
    int find(const std::string& name) const;  // -1 when absent

    void zeroGrads();
    // p <- p - lr * grad for every parameter, then grads are cleared.
    void sgdStep(double lr);

    // Sum of squared entries over decaying parameters only.
    double squaredWeightNorm() const;
    // Adds the gradient of beta2 * squaredWeightNorm() in place.
    void addWeightDecayGrads(double beta2);

    // Zero tensors shaped like the parameters, for per-worker accumulation.
    std::vector<Tensor> makeGradSink() const;
    void accumulateGrads(const std::vector<Tensor>& sink);

    std::size_t totalParameters() const;

private:
    std::vector<Parameter> params_;
};

std::uint64_t fnv1a64(const void* data, std::size_t bytes);
std::uint64_t fnv1a64File(const std::string& path);

// Binary container: magic "MARSCKPT", uint32 count, then per parameter a
// uint32 name length + name bytes, uint32 rank, the dims as uint32, and the
// values as little-endian float64.
void saveCheckpoint(const ParamStore& params, const std::string& path);

struct CheckpointEntry {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;
};
std::vector<CheckpointEntry> readCheckpointEntries(const std::string& path);

// Strict restore: the checkpoint must carry exactly the store's parameter
// names with matching shapes.
void loadCheckpoint(ParamStore& params, const std::string& path);

}  // namespace mars::ad
