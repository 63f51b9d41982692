#pragma once

#include <vector>

#include "mars/nn.hpp"
#include "mars/tensor.hpp"

namespace mars::ad {

enum class Op {
    Input, Param, Conv1d, Conv2d, Deconv1d, Deconv2d, Dense,
    Relu, Sigmoid, Sqrt, Neg, Add, Mul, Concat, Reshape, Transpose, Softmax,
};

// Single-sample computation graph. Builder calls run the forward computation
// eagerly and record one node each; backward() then sweeps the records in
// reverse. Parameter values are referenced from the store, never copied, and
// their gradients are accumulated into a caller-provided sink so several
// tapes can share one parameter store.
class Tape {
public:
    explicit Tape(const ParamStore* params = nullptr) : store_(params) {}

    int input(Tensor value, bool requiresGrad = false);
    int param(int paramIndex);

    // x [Ci,L], w [Co,Ci,k], b [Co] -> [Co,(L-k)/stride+1]
    int conv1d(int x, int w, int b, int stride);
    // x [Ci,H,W], w [Co,Ci,kh,kw], b [Co] -> [Co,Ho,Wo], valid windows only
    int conv2d(int x, int w, int b, int strideH, int strideW);
    // x [Ci,L], w [Ci,Co,k], b [Co] -> [Co,(L-1)*stride+k]
    int deconv1d(int x, int w, int b, int stride);
    // x [Ci,H,W], w [Ci,Co,kh,kw], b [Co] -> [Co,(H-1)*sh+kh,(W-1)*sw+kw]
    int deconv2d(int x, int w, int b, int strideH, int strideW);
    // x [n], w [m,n], b [m] -> [m]
    int dense(int x, int w, int b);

    int relu(int x);
    int sigmoid(int x);
    int sqrtOp(int x);  // rejects negative inputs
    int neg(int x);
    int add(int a, int b);
    int mul(int a, int b);
    int concat(int a, int b);  // rank-1 only
    int reshape(int x, std::vector<int> shape);
    int transpose(int x);  // rank-2
    int softmax(int x);    // rank-1, max-shifted

    int size() const { return static_cast<int>(nodes_.size()); }
    const Tensor& value(int id) const;
    const std::vector<int>& shapeOf(int id) const { return value(id).shape; }

    // Accumulates an upstream gradient before backward(). Shape must match.
    void seed(int id, const Tensor& grad);

    // Reverse sweep. Parameter gradients go into sink (shaped like the
    // store); sink may be null only when no parameter received a gradient.
    void backward(std::vector<Tensor>* sink);

    // Gradient of a requiresGrad input (empty tensor when none arrived).
    const Tensor& grad(int id) const { return nodes_.at(id).grad; }

private:
    struct Node {
        Op op;
        int a = -1, b = -1, c = -1;
        int s1 = 1, s2 = 1;
        int paramIndex = -1;
        bool needsGrad = false;
        Tensor val;
        Tensor grad;
    };

    int push(Node node);
    bool needs(int id) const { return id >= 0 && nodes_[id].needsGrad; }
    Tensor& ensureGrad(int id);
    void backwardNode(int id, std::vector<Tensor>* sink);

    const ParamStore* store_ = nullptr;
    std::vector<Node> nodes_;
};

}  // namespace mars::ad
