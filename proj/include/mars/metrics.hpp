#pragma once

#include <cstdint>
#include <vector>

namespace mars {

// Prediction counts, row = actual class, column = predicted class.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int classCount);

    void add(int actual, int predicted);
    int classCount() const { return k_; }
    std::int64_t at(int actual, int predicted) const;
    std::int64_t total() const;

    // Per-class one-vs-rest binary counts.
    std::int64_t tp(int c) const;
    std::int64_t fp(int c) const;
    std::int64_t fn(int c) const;
    std::int64_t tn(int c) const;

private:
    int k_ = 0;
    std::vector<std::int64_t> counts_;
};

// accuracy: the per-class binary tables summed, (TP+TN) over their combined
// size. precision: macro average of TP/(TP+FP) with never-predicted classes
// contributing zero. f1: micro-averaged 2TP/(2TP+FP+FN).
struct ClassifierMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};
ClassifierMetrics computeMetrics(const ConfusionMatrix& cm);

// Diagonal fraction; the one-vs-rest accuracy equals
// 1 - 2*(1 - plain)/classCount for single-label data.
double plainAccuracy(const ConfusionMatrix& cm);

}  // namespace mars
