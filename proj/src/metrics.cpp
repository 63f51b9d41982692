#include "mars/metrics.hpp"

#include <stdexcept>

namespace mars {

ConfusionMatrix::ConfusionMatrix(int classCount) : k_(classCount) {
    if (classCount <= 0) throw std::invalid_argument("ConfusionMatrix: classCount must be positive");
    counts_.assign(std::size_t(k_) * k_, 0);
}

void ConfusionMatrix::add(int actual, int predicted) {
    if (actual < 0 || actual >= k_ || predicted < 0 || predicted >= k_)
        throw std::invalid_argument("ConfusionMatrix: class out of range");
    ++counts_[std::size_t(actual) * k_ + predicted];
}

std::int64_t ConfusionMatrix::at(int actual, int predicted) const {
    if (actual < 0 || actual >= k_ || predicted < 0 || predicted >= k_)
        throw std::invalid_argument("ConfusionMatrix: class out of range");
    return counts_[std::size_t(actual) * k_ + predicted];
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t n = 0;
    for (const auto c : counts_) n += c;
    return n;
}

std::int64_t ConfusionMatrix::tp(int c) const { return at(c, c); }

std::int64_t ConfusionMatrix::fp(int c) const {
    std::int64_t n = 0;
    for (int a = 0; a < k_; ++a)
        if (a != c) n += at(a, c);
    return n;
}

std::int64_t ConfusionMatrix::fn(int c) const {
    std::int64_t n = 0;
    for (int p = 0; p < k_; ++p)
        if (p != c) n += at(c, p);
    return n;
}

std::int64_t ConfusionMatrix::tn(int c) const { return total() - tp(c) - fp(c) - fn(c); }

ClassifierMetrics computeMetrics(const ConfusionMatrix& cm) {
    ClassifierMetrics m;
    const int k = cm.classCount();
    const std::int64_t n = cm.total();
    if (k == 0 || n == 0) return m;

    std::int64_t tpSum = 0, tnSum = 0, fpSum = 0, fnSum = 0;
    double precisionSum = 0.0;
    for (int c = 0; c < k; ++c) {
        const std::int64_t tp = cm.tp(c), fp = cm.fp(c), fn = cm.fn(c), tn = cm.tn(c);
        tpSum += tp;
        tnSum += tn;
        fpSum += fp;
        fnSum += fn;
        if (tp + fp > 0) precisionSum += double(tp) / double(tp + fp);
    }
    m.accuracy = double(tpSum + tnSum) / (double(k) * double(n));
    m.precision = precisionSum / k;
    m.f1 = double(2 * tpSum) / double(2 * tpSum + fpSum + fnSum);
    return m;
}

double plainAccuracy(const ConfusionMatrix& cm) {
    const std::int64_t n = cm.total();
    if (n == 0) return 0.0;
    std::int64_t diag = 0;
    for (int c = 0; c < cm.classCount(); ++c) diag += cm.at(c, c);
    return double(diag) / double(n);
}

}  // namespace mars
