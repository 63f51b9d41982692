#include "mars/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace mars::ad {

std::size_t Tensor::shapeNumel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (const int d : shape) {
        if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
    v.assign(shapeNumel(shape), fill);
}

Tensor Tensor::vector(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("Tensor: empty vector");
    Tensor t;
    t.shape = {static_cast<int>(values.size())};
    t.v.assign(values.begin(), values.end());
    return t;
}

std::string shapeString(const std::vector<int>& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

}  // namespace mars::ad
