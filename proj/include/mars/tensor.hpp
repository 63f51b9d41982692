#pragma once

#include <cstdint>
#include <new>
#include <string>
#include <vector>

namespace mars::ad {

// Allocator pinning every buffer to a 64-byte boundary. Vectorized kernels
// split loops depending on where a buffer falls relative to cache lines; a
// fixed alignment keeps those splits, and therefore floating-point rounding,
// identical no matter where the allocator happens to place the data.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    bool operator==(const AlignedAllocator&) const { return true; }
    bool operator!=(const AlignedAllocator&) const { return false; }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

// Dense row-major double tensor. Rank and shape are dynamic; all numeric
// state in the differentiable stack lives in these.
struct Tensor {
    std::vector<int> shape;
    AlignedBuffer v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[i]; }
    std::size_t numel() const { return v.size(); }
    bool sameShape(const Tensor& other) const { return shape == other.shape; }

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }

    static Tensor vector(std::vector<double> values);
    static std::size_t shapeNumel(const std::vector<int>& shape);
};

std::string shapeString(const std::vector<int>& shape);

}  // namespace mars::ad
