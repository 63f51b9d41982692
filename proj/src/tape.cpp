#include "mars/tape.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace mars::ad {
namespace {

// All contractions (convolutions via im2col, dense layers) are delegated to
// Eigen's single-threaded kernels: fixed blocking and combine order make the
// results run-to-run stable on one build without -ffast-math, and the packed
// operands keep the inner loops long enough to vectorize well even where a
// naive loop would reduce over a 5- or 1-wide output row.

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;
using MapV = Eigen::Map<Eigen::VectorXd>;
using CMapV = Eigen::Map<const Eigen::VectorXd>;

inline void axpy(double* __restrict y, double a, const double* __restrict x, int n) {
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

inline void axpyScatter(double* __restrict y, int sy, double a, const double* __restrict x, int n) {
    for (int i = 0; i < n; ++i) y[i * sy] += a * x[i];
}

// col[(i*k+d), t] = x[i, t*s+d]
void packConv1d(const double* X, int Ci, int L, int k, int s, int Lo, double* C) {
    for (int i = 0; i < Ci; ++i) {
        const double* xrow = X + std::size_t(i) * L;
        for (int d = 0; d < k; ++d) {
            double* crow = C + (std::size_t(i) * k + d) * Lo;
            if (s == 1)
                std::copy(xrow + d, xrow + d + Lo, crow);
            else
                for (int t = 0; t < Lo; ++t) crow[t] = xrow[t * s + d];
        }
    }
}

// gx[i, t*s+d] += C[(i*k+d), t]
void unpackConv1d(const double* C, int Ci, int L, int k, int s, int Lo, double* gX) {
    for (int i = 0; i < Ci; ++i) {
        double* grow = gX + std::size_t(i) * L;
        for (int d = 0; d < k; ++d) {
            const double* crow = C + (std::size_t(i) * k + d) * Lo;
            if (s == 1)
                axpy(grow + d, 1.0, crow, Lo);
            else
                axpyScatter(grow + d, s, 1.0, crow, Lo);
        }
    }
}

// col[((i*kh+p)*kw+q), r*Wo+c] = x[i, r*sh+p, c*sw+q]
void packConv2d(const double* X, int Ci, int H, int W, int kh, int kw, int sh, int sw, int Ho,
                int Wo, double* C) {
    std::size_t j = 0;
    for (int i = 0; i < Ci; ++i) {
        const double* xplane = X + std::size_t(i) * H * W;
        for (int p = 0; p < kh; ++p)
            for (int q = 0; q < kw; ++q, ++j) {
                double* crow = C + j * (std::size_t(Ho) * Wo);
                for (int r = 0; r < Ho; ++r) {
                    const double* xrow = xplane + std::size_t(r * sh + p) * W + q;
                    double* cr = crow + std::size_t(r) * Wo;
                    if (sw == 1)
                        std::copy(xrow, xrow + Wo, cr);
                    else
                        for (int c = 0; c < Wo; ++c) cr[c] = xrow[c * sw];
                }
            }
    }
}

// gx[i, r*sh+p, c*sw+q] += C[((i*kh+p)*kw+q), r*Wo+c]
void unpackConv2d(const double* C, int Ci, int H, int W, int kh, int kw, int sh, int sw, int Ho,
                  int Wo, double* gX) {
    std::size_t j = 0;
    for (int i = 0; i < Ci; ++i) {
        double* gplane = gX + std::size_t(i) * H * W;
        for (int p = 0; p < kh; ++p)
            for (int q = 0; q < kw; ++q, ++j) {
                const double* crow = C + j * (std::size_t(Ho) * Wo);
                for (int r = 0; r < Ho; ++r) {
                    double* grow = gplane + std::size_t(r * sh + p) * W + q;
                    const double* cr = crow + std::size_t(r) * Wo;
                    if (sw == 1)
                        axpy(grow, 1.0, cr, Wo);
                    else
                        axpyScatter(grow, sw, 1.0, cr, Wo);
                }
            }
    }
}

// y[o, t*s+d] += T[(o*k+d), t]
void scatterDeconv1d(const double* T, int Co, int k, int s, int L, int Lo, double* Y) {
    for (int o = 0; o < Co; ++o)
        for (int d = 0; d < k; ++d) {
            const double* trow = T + (std::size_t(o) * k + d) * L;
            double* yrow = Y + std::size_t(o) * Lo + d;
            if (s == 1)
                axpy(yrow, 1.0, trow, L);
            else
                axpyScatter(yrow, s, 1.0, trow, L);
        }
}

// G[(o*k+d), t] = gy[o, t*s+d]
void gatherDeconv1d(const double* gY, int Co, int k, int s, int L, int Lo, double* G) {
    for (int o = 0; o < Co; ++o)
        for (int d = 0; d < k; ++d) {
            double* grow = G + (std::size_t(o) * k + d) * L;
            const double* gyrow = gY + std::size_t(o) * Lo + d;
            if (s == 1)
                std::copy(gyrow, gyrow + L, grow);
            else
                for (int t = 0; t < L; ++t) grow[t] = gyrow[t * s];
        }
}

// y[o, r*sh+p, c*sw+q] += T[((o*kh+p)*kw+q), r*W+c]
void scatterDeconv2d(const double* T, int Co, int kh, int kw, int sh, int sw, int H, int W, int Wo,
                     double* Y, int Ho) {
    std::size_t j = 0;
    for (int o = 0; o < Co; ++o) {
        double* yplane = Y + std::size_t(o) * Ho * Wo;
        for (int p = 0; p < kh; ++p)
            for (int q = 0; q < kw; ++q, ++j) {
                const double* trow = T + j * (std::size_t(H) * W);
                for (int r = 0; r < H; ++r) {
                    const double* tr = trow + std::size_t(r) * W;
                    double* yrow = yplane + std::size_t(r * sh + p) * Wo + q;
                    if (sw == 1)
                        axpy(yrow, 1.0, tr, W);
                    else
                        axpyScatter(yrow, sw, 1.0, tr, W);
                }
            }
    }
}

// G[((o*kh+p)*kw+q), r*W+c] = gy[o, r*sh+p, c*sw+q]
void gatherDeconv2d(const double* gY, int Co, int kh, int kw, int sh, int sw, int H, int W, int Wo,
                    double* G, int Ho) {
    std::size_t j = 0;
    for (int o = 0; o < Co; ++o) {
        const double* gyplane = gY + std::size_t(o) * Ho * Wo;
        for (int p = 0; p < kh; ++p)
            for (int q = 0; q < kw; ++q, ++j) {
                double* grow = G + j * (std::size_t(H) * W);
                for (int r = 0; r < H; ++r) {
                    double* gr = grow + std::size_t(r) * W;
                    const double* gyrow = gyplane + std::size_t(r * sh + p) * Wo + q;
                    if (sw == 1)
                        std::copy(gyrow, gyrow + W, gr);
                    else
                        for (int c = 0; c < W; ++c) gr[c] = gyrow[c * sw];
                }
            }
    }
}

[[noreturn]] void shapeError(const char* op, const std::string& detail) {
    throw std::invalid_argument(std::string(op) + ": " + detail);
}

void requireRank(const char* op, const Tensor& t, int rank) {
    if (t.rank() != rank)
        shapeError(op, "expected rank " + std::to_string(rank) + ", got " +
                           shapeString(t.shape));
}

}  // namespace

const Tensor& Tape::value(int id) const {
    const Node& n = nodes_.at(id);
    if (n.op == Op::Param) return store_->at(n.paramIndex).value;
    return n.val;
}

int Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return size() - 1;
}

int Tape::input(Tensor value, bool requiresGrad) {
    Node n;
    n.op = Op::Input;
    n.needsGrad = requiresGrad;
    n.val = std::move(value);
    return push(std::move(n));
}

int Tape::param(int paramIndex) {
    if (store_ == nullptr) throw std::logic_error("Tape: param() without a ParamStore");
    if (paramIndex < 0 || paramIndex >= store_->count())
        throw std::out_of_range("Tape: bad parameter index");
    Node n;
    n.op = Op::Param;
    n.paramIndex = paramIndex;
    n.needsGrad = true;
    return push(std::move(n));
}

int Tape::conv1d(int x, int w, int b, int stride) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    requireRank("conv1d", xv, 2);
    requireRank("conv1d", wv, 3);
    requireRank("conv1d", bv, 1);
    const int Ci = xv.dim(0), L = xv.dim(1);
    const int Co = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != Ci) shapeError("conv1d", "weight channel mismatch");
    if (bv.dim(0) != Co) shapeError("conv1d", "bias size mismatch");
    if (stride < 1) shapeError("conv1d", "stride must be positive");
    if (L < k) shapeError("conv1d", "input shorter than kernel");
    const int Lo = (L - k) / stride + 1;

    Node n;
    n.op = Op::Conv1d;
    n.a = x;
    n.b = w;
    n.c = b;
    n.s1 = stride;
    n.needsGrad = needs(x) || needs(w) || needs(b);
    n.val = Tensor({Co, Lo});

    Tensor col({Ci * k, Lo});
    packConv1d(xv.data(), Ci, L, k, stride, Lo, col.data());
    MapM Y(n.val.data(), Co, Lo);
    Y.noalias() = CMapM(wv.data(), Co, Ci * k) * CMapM(col.data(), Ci * k, Lo);
    Y.colwise() += CMapV(bv.data(), Co);
    return push(std::move(n));
}

int Tape::conv2d(int x, int w, int b, int strideH, int strideW) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    requireRank("conv2d", xv, 3);
    requireRank("conv2d", wv, 4);
    requireRank("conv2d", bv, 1);
    const int Ci = xv.dim(0), H = xv.dim(1), W_ = xv.dim(2);
    const int Co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    if (wv.dim(1) != Ci) shapeError("conv2d", "weight channel mismatch");
    if (bv.dim(0) != Co) shapeError("conv2d", "bias size mismatch");
    if (strideH < 1 || strideW < 1) shapeError("conv2d", "stride must be positive");
    if (H < kh || W_ < kw) shapeError("conv2d", "input smaller than kernel");
    const int Ho = (H - kh) / strideH + 1;
    const int Wo = (W_ - kw) / strideW + 1;

    Node n;
    n.op = Op::Conv2d;
    n.a = x;
    n.b = w;
    n.c = b;
    n.s1 = strideH;
    n.s2 = strideW;
    n.needsGrad = needs(x) || needs(w) || needs(b);
    n.val = Tensor({Co, Ho, Wo});

    Tensor col({Ci * kh * kw, Ho * Wo});
    packConv2d(xv.data(), Ci, H, W_, kh, kw, strideH, strideW, Ho, Wo, col.data());
    MapM Y(n.val.data(), Co, Ho * Wo);
    Y.noalias() = CMapM(wv.data(), Co, Ci * kh * kw) * CMapM(col.data(), Ci * kh * kw, Ho * Wo);
    Y.colwise() += CMapV(bv.data(), Co);
    return push(std::move(n));
}

int Tape::deconv1d(int x, int w, int b, int stride) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    requireRank("deconv1d", xv, 2);
    requireRank("deconv1d", wv, 3);
    requireRank("deconv1d", bv, 1);
    const int Ci = xv.dim(0), L = xv.dim(1);
    const int Co = wv.dim(1), k = wv.dim(2);
    if (wv.dim(0) != Ci) shapeError("deconv1d", "weight channel mismatch");
    if (bv.dim(0) != Co) shapeError("deconv1d", "bias size mismatch");
    if (stride < 1) shapeError("deconv1d", "stride must be positive");
    const int Lo = (L - 1) * stride + k;

    Node n;
    n.op = Op::Deconv1d;
    n.a = x;
    n.b = w;
    n.c = b;
    n.s1 = stride;
    n.needsGrad = needs(x) || needs(w) || needs(b);
    n.val = Tensor({Co, Lo});
    for (int o = 0; o < Co; ++o) {
        double* yrow = n.val.data() + std::size_t(o) * Lo;
        for (int t = 0; t < Lo; ++t) yrow[t] = bv[o];
    }

    Tensor tmp({Co * k, L});
    MapM(tmp.data(), Co * k, L).noalias() =
        CMapM(wv.data(), Ci, Co * k).transpose() * CMapM(xv.data(), Ci, L);
    scatterDeconv1d(tmp.data(), Co, k, stride, L, Lo, n.val.data());
    return push(std::move(n));
}

int Tape::deconv2d(int x, int w, int b, int strideH, int strideW) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    requireRank("deconv2d", xv, 3);
    requireRank("deconv2d", wv, 4);
    requireRank("deconv2d", bv, 1);
    const int Ci = xv.dim(0), H = xv.dim(1), W_ = xv.dim(2);
    const int Co = wv.dim(1), kh = wv.dim(2), kw = wv.dim(3);
    if (wv.dim(0) != Ci) shapeError("deconv2d", "weight channel mismatch");
    if (bv.dim(0) != Co) shapeError("deconv2d", "bias size mismatch");
    if (strideH < 1 || strideW < 1) shapeError("deconv2d", "stride must be positive");
    const int Ho = (H - 1) * strideH + kh;
    const int Wo = (W_ - 1) * strideW + kw;

    Node n;
    n.op = Op::Deconv2d;
    n.a = x;
    n.b = w;
    n.c = b;
    n.s1 = strideH;
    n.s2 = strideW;
    n.needsGrad = needs(x) || needs(w) || needs(b);
    n.val = Tensor({Co, Ho, Wo});
    for (int o = 0; o < Co; ++o) {
        double* yplane = n.val.data() + std::size_t(o) * Ho * Wo;
        for (int t = 0; t < Ho * Wo; ++t) yplane[t] = bv[o];
    }

    Tensor tmp({Co * kh * kw, H * W_});
    MapM(tmp.data(), Co * kh * kw, H * W_).noalias() =
        CMapM(wv.data(), Ci, Co * kh * kw).transpose() * CMapM(xv.data(), Ci, H * W_);
    scatterDeconv2d(tmp.data(), Co, kh, kw, strideH, strideW, H, W_, Wo, n.val.data(), Ho);
    return push(std::move(n));
}

int Tape::dense(int x, int w, int b) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    requireRank("dense", xv, 1);
    requireRank("dense", wv, 2);
    requireRank("dense", bv, 1);
    const int N = xv.dim(0), M = wv.dim(0);
    if (wv.dim(1) != N) shapeError("dense", "weight width mismatch");
    if (bv.dim(0) != M) shapeError("dense", "bias size mismatch");

    Node n;
    n.op = Op::Dense;
    n.a = x;
    n.b = w;
    n.c = b;
    n.needsGrad = needs(x) || needs(w) || needs(b);
    n.val = Tensor({M});
    MapV y(n.val.data(), M);
    y.noalias() = CMapM(wv.data(), M, N) * CMapV(xv.data(), N);
    y += CMapV(bv.data(), M);
    return push(std::move(n));
}

int Tape::relu(int x) {
    const Tensor& xv = value(x);
    Node n;
    n.op = Op::Relu;
    n.a = x;
    n.needsGrad = needs(x);
    n.val = Tensor(xv.shape);
    for (std::size_t i = 0; i < xv.numel(); ++i) n.val[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    return push(std::move(n));
}

int Tape::sigmoid(int x) {
    const Tensor& xv = value(x);
    Node n;
    n.op = Op::Sigmoid;
    n.a = x;
    n.needsGrad = needs(x);
    n.val = Tensor(xv.shape);
    for (std::size_t i = 0; i < xv.numel(); ++i) n.val[i] = 1.0 / (1.0 + std::exp(-xv[i]));
    return push(std::move(n));
}

int Tape::sqrtOp(int x) {
    const Tensor& xv = value(x);
    Node n;
    n.op = Op::Sqrt;
    n.a = x;
    n.needsGrad = needs(x);
    n.val = Tensor(xv.shape);
    for (std::size_t i = 0; i < xv.numel(); ++i) {
        if (xv[i] < 0.0) throw std::domain_error("sqrtOp: negative input");
        n.val[i] = std::sqrt(xv[i]);
    }
    return push(std::move(n));
}

int Tape::neg(int x) {
    const Tensor& xv = value(x);
    Node n;
    n.op = Op::Neg;
    n.a = x;
    n.needsGrad = needs(x);
    n.val = Tensor(xv.shape);
    for (std::size_t i = 0; i < xv.numel(); ++i) n.val[i] = -xv[i];
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.sameShape(bv)) shapeError("add", "shape mismatch");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.needsGrad = needs(a) || needs(b);
    n.val = Tensor(av.shape);
    for (std::size_t i = 0; i < av.numel(); ++i) n.val[i] = av[i] + bv[i];
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.sameShape(bv)) shapeError("mul", "shape mismatch");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.needsGrad = needs(a) || needs(b);
    n.val = Tensor(av.shape);
    for (std::size_t i = 0; i < av.numel(); ++i) n.val[i] = av[i] * bv[i];
    return push(std::move(n));
}

int Tape::concat(int a, int b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    requireRank("concat", av, 1);
    requireRank("concat", bv, 1);
    Node n;
    n.op = Op::Concat;
    n.a = a;
    n.b = b;
    n.needsGrad = needs(a) || needs(b);
    n.val = Tensor({av.dim(0) + bv.dim(0)});
    std::copy(av.v.begin(), av.v.end(), n.val.v.begin());
    std::copy(bv.v.begin(), bv.v.end(), n.val.v.begin() + av.dim(0));
    return push(std::move(n));
}

int Tape::reshape(int x, std::vector<int> shape) {
    const Tensor& xv = value(x);
    if (Tensor::shapeNumel(shape) != xv.numel()) shapeError("reshape", "element count mismatch");
    Node n;
    n.op = Op::Reshape;
    n.a = x;
    n.needsGrad = needs(x);
    n.val.shape = std::move(shape);
    n.val.v = xv.v;  // same data, new shape
    return push(std::move(n));
}

int Tape::transpose(int x) {
    const Tensor& xv = value(x);
    requireRank("transpose", xv, 2);
    const int A = xv.dim(0), B = xv.dim(1);
    Node n;
    n.op = Op::Transpose;
    n.a = x;
    n.needsGrad = needs(x);
    n.val = Tensor({B, A});
    for (int i = 0; i < A; ++i)
        for (int j = 0; j < B; ++j) n.val[std::size_t(j) * A + i] = xv[std::size_t(i) * B + j];
    return push(std::move(n));
}

int Tape::softmax(int x) {
    const Tensor& xv = value(x);
    requireRank("softmax", xv, 1);
    Node n;
    n.op = Op::Softmax;
    n.a = x;
    n.needsGrad = needs(x);
    n.val = Tensor(xv.shape);
    double mx = xv[0];
    for (std::size_t i = 1; i < xv.numel(); ++i) mx = std::max(mx, xv[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < xv.numel(); ++i) {
        n.val[i] = std::exp(xv[i] - mx);
        z += n.val[i];
    }
    for (std::size_t i = 0; i < xv.numel(); ++i) n.val[i] /= z;
    return push(std::move(n));
}

void Tape::seed(int id, const Tensor& grad) {
    const Tensor& v = value(id);
    if (grad.shape != v.shape)
        shapeError("seed", "gradient shape " + shapeString(grad.shape) + " does not match value " +
                               shapeString(v.shape));
    Tensor& g = ensureGrad(id);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += grad[i];
}

Tensor& Tape::ensureGrad(int id) {
    Node& n = nodes_[id];
    if (n.grad.numel() == 0) n.grad = Tensor(value(id).shape, 0.0);
    return n.grad;
}

void Tape::backward(std::vector<Tensor>* sink) {
    for (int id = size() - 1; id >= 0; --id) {
        const Node& n = nodes_[id];
        if (n.grad.numel() == 0 || !n.needsGrad) continue;
        backwardNode(id, sink);
    }
}

void Tape::backwardNode(int id, std::vector<Tensor>* sink) {
    Node& n = nodes_[id];
    const double* gy = n.grad.data();

    // Resolves the gradient buffer of an operand: parameter gradients go to
    // the sink, everything else to the node's own lazily allocated tensor.
    auto gradBuf = [&](int operand) -> double* {
        Node& m = nodes_[operand];
        if (m.op == Op::Param) {
            if (sink == nullptr)
                throw std::logic_error("Tape::backward: parameter gradient without a sink");
            return (*sink)[m.paramIndex].data();
        }
        return ensureGrad(operand).data();
    };

    switch (n.op) {
        case Op::Input:
        case Op::Param:
            return;

        case Op::Conv1d: {
            const Tensor& xv = value(n.a);
            const Tensor& wv = value(n.b);
            const int Ci = xv.dim(0), L = xv.dim(1);
            const int Co = wv.dim(0), k = wv.dim(2);
            const int Lo = n.val.dim(1);
            const int s = n.s1;
            const bool nx = needs(n.a), nw = needs(n.b), nb = needs(n.c);
            CMapM gY(gy, Co, Lo);
            if (nb) MapV(gradBuf(n.c), Co) += gY.rowwise().sum();
            if (nw) {
                Tensor col({Ci * k, Lo});
                packConv1d(xv.data(), Ci, L, k, s, Lo, col.data());
                MapM(gradBuf(n.b), Co, Ci * k).noalias() +=
                    gY * CMapM(col.data(), Ci * k, Lo).transpose();
            }
            if (nx) {
                Tensor gcol({Ci * k, Lo});
                MapM(gcol.data(), Ci * k, Lo).noalias() =
                    CMapM(wv.data(), Co, Ci * k).transpose() * gY;
                unpackConv1d(gcol.data(), Ci, L, k, s, Lo, gradBuf(n.a));
            }
            return;
        }

        case Op::Conv2d: {
            const Tensor& xv = value(n.a);
            const Tensor& wv = value(n.b);
            const int Ci = xv.dim(0), H = xv.dim(1), W_ = xv.dim(2);
            const int Co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
            const int Ho = n.val.dim(1), Wo = n.val.dim(2);
            const int sh = n.s1, sw = n.s2;
            const bool nx = needs(n.a), nw = needs(n.b), nb = needs(n.c);
            CMapM gY(gy, Co, Ho * Wo);
            if (nb) MapV(gradBuf(n.c), Co) += gY.rowwise().sum();
            if (nw) {
                Tensor col({Ci * kh * kw, Ho * Wo});
                packConv2d(xv.data(), Ci, H, W_, kh, kw, sh, sw, Ho, Wo, col.data());
                MapM(gradBuf(n.b), Co, Ci * kh * kw).noalias() +=
                    gY * CMapM(col.data(), Ci * kh * kw, Ho * Wo).transpose();
            }
            if (nx) {
                Tensor gcol({Ci * kh * kw, Ho * Wo});
                MapM(gcol.data(), Ci * kh * kw, Ho * Wo).noalias() =
                    CMapM(wv.data(), Co, Ci * kh * kw).transpose() * gY;
                unpackConv2d(gcol.data(), Ci, H, W_, kh, kw, sh, sw, Ho, Wo, gradBuf(n.a));
            }
            return;
        }

        case Op::Deconv1d: {
            const Tensor& xv = value(n.a);
            const Tensor& wv = value(n.b);
            const int Ci = xv.dim(0), L = xv.dim(1);
            const int Co = wv.dim(1), k = wv.dim(2);
            const int Lo = n.val.dim(1);
            const int s = n.s1;
            const bool nx = needs(n.a), nw = needs(n.b), nb = needs(n.c);
            if (nb) MapV(gradBuf(n.c), Co) += CMapM(gy, Co, Lo).rowwise().sum();
            if (nx || nw) {
                Tensor gcol({Co * k, L});
                gatherDeconv1d(gy, Co, k, s, L, Lo, gcol.data());
                CMapM G(gcol.data(), Co * k, L);
                if (nx)
                    MapM(gradBuf(n.a), Ci, L).noalias() += CMapM(wv.data(), Ci, Co * k) * G;
                if (nw)
                    MapM(gradBuf(n.b), Ci, Co * k).noalias() +=
                        CMapM(xv.data(), Ci, L) * G.transpose();
            }
            return;
        }

        case Op::Deconv2d: {
            const Tensor& xv = value(n.a);
            const Tensor& wv = value(n.b);
            const int Ci = xv.dim(0), H = xv.dim(1), W_ = xv.dim(2);
            const int Co = wv.dim(1), kh = wv.dim(2), kw = wv.dim(3);
            const int Ho = n.val.dim(1), Wo = n.val.dim(2);
            const int sh = n.s1, sw = n.s2;
            const bool nx = needs(n.a), nw = needs(n.b), nb = needs(n.c);
            if (nb) MapV(gradBuf(n.c), Co) += CMapM(gy, Co, Ho * Wo).rowwise().sum();
            if (nx || nw) {
                Tensor gcol({Co * kh * kw, H * W_});
                gatherDeconv2d(gy, Co, kh, kw, sh, sw, H, W_, Wo, gcol.data(), Ho);
                CMapM G(gcol.data(), Co * kh * kw, H * W_);
                if (nx)
                    MapM(gradBuf(n.a), Ci, H * W_).noalias() +=
                        CMapM(wv.data(), Ci, Co * kh * kw) * G;
                if (nw)
                    MapM(gradBuf(n.b), Ci, Co * kh * kw).noalias() +=
                        CMapM(xv.data(), Ci, H * W_) * G.transpose();
            }
            return;
        }

        case Op::Dense: {
            const Tensor& xv = value(n.a);
            const Tensor& wv = value(n.b);
            const int N = xv.dim(0), M = wv.dim(0);
            const bool nx = needs(n.a), nw = needs(n.b), nb = needs(n.c);
            CMapV g(gy, M);
            if (nb) MapV(gradBuf(n.c), M) += g;
            if (nw)
                MapM(gradBuf(n.b), M, N).noalias() += g * CMapV(xv.data(), N).transpose();
            if (nx)
                MapV(gradBuf(n.a), N).noalias() += CMapM(wv.data(), M, N).transpose() * g;
            return;
        }

        case Op::Relu: {
            if (!needs(n.a)) return;
            const Tensor& xv = value(n.a);
            double* gx = gradBuf(n.a);
            for (std::size_t i = 0; i < xv.numel(); ++i)
                if (xv[i] > 0.0) gx[i] += gy[i];
            return;
        }

        case Op::Sigmoid: {
            if (!needs(n.a)) return;
            double* gx = gradBuf(n.a);
            for (std::size_t i = 0; i < n.val.numel(); ++i)
                gx[i] += n.val[i] * (1.0 - n.val[i]) * gy[i];
            return;
        }

        case Op::Sqrt: {
            if (!needs(n.a)) return;
            double* gx = gradBuf(n.a);
            for (std::size_t i = 0; i < n.val.numel(); ++i) gx[i] += gy[i] / (2.0 * n.val[i]);
            return;
        }

        case Op::Neg: {
            if (!needs(n.a)) return;
            double* gx = gradBuf(n.a);
            for (std::size_t i = 0; i < n.val.numel(); ++i) gx[i] -= gy[i];
            return;
        }

        case Op::Add: {
            if (needs(n.a)) {
                double* ga = gradBuf(n.a);
                for (std::size_t i = 0; i < n.val.numel(); ++i) ga[i] += gy[i];
            }
            if (needs(n.b)) {
                double* gb = gradBuf(n.b);
                for (std::size_t i = 0; i < n.val.numel(); ++i) gb[i] += gy[i];
            }
            return;
        }

        case Op::Mul: {
            const Tensor& av = value(n.a);
            const Tensor& bv = value(n.b);
            if (needs(n.a)) {
                double* ga = gradBuf(n.a);
                for (std::size_t i = 0; i < n.val.numel(); ++i) ga[i] += bv[i] * gy[i];
            }
            if (needs(n.b)) {
                double* gb = gradBuf(n.b);
                for (std::size_t i = 0; i < n.val.numel(); ++i) gb[i] += av[i] * gy[i];
            }
            return;
        }

        case Op::Concat: {
            const std::size_t na = value(n.a).numel();
            if (needs(n.a)) {
                double* ga = gradBuf(n.a);
                for (std::size_t i = 0; i < na; ++i) ga[i] += gy[i];
            }
            if (needs(n.b)) {
                double* gb = gradBuf(n.b);
                const std::size_t nb2 = value(n.b).numel();
                for (std::size_t i = 0; i < nb2; ++i) gb[i] += gy[na + i];
            }
            return;
        }

        case Op::Reshape: {
            if (!needs(n.a)) return;
            double* gx = gradBuf(n.a);
            for (std::size_t i = 0; i < n.val.numel(); ++i) gx[i] += gy[i];
            return;
        }

        case Op::Transpose: {
            if (!needs(n.a)) return;
            const Tensor& xv = value(n.a);
            const int A = xv.dim(0), B = xv.dim(1);
            double* gx = gradBuf(n.a);
            for (int j = 0; j < B; ++j)
                for (int i = 0; i < A; ++i)
                    gx[std::size_t(i) * B + j] += gy[std::size_t(j) * A + i];
            return;
        }

        case Op::Softmax: {
            if (!needs(n.a)) return;
            double* gx = gradBuf(n.a);
            const std::size_t K = n.val.numel();
            double inner = 0.0;
            for (std::size_t i = 0; i < K; ++i) inner += n.val[i] * gy[i];
            for (std::size_t i = 0; i < K; ++i) gx[i] += n.val[i] * (gy[i] - inner);
            return;
        }
    }
}

}  // namespace mars::ad
