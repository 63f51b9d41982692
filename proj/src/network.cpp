#include "mars/network.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mars/rng.hpp"

namespace mars {

using ad::Tape;
using ad::Tensor;

FusionVariant parseFusionVariant(const std::string& name) {
    if (name == "v1") return FusionVariant::v1;
    if (name == "v2") return FusionVariant::v2;
    if (name == "v3") return FusionVariant::v3;
    throw std::invalid_argument("unknown fusion variant '" + name + "' (expected v1, v2 or v3)");
}

std::string toString(FusionVariant v) {
    switch (v) {
        case FusionVariant::v1: return "v1";
        case FusionVariant::v2: return "v2";
        case FusionVariant::v3: return "v3";
    }
    return "?";
}

ArchitectureSpec ArchitectureSpec::standard(int channels, int window, int classCount) {
    ArchitectureSpec s;
    s.channels = channels;
    s.window = window;
    s.classCount = classCount;
    s.fusionDim = 256;
    s.path1d = {{64, 4, 1}, {96, 4, 1}, {112, 4, 1}, {128, 4, 1}};
    s.path2d = {{24, 2, 2, 2, 2}, {48, 2, 2, 2, 2}, {72, 5, 5, 1, 1}, {96, 5, 5, 1, 1}};
    s.validate();
    return s;
}

ArchitectureSpec ArchitectureSpec::compact(int channels, int window, int classCount) {
    ArchitectureSpec s;
    s.channels = channels;
    s.window = window;
    s.classCount = classCount;
    s.fusionDim = 16;
    s.path1d = {{6, 4, 1}, {8, 4, 1}};
    s.path2d = {{4, 2, 2, 2, 2}, {6, 2, 2, 2, 2}};
    s.validate();
    return s;
}

std::vector<int> ArchitectureSpec::lengths1d() const {
    std::vector<int> lengths = {window};
    int L = window;
    for (const auto& layer : path1d) {
        if (L < layer.kernel || (L - layer.kernel) % layer.stride != 0)
            throw std::invalid_argument("ArchitectureSpec: 1-D chain does not tile at length " +
                                        std::to_string(L));
        L = (L - layer.kernel) / layer.stride + 1;
        lengths.push_back(L);
    }
    return lengths;
}

std::vector<std::pair<int, int>> ArchitectureSpec::sizes2d() const {
    std::vector<std::pair<int, int>> sizes = {{window, channels}};
    int H = window, W = channels;
    for (const auto& layer : path2d) {
        if (H < layer.kernelH || W < layer.kernelW || (H - layer.kernelH) % layer.strideH != 0 ||
            (W - layer.kernelW) % layer.strideW != 0)
            throw std::invalid_argument("ArchitectureSpec: 2-D chain does not tile at " +
                                        std::to_string(H) + "x" + std::to_string(W));
        H = (H - layer.kernelH) / layer.strideH + 1;
        W = (W - layer.kernelW) / layer.strideW + 1;
        sizes.push_back({H, W});
    }
    return sizes;
}

int ArchitectureSpec::latent1d() const {
    return path1d.back().outChannels * lengths1d().back();
}

int ArchitectureSpec::latent2d() const {
    const auto [h, w] = sizes2d().back();
    return path2d.back().outChannels * h * w;
}

void ArchitectureSpec::validate() const {
    if (channels <= 0 || window <= 0 || classCount <= 0 || fusionDim <= 0)
        throw std::invalid_argument("ArchitectureSpec: non-positive dimension");
    if (path1d.empty() || path2d.empty())
        throw std::invalid_argument("ArchitectureSpec: empty pathway");
    for (const auto& l : path1d)
        if (l.outChannels <= 0 || l.kernel <= 0 || l.stride <= 0)
            throw std::invalid_argument("ArchitectureSpec: bad 1-D layer");
    for (const auto& l : path2d)
        if (l.outChannels <= 0 || l.kernelH <= 0 || l.kernelW <= 0 || l.strideH <= 0 ||
            l.strideW <= 0)
            throw std::invalid_argument("ArchitectureSpec: bad 2-D layer");
    lengths1d();  // throws when the chains do not tile
    sizes2d();
}

void saveModelSpec(const std::string& path, const ArchitectureSpec& spec, FusionVariant variant) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("saveModelSpec: cannot open " + path);
    out << "mars-model 1\n";
    out << "fusion " << toString(variant) << "\n";
    out << "channels " << spec.channels << "\n";
    out << "window " << spec.window << "\n";
    out << "classes " << spec.classCount << "\n";
    out << "fusion_dim " << spec.fusionDim << "\n";
    out << "path1d " << spec.path1d.size() << "\n";
    for (const auto& l : spec.path1d)
        out << "conv1d " << l.outChannels << " " << l.kernel << " " << l.stride << "\n";
    out << "path2d " << spec.path2d.size() << "\n";
    for (const auto& l : spec.path2d)
        out << "conv2d " << l.outChannels << " " << l.kernelH << " " << l.kernelW << " "
            << l.strideH << " " << l.strideW << "\n";
    if (!out) throw std::runtime_error("saveModelSpec: write failed for " + path);
}

std::pair<ArchitectureSpec, FusionVariant> loadModelSpec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("loadModelSpec: cannot open " + path);
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "mars-model" || version != 1)
        throw std::runtime_error("loadModelSpec: bad header in " + path);

    ArchitectureSpec spec;
    spec.path1d.clear();
    spec.path2d.clear();
    std::string fusionName;
    int n1 = 0, n2 = 0;
    if (!(in >> tag >> fusionName) || tag != "fusion") throw std::runtime_error("loadModelSpec: bad fusion line");
    if (!(in >> tag >> spec.channels) || tag != "channels") throw std::runtime_error("loadModelSpec: bad channels line");
    if (!(in >> tag >> spec.window) || tag != "window") throw std::runtime_error("loadModelSpec: bad window line");
    if (!(in >> tag >> spec.classCount) || tag != "classes") throw std::runtime_error("loadModelSpec: bad classes line");
    if (!(in >> tag >> spec.fusionDim) || tag != "fusion_dim") throw std::runtime_error("loadModelSpec: bad fusion_dim line");
    if (!(in >> tag >> n1) || tag != "path1d") throw std::runtime_error("loadModelSpec: bad path1d line");
    for (int i = 0; i < n1; ++i) {
        Conv1dSpec l;
        if (!(in >> tag >> l.outChannels >> l.kernel >> l.stride) || tag != "conv1d")
            throw std::runtime_error("loadModelSpec: bad conv1d line");
        spec.path1d.push_back(l);
    }
    if (!(in >> tag >> n2) || tag != "path2d") throw std::runtime_error("loadModelSpec: bad path2d line");
    for (int i = 0; i < n2; ++i) {
        Conv2dSpec l;
        if (!(in >> tag >> l.outChannels >> l.kernelH >> l.kernelW >> l.strideH >> l.strideW) ||
            tag != "conv2d")
            throw std::runtime_error("loadModelSpec: bad conv2d line");
        spec.path2d.push_back(l);
    }
    spec.validate();
    return {spec, parseFusionVariant(fusionName)};
}

MarsNet::MarsNet(ArchitectureSpec spec, FusionVariant variant, std::uint64_t seed)
    : spec_(std::move(spec)), variant_(variant) {
    spec_.validate();
    int ordinal = 0;
    auto addParam = [&](const std::string& name, std::vector<int> shape, bool decay) {
        return params_.add(name, ad::xavierInit(shape, mixSeed(seed, ordinal++)), decay);
    };

    // Encoder channel chains; index i is the input width of layer i.
    std::vector<int> c1 = {spec_.channels};
    for (const auto& l : spec_.path1d) c1.push_back(l.outChannels);
    std::vector<int> c2 = {1};
    for (const auto& l : spec_.path2d) c2.push_back(l.outChannels);
    const int n1 = static_cast<int>(spec_.path1d.size());
    const int n2 = static_cast<int>(spec_.path2d.size());

    for (int i = 0; i < n1; ++i) {
        const auto& l = spec_.path1d[i];
        LayerRef ref;
        ref.w = addParam("enc1d." + std::to_string(i) + ".w", {l.outChannels, c1[i], l.kernel}, true);
        ref.b = addParam("enc1d." + std::to_string(i) + ".b", {l.outChannels}, false);
        enc1d_.push_back(ref);
    }
    for (int j = 0; j < n1; ++j) {
        const auto& l = spec_.path1d[n1 - 1 - j];  // mirrored layer
        LayerRef ref;
        ref.w = addParam("dec1d." + std::to_string(j) + ".w",
                         {c1[n1 - j], c1[n1 - 1 - j], l.kernel}, true);
        ref.b = addParam("dec1d." + std::to_string(j) + ".b", {c1[n1 - 1 - j]}, false);
        dec1d_.push_back(ref);
    }
    for (int i = 0; i < n2; ++i) {
        const auto& l = spec_.path2d[i];
        LayerRef ref;
        ref.w = addParam("enc2d." + std::to_string(i) + ".w",
                         {l.outChannels, c2[i], l.kernelH, l.kernelW}, true);
        ref.b = addParam("enc2d." + std::to_string(i) + ".b", {l.outChannels}, false);
        enc2d_.push_back(ref);
    }
    for (int j = 0; j < n2; ++j) {
        const auto& l = spec_.path2d[n2 - 1 - j];
        LayerRef ref;
        ref.w = addParam("dec2d." + std::to_string(j) + ".w",
                         {c2[n2 - j], c2[n2 - 1 - j], l.kernelH, l.kernelW}, true);
        ref.b = addParam("dec2d." + std::to_string(j) + ".b", {c2[n2 - 1 - j]}, false);
        dec2d_.push_back(ref);
    }

    if (variant_ == FusionVariant::v1) {
        head_.w = addParam("fusion.head.w", {spec_.classCount, spec_.latent2d() + spec_.latent1d()},
                           true);
        head_.b = addParam("fusion.head.b", {spec_.classCount}, false);
    } else {
        proj1_.w = addParam("fusion.proj1d.w", {spec_.fusionDim, spec_.latent1d()}, true);
        proj1_.b = addParam("fusion.proj1d.b", {spec_.fusionDim}, false);
        proj2_.w = addParam("fusion.proj2d.w", {spec_.fusionDim, spec_.latent2d()}, true);
        proj2_.b = addParam("fusion.proj2d.b", {spec_.fusionDim}, false);
        head_.w = addParam("fusion.head.w", {spec_.classCount, spec_.fusionDim}, true);
        head_.b = addParam("fusion.head.b", {spec_.classCount}, false);
    }
}

MarsNet::FusionRefs MarsNet::buildFusion(Tape& tape, int latent1, int latent2,
                                         int* logitsOut) const {
    FusionRefs refs;
    if (variant_ == FusionVariant::v1) {
        const int cat = tape.concat(latent2, latent1);
        *logitsOut = tape.dense(cat, tape.param(head_.w), tape.param(head_.b));
        return refs;
    }
    refs.proj1 = tape.dense(latent1, tape.param(proj1_.w), tape.param(proj1_.b));
    refs.proj2 = tape.dense(latent2, tape.param(proj2_.w), tape.param(proj2_.b));
    const int gate2 = tape.sqrtOp(tape.sigmoid(refs.proj2));
    const int gate1 = tape.sqrtOp(tape.sigmoid(tape.neg(refs.proj1)));
    refs.fused = tape.add(tape.mul(gate2, refs.proj2), tape.mul(gate1, refs.proj1));
    *logitsOut = tape.dense(refs.fused, tape.param(head_.w), tape.param(head_.b));
    return refs;
}

MarsNet::ForwardNodes MarsNet::buildForward(Tape& tape, Tensor window, bool withDecoders) const {
    if (window.rank() != 2 || window.dim(0) != spec_.channels || window.dim(1) != spec_.window)
        throw std::invalid_argument("buildForward: window shape " + ad::shapeString(window.shape) +
                                    " does not match " +
                                    ad::shapeString({spec_.channels, spec_.window}));
    ForwardNodes nodes;
    nodes.x = tape.input(std::move(window));

    int h = nodes.x;
    for (std::size_t i = 0; i < spec_.path1d.size(); ++i) {
        h = tape.relu(tape.conv1d(h, tape.param(enc1d_[i].w), tape.param(enc1d_[i].b),
                                  spec_.path1d[i].stride));
    }
    nodes.latent1 = tape.reshape(h, {spec_.latent1d()});

    const int plane = tape.reshape(tape.transpose(nodes.x), {1, spec_.window, spec_.channels});
    int g = plane;
    for (std::size_t i = 0; i < spec_.path2d.size(); ++i) {
        const auto& layer = spec_.path2d[i];
        g = tape.relu(tape.conv2d(g, tape.param(enc2d_[i].w), tape.param(enc2d_[i].b),
                                  layer.strideH, layer.strideW));
    }
    nodes.latent2 = tape.reshape(g, {spec_.latent2d()});

    if (withDecoders) {
        int d = h;
        for (std::size_t j = 0; j < dec1d_.size(); ++j) {
            const auto& layer = spec_.path1d[dec1d_.size() - 1 - j];
            d = tape.deconv1d(d, tape.param(dec1d_[j].w), tape.param(dec1d_[j].b), layer.stride);
            if (j + 1 < dec1d_.size()) d = tape.relu(d);
        }
        nodes.recon1 = d;

        int e = g;
        for (std::size_t j = 0; j < dec2d_.size(); ++j) {
            const auto& layer = spec_.path2d[dec2d_.size() - 1 - j];
            e = tape.deconv2d(e, tape.param(dec2d_[j].w), tape.param(dec2d_[j].b), layer.strideH,
                              layer.strideW);
            if (j + 1 < dec2d_.size()) e = tape.relu(e);
        }
        nodes.recon2 = e;
    }

    const FusionRefs refs = buildFusion(tape, nodes.latent1, nodes.latent2, &nodes.logits);
    nodes.proj1 = refs.proj1;
    nodes.proj2 = refs.proj2;
    nodes.fused = refs.fused;
    return nodes;
}

Tensor MarsNet::logitsFor(const Tensor& window) const {
    Tape tape(&params_);
    const auto nodes = buildForward(tape, window, false);
    return tape.value(nodes.logits);
}

Tensor MarsNet::encode1d(const Tensor& window) const {
    Tape tape(&params_);
    const auto nodes = buildForward(tape, window, false);
    return tape.value(nodes.latent1);
}

Tensor MarsNet::encode2d(const Tensor& window) const {
    Tape tape(&params_);
    const auto nodes = buildForward(tape, window, false);
    return tape.value(nodes.latent2);
}

Tensor MarsNet::reconstruct1d(const Tensor& window) const {
    Tape tape(&params_);
    const auto nodes = buildForward(tape, window, true);
    return tape.value(nodes.recon1);
}

Tensor MarsNet::reconstruct2d(const Tensor& window) const {
    Tape tape(&params_);
    const auto nodes = buildForward(tape, window, true);
    return tape.value(nodes.recon2);
}

namespace {
void checkLatent(const Tensor& latent, int expected, const char* which) {
    if (latent.rank() != 1 || latent.dim(0) != expected)
        throw std::invalid_argument(std::string("fuse: ") + which + " latent shape " +
                                    ad::shapeString(latent.shape) + " does not match [" +
                                    std::to_string(expected) + "]");
}
}  // namespace

Tensor MarsNet::fuseV1(const Tensor& latent1, const Tensor& latent2) const {
    if (variant_ != FusionVariant::v1) throw std::logic_error("fuseV1: model is not variant v1");
    checkLatent(latent1, spec_.latent1d(), "1-D");
    checkLatent(latent2, spec_.latent2d(), "2-D");
    Tape tape(&params_);
    int logits = -1;
    buildFusion(tape, tape.input(latent1), tape.input(latent2), &logits);
    return tape.value(logits);
}

MarsNet::FusionOut MarsNet::fuseV2(const Tensor& latent1, const Tensor& latent2) const {
    if (variant_ == FusionVariant::v1) throw std::logic_error("fuseV2: model is variant v1");
    checkLatent(latent1, spec_.latent1d(), "1-D");
    checkLatent(latent2, spec_.latent2d(), "2-D");
    Tape tape(&params_);
    int logits = -1;
    const FusionRefs refs = buildFusion(tape, tape.input(latent1), tape.input(latent2), &logits);
    return {tape.value(refs.fused), tape.value(logits)};
}

MarsNet::FusionBatchOut MarsNet::fuseV3(const std::vector<Tensor>& latent1,
                                        const std::vector<Tensor>& latent2) const {
    if (variant_ != FusionVariant::v3) throw std::logic_error("fuseV3: model is not variant v3");
    if (latent1.empty() || latent1.size() != latent2.size())
        throw std::invalid_argument("fuseV3: batch must be non-empty and aligned");

    FusionBatchOut out;
    Tensor mu1({spec_.fusionDim}, 0.0), mu2({spec_.fusionDim}, 0.0);
    for (std::size_t i = 0; i < latent1.size(); ++i) {
        checkLatent(latent1[i], spec_.latent1d(), "1-D");
        checkLatent(latent2[i], spec_.latent2d(), "2-D");
        Tape tape(&params_);
        int logits = -1;
        const FusionRefs refs =
            buildFusion(tape, tape.input(latent1[i]), tape.input(latent2[i]), &logits);
        const Tensor& p1 = tape.value(refs.proj1);
        const Tensor& p2 = tape.value(refs.proj2);
        for (int k = 0; k < spec_.fusionDim; ++k) {
            mu1[k] += p1[k];
            mu2[k] += p2[k];
        }
        out.fused.push_back(tape.value(refs.fused));
        out.logits.push_back(tape.value(logits));
    }
    const double inv = 1.0 / static_cast<double>(latent1.size());
    for (int k = 0; k < spec_.fusionDim; ++k) {
        mu1[k] *= inv;
        mu2[k] *= inv;
    }
    out.klPenalty = symmetricKlOfSoftmax(mu1, mu2).value;
    return out;
}

void LossWeights::validate() const {
    if (beta1 < 0 || beta2 < 0 || beta3 < 0)
        throw std::invalid_argument("LossWeights: negative coefficient");
}

void stableSoftmax(const double* logits, int k, double* out) {
    double mx = logits[0];
    for (int i = 1; i < k; ++i) mx = std::max(mx, logits[i]);
    double z = 0.0;
    for (int i = 0; i < k; ++i) {
        out[i] = std::exp(logits[i] - mx);
        z += out[i];
    }
    for (int i = 0; i < k; ++i) out[i] /= z;
}

double logSumExp(const double* logits, int k) {
    double mx = logits[0];
    for (int i = 1; i < k; ++i) mx = std::max(mx, logits[i]);
    double z = 0.0;
    for (int i = 0; i < k; ++i) z += std::exp(logits[i] - mx);
    return mx + std::log(z);
}

double crossEntropyWithGrad(const Tensor& logits, int label, Tensor* grad) {
    if (logits.rank() != 1) throw std::invalid_argument("crossEntropy: logits must be rank 1");
    const int k = logits.dim(0);
    if (label < 0 || label >= k) throw std::invalid_argument("crossEntropy: label out of range");
    const double lse = logSumExp(logits.data(), k);
    if (grad != nullptr) {
        *grad = Tensor({k});
        stableSoftmax(logits.data(), k, grad->data());
        (*grad)[label] -= 1.0;
    }
    return lse - logits[label];
}

double reconstructionLoss(const Tensor& x, const Tensor& r1, const Tensor& r2) {
    if (x.rank() != 2) throw std::invalid_argument("reconstructionLoss: x must be rank 2");
    const int N = x.dim(0), T = x.dim(1);
    if (r1.shape != x.shape)
        throw std::invalid_argument("reconstructionLoss: 1-D reconstruction shape mismatch");
    if (r2.rank() != 3 || r2.dim(0) != 1 || r2.dim(1) != T || r2.dim(2) != N)
        throw std::invalid_argument("reconstructionLoss: 2-D reconstruction shape mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double d = r1[i] - x[i];
        loss += 0.5 * d * d;
    }
    for (int t = 0; t < T; ++t)
        for (int n = 0; n < N; ++n) {
            const double d = r2[std::size_t(t) * N + n] - x[std::size_t(n) * T + t];
            loss += d * d;
        }
    return loss;
}

double symmetricKl(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size() || p.empty())
        throw std::invalid_argument("symmetricKl: length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0 || q[i] <= 0.0)
            throw std::invalid_argument("symmetricKl: distributions must be strictly positive");
        sum += (p[i] - q[i]) * std::log(p[i] / q[i]);
    }
    return sum;
}

SymKlResult symmetricKlOfSoftmax(const Tensor& mu1, const Tensor& mu2) {
    if (mu1.rank() != 1 || mu1.shape != mu2.shape)
        throw std::invalid_argument("symmetricKlOfSoftmax: shape mismatch");
    const int k = mu1.dim(0);
    const double lse1 = logSumExp(mu1.data(), k);
    const double lse2 = logSumExp(mu2.data(), k);

    SymKlResult out;
    out.gradMu1 = Tensor({k});
    out.gradMu2 = Tensor({k});
    std::vector<double> p(k), q(k), gp(k), gq(k);
    for (int i = 0; i < k; ++i) {
        const double lp = mu1[i] - lse1;
        const double lq = mu2[i] - lse2;
        p[i] = std::exp(lp);
        q[i] = std::exp(lq);
        const double diff = lp - lq;
        out.value += (p[i] - q[i]) * diff;
        gp[i] = diff + 1.0 - std::exp(-diff);  // d/dp: ln(p/q) + 1 - q/p
        gq[i] = -diff + 1.0 - std::exp(diff);  // d/dq: -ln(p/q) + 1 - p/q
    }
    double inner1 = 0.0, inner2 = 0.0;
    for (int i = 0; i < k; ++i) {
        inner1 += p[i] * gp[i];
        inner2 += q[i] * gq[i];
    }
    for (int i = 0; i < k; ++i) {
        out.gradMu1[i] = p[i] * (gp[i] - inner1);
        out.gradMu2[i] = q[i] * (gq[i] - inner2);
    }
    return out;
}

}  // namespace mars
