#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mars/tape.hpp"

namespace mars {

// v1: plain concatenation of the two latents feeding the classifier head.
// v2: both latents projected to a shared width and blended with learned
//     sigmoid gates, sqrt(s(p2)) on the 2-D side and sqrt(1-s(p1)) on the 1-D.
// v3: v2 plus a symmetric KL penalty pulling the two projected feature
//     distributions together at the batch level.
enum class FusionVariant { v1, v2, v3 };

FusionVariant parseFusionVariant(const std::string& name);
std::string toString(FusionVariant v);

struct Conv1dSpec {
    int outChannels = 0, kernel = 0, stride = 1;
};
struct Conv2dSpec {
    int outChannels = 0, kernelH = 0, kernelW = 0, strideH = 1, strideW = 1;
};

// Hyperparameters of the two-pathway denoising classifier. The 1-D pathway
// convolves channels over time; the 2-D pathway treats the window as a
// single-plane time-by-channel image. Decoders mirror the encoders with
// transposed convolutions.
struct ArchitectureSpec {
    int channels = 36;
    int window = 60;
    int classCount = 5;
    int fusionDim = 256;
    std::vector<Conv1dSpec> path1d;
    std::vector<Conv2dSpec> path2d;

    // Reference dimensioning: four 1-D layers 64/96/112/128 with kernel 4
    // stride 1, four 2-D layers 24/48/72/96 with 2x2 stride 2 twice then
    // 5x5 stride 1 twice. At 36 channels x 60 samples the flattened latents
    // are 6144 and 672 wide.
    static ArchitectureSpec standard(int channels = 36, int window = 60, int classCount = 5);
    // Small dimensioning for exhaustive numeric checking.
    static ArchitectureSpec compact(int channels = 12, int window = 16, int classCount = 3);

    void validate() const;
    // Temporal lengths along the 1-D pathway: window first, then each layer.
    std::vector<int> lengths1d() const;
    // Spatial sizes along the 2-D pathway: (window, channels) first.
    std::vector<std::pair<int, int>> sizes2d() const;
    int latent1d() const;
    int latent2d() const;
};

// Sidecar text description of a trained model (architecture + fusion
// variant), written next to each checkpoint so it can be reloaded without
// out-of-band knowledge.
void saveModelSpec(const std::string& path, const ArchitectureSpec& spec, FusionVariant variant);
std::pair<ArchitectureSpec, FusionVariant> loadModelSpec(const std::string& path);

class MarsNet {
public:
    MarsNet(ArchitectureSpec spec, FusionVariant variant, std::uint64_t seed);

    const ArchitectureSpec& spec() const { return spec_; }
    FusionVariant variant() const { return variant_; }
    ad::ParamStore& params() { return params_; }
    const ad::ParamStore& params() const { return params_; }

    struct ForwardNodes {
        int x = -1;
        int latent1 = -1, latent2 = -1;  // flattened
        int proj1 = -1, proj2 = -1;      // v2/v3 only
        int fused = -1;                  // v2/v3 only
        int logits = -1;
        int recon1 = -1, recon2 = -1;    // only when decoders are requested
    };

    // Records the whole per-sample graph on the tape. window is [channels,
    // window]; decoders can be skipped for prediction-only passes.
    ForwardNodes buildForward(ad::Tape& tape, ad::Tensor window, bool withDecoders) const;

    // Forward-only conveniences (each runs a private tape).
    ad::Tensor logitsFor(const ad::Tensor& window) const;
    ad::Tensor encode1d(const ad::Tensor& window) const;      // [latent1d]
    ad::Tensor encode2d(const ad::Tensor& window) const;      // [latent2d]
    ad::Tensor reconstruct1d(const ad::Tensor& window) const; // [channels, window]
    ad::Tensor reconstruct2d(const ad::Tensor& window) const; // [1, window, channels]

    // Fusion applied to precomputed flattened latents.
    ad::Tensor fuseV1(const ad::Tensor& latent1, const ad::Tensor& latent2) const;  // logits
    struct FusionOut {
        ad::Tensor fused;
        ad::Tensor logits;
    };
    FusionOut fuseV2(const ad::Tensor& latent1, const ad::Tensor& latent2) const;
    struct FusionBatchOut {
        std::vector<ad::Tensor> fused;
        std::vector<ad::Tensor> logits;
        double klPenalty = 0.0;
    };
    // Batch-level fusion: per-sample outputs as v2 plus the symmetric KL
    // penalty between the softmaxed batch-mean projections. Empty batches
    // are rejected.
    FusionBatchOut fuseV3(const std::vector<ad::Tensor>& latent1,
                          const std::vector<ad::Tensor>& latent2) const;

private:
    struct LayerRef {
        int w = -1, b = -1;  // parameter indices
    };
    struct FusionRefs {
        int proj1 = -1, proj2 = -1, fused = -1;
    };

    FusionRefs buildFusion(ad::Tape& tape, int latent1, int latent2, int* logitsOut) const;

    ArchitectureSpec spec_;
    FusionVariant variant_;
    ad::ParamStore params_;
    std::vector<LayerRef> enc1d_, dec1d_, enc2d_, dec2d_;
    LayerRef proj1_, proj2_, head_;
};

struct LossWeights {
    double beta1 = 1.0;    // reconstruction
    double beta2 = 1e-4;   // weight decay
    double beta3 = 0.1;    // distribution alignment (v3)
    void validate() const;
};

// Numerically stable helpers on raw logit vectors.
void stableSoftmax(const double* logits, int k, double* out);
double logSumExp(const double* logits, int k);

// Per-sample cross entropy -log softmax(logits)[label]; optional gradient
// d/dlogits = softmax - onehot. Out-of-range labels are rejected.
double crossEntropyWithGrad(const ad::Tensor& logits, int label, ad::Tensor* grad);

// Per-sample denoising objective: 0.5 * |r1 - x|^2 + |r2 - x^T|^2 where x is
// [channels, window], r1 matches x and r2 is the [1, window, channels] plane.
double reconstructionLoss(const ad::Tensor& x, const ad::Tensor& r1, const ad::Tensor& r2);

// Symmetrized KL divergence D(P|Q) + D(Q|P) over strictly positive
// distributions of equal length.
double symmetricKl(const std::vector<double>& p, const std::vector<double>& q);

// SKL of softmax(mu1) against softmax(mu2) with analytic gradients with
// respect to the pre-softmax mean features.
struct SymKlResult {
    double value = 0.0;
    ad::Tensor gradMu1, gradMu2;
};
SymKlResult symmetricKlOfSoftmax(const ad::Tensor& mu1, const ad::Tensor& mu2);

}  // namespace mars
