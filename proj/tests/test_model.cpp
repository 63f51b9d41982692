#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "mars/network.hpp"
#include "mars/rng.hpp"

using namespace mars;
using ad::Tape;
using ad::Tensor;

namespace {

Tensor randomWindow(const ArchitectureSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    Tensor x({spec.channels, spec.window});
    for (auto& v : x.v) v = rng.uniform(-1.0, 1.0);
    return x;
}

// Full composite objective over a small batch, forward passes only:
// mean cross entropy + beta1 * summed reconstruction + beta2 * weight norm
// (+ beta3 * distribution penalty for the aligned variant).
double batchLoss(const MarsNet& net, const std::vector<Tensor>& xs, const std::vector<int>& ys,
                 const LossWeights& lw) {
    const int B = static_cast<int>(xs.size());
    double ce = 0.0, recon = 0.0;
    Tensor mu1({net.spec().fusionDim}, 0.0), mu2({net.spec().fusionDim}, 0.0);
    for (int i = 0; i < B; ++i) {
        Tape tape(&net.params());
        const auto nodes = net.buildForward(tape, xs[i], true);
        ce += crossEntropyWithGrad(tape.value(nodes.logits), ys[i], nullptr);
        recon += reconstructionLoss(tape.value(nodes.x), tape.value(nodes.recon1),
                                    tape.value(nodes.recon2));
        if (net.variant() == FusionVariant::v3) {
            const Tensor& p1 = tape.value(nodes.proj1);
            const Tensor& p2 = tape.value(nodes.proj2);
            for (int k = 0; k < net.spec().fusionDim; ++k) {
                mu1[k] += p1[k] / B;
                mu2[k] += p2[k] / B;
            }
        }
    }
    double loss = ce / B + lw.beta1 * recon + lw.beta2 * net.params().squaredWeightNorm();
    if (net.variant() == FusionVariant::v3) loss += lw.beta3 * symmetricKlOfSoftmax(mu1, mu2).value;
    return loss;
}

// Analytic gradient of batchLoss with respect to every parameter, seeded
// from the closed-form derivatives of each loss term.
std::vector<Tensor> batchGrads(const MarsNet& net, const std::vector<Tensor>& xs,
                               const std::vector<int>& ys, const LossWeights& lw) {
    const int B = static_cast<int>(xs.size());
    std::vector<Tape> tapes;
    std::vector<MarsNet::ForwardNodes> nodes;
    tapes.reserve(B);
    for (int i = 0; i < B; ++i) {
        tapes.emplace_back(&net.params());
        nodes.push_back(net.buildForward(tapes.back(), xs[i], true));
    }

    SymKlResult kl;
    if (net.variant() == FusionVariant::v3) {
        Tensor mu1({net.spec().fusionDim}, 0.0), mu2({net.spec().fusionDim}, 0.0);
        for (int i = 0; i < B; ++i) {
            const Tensor& p1 = tapes[i].value(nodes[i].proj1);
            const Tensor& p2 = tapes[i].value(nodes[i].proj2);
            for (int k = 0; k < net.spec().fusionDim; ++k) {
                mu1[k] += p1[k] / B;
                mu2[k] += p2[k] / B;
            }
        }
        kl = symmetricKlOfSoftmax(mu1, mu2);
    }

    auto sink = net.params().makeGradSink();
    for (int i = 0; i < B; ++i) {
        Tensor gLogits;
        crossEntropyWithGrad(tapes[i].value(nodes[i].logits), ys[i], &gLogits);
        for (auto& v : gLogits.v) v /= B;
        tapes[i].seed(nodes[i].logits, gLogits);

        const Tensor& x = tapes[i].value(nodes[i].x);
        const Tensor& r1 = tapes[i].value(nodes[i].recon1);
        const Tensor& r2 = tapes[i].value(nodes[i].recon2);
        Tensor g1(r1.shape), g2(r2.shape);
        for (std::size_t j = 0; j < r1.numel(); ++j) g1[j] = lw.beta1 * (r1[j] - x[j]);
        const int N = x.dim(0), T = x.dim(1);
        for (int t = 0; t < T; ++t)
            for (int n = 0; n < N; ++n)
                g2[std::size_t(t) * N + n] =
                    lw.beta1 * 2.0 * (r2[std::size_t(t) * N + n] - x[std::size_t(n) * T + t]);
        tapes[i].seed(nodes[i].recon1, g1);
        tapes[i].seed(nodes[i].recon2, g2);

        if (net.variant() == FusionVariant::v3) {
            Tensor gp1(kl.gradMu1.shape), gp2(kl.gradMu2.shape);
            for (std::size_t k = 0; k < gp1.numel(); ++k) {
                gp1[k] = lw.beta3 * kl.gradMu1[k] / B;
                gp2[k] = lw.beta3 * kl.gradMu2[k] / B;
            }
            tapes[i].seed(nodes[i].proj1, gp1);
            tapes[i].seed(nodes[i].proj2, gp2);
        }
        tapes[i].backward(&sink);
    }

    for (int p = 0; p < net.params().count(); ++p) {
        const auto& par = net.params().at(p);
        if (!par.decay) continue;
        for (std::size_t j = 0; j < par.value.numel(); ++j)
            sink[p][j] += lw.beta2 * 2.0 * par.value[j];
    }
    return sink;
}

}  // namespace

TEST_CASE("reference dimensioning produces the documented latent widths") {
    const auto spec = ArchitectureSpec::standard();
    CHECK(spec.lengths1d() == std::vector<int>{60, 57, 54, 51, 48});
    CHECK(spec.latent1d() == 128 * 48);
    CHECK(spec.latent1d() == 6144);

    const auto sizes = spec.sizes2d();
    REQUIRE(sizes.size() == 5);
    CHECK(sizes[0] == std::pair<int, int>{60, 36});
    CHECK(sizes[1] == std::pair<int, int>{30, 18});
    CHECK(sizes[2] == std::pair<int, int>{15, 9});
    CHECK(sizes[3] == std::pair<int, int>{11, 5});
    CHECK(sizes[4] == std::pair<int, int>{7, 1});
    CHECK(spec.latent2d() == 672);
    CHECK(spec.fusionDim == 256);

    // Wider sensor sets keep the 1-D latent and grow the 2-D one.
    for (const int n : {48, 60, 72}) CHECK(ArchitectureSpec::standard(n).latent1d() == 6144);
    CHECK(ArchitectureSpec::standard(48).latent2d() == 96 * 7 * 4);
    CHECK(ArchitectureSpec::standard(60).latent2d() == 96 * 7 * 7);
    CHECK(ArchitectureSpec::standard(72).latent2d() == 96 * 7 * 10);
}

TEST_CASE("architecture validation rejects chains that do not tile") {
    CHECK_THROWS_AS(ArchitectureSpec::standard(36, 59), std::invalid_argument);
    CHECK_THROWS_AS(ArchitectureSpec::standard(35, 60), std::invalid_argument);
    CHECK_THROWS_AS(ArchitectureSpec::standard(36, 10), std::invalid_argument);

    auto spec = ArchitectureSpec::compact();
    spec.classCount = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = ArchitectureSpec::compact();
    spec.path1d.clear();
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("forward pass produces the documented tensor shapes") {
    const auto spec = ArchitectureSpec::standard();
    MarsNet net(spec, FusionVariant::v3, 5);
    Tape tape(&net.params());
    const auto nodes = net.buildForward(tape, randomWindow(spec, 77), true);

    CHECK(tape.shapeOf(nodes.latent1) == std::vector<int>{6144});
    CHECK(tape.shapeOf(nodes.latent2) == std::vector<int>{672});
    CHECK(tape.shapeOf(nodes.proj1) == std::vector<int>{256});
    CHECK(tape.shapeOf(nodes.fused) == std::vector<int>{256});
    CHECK(tape.shapeOf(nodes.logits) == std::vector<int>{5});
    CHECK(tape.shapeOf(nodes.recon1) == std::vector<int>{36, 60});
    CHECK(tape.shapeOf(nodes.recon2) == std::vector<int>{1, 60, 36});

    CHECK_THROWS_AS(net.buildForward(tape, Tensor({36, 59}), false), std::invalid_argument);
}

TEST_CASE("concatenating fusion places the plane latent first") {
    const auto spec = ArchitectureSpec::compact();
    MarsNet net(spec, FusionVariant::v1, 9);
    CHECK(net.params().find("fusion.proj1d.w") == -1);  // v1 carries no projections

    Rng rng(31);
    Tensor l1({spec.latent1d()}), l2({spec.latent2d()});
    for (auto& v : l1.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : l2.v) v = rng.uniform(-1.0, 1.0);

    const auto& w = net.params().at(net.params().find("fusion.head.w")).value;
    const auto& b = net.params().at(net.params().find("fusion.head.b")).value;
    const int in = spec.latent2d() + spec.latent1d();
    Tensor expect({spec.classCount});
    for (int r = 0; r < spec.classCount; ++r) {
        double acc = b[r];
        for (int c = 0; c < in; ++c) {
            const double xv = c < spec.latent2d() ? l2[c] : l1[c - spec.latent2d()];
            acc += w[std::size_t(r) * in + c] * xv;
        }
        expect[r] = acc;
    }

    const Tensor got = net.fuseV1(l1, l2);
    REQUIRE(got.shape == expect.shape);
    for (std::size_t i = 0; i < got.numel(); ++i)
        CHECK(std::abs(got[i] - expect[i]) <= 1e-12);
}

TEST_CASE("gated fusion follows the square-root sigmoid blend") {
    const auto spec = ArchitectureSpec::compact();
    MarsNet net(spec, FusionVariant::v2, 13);

    Rng rng(41);
    Tensor l1({spec.latent1d()}), l2({spec.latent2d()});
    for (auto& v : l1.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : l2.v) v = rng.uniform(-1.0, 1.0);

    auto densify = [&](const char* wName, const char* bName, const Tensor& x) {
        const auto& w = net.params().at(net.params().find(wName)).value;
        const auto& b = net.params().at(net.params().find(bName)).value;
        const int rows = w.dim(0), cols = w.dim(1);
        Tensor y({rows});
        for (int r = 0; r < rows; ++r) {
            double acc = b[r];
            for (int c = 0; c < cols; ++c) acc += w[std::size_t(r) * cols + c] * x[c];
            y[r] = acc;
        }
        return y;
    };
    const Tensor p1 = densify("fusion.proj1d.w", "fusion.proj1d.b", l1);
    const Tensor p2 = densify("fusion.proj2d.w", "fusion.proj2d.b", l2);
    Tensor fusedExpect({spec.fusionDim});
    for (int k = 0; k < spec.fusionDim; ++k) {
        const double s2 = 1.0 / (1.0 + std::exp(-p2[k]));
        const double s1 = 1.0 / (1.0 + std::exp(p1[k]));  // sigma(-p1)
        fusedExpect[k] = std::sqrt(s2) * p2[k] + std::sqrt(s1) * p1[k];
    }
    const Tensor logitsExpect = densify("fusion.head.w", "fusion.head.b", fusedExpect);

    const auto out = net.fuseV2(l1, l2);
    REQUIRE(out.fused.shape == fusedExpect.shape);
    for (std::size_t i = 0; i < out.fused.numel(); ++i)
        CHECK(std::abs(out.fused[i] - fusedExpect[i]) <= 1e-12);
    for (std::size_t i = 0; i < out.logits.numel(); ++i)
        CHECK(std::abs(out.logits[i] - logitsExpect[i]) <= 1e-12);
}

TEST_CASE("aligned fusion reports the batch-level distribution penalty") {
    const auto spec = ArchitectureSpec::compact();
    MarsNet v2net(spec, FusionVariant::v2, 21);
    MarsNet v3net(spec, FusionVariant::v3, 21);

    Rng rng(55);
    std::vector<Tensor> l1s, l2s;
    for (int i = 0; i < 4; ++i) {
        Tensor l1({spec.latent1d()}), l2({spec.latent2d()});
        for (auto& v : l1.v) v = rng.uniform(-1.0, 1.0);
        for (auto& v : l2.v) v = rng.uniform(-1.0, 1.0);
        l1s.push_back(l1);
        l2s.push_back(l2);
    }

    const auto batch = v3net.fuseV3(l1s, l2s);
    REQUIRE(batch.logits.size() == 4);
    CHECK(batch.klPenalty >= 0.0);

    // Same seed means same parameters, so each sample matches the v2 path.
    Tensor mu1({spec.fusionDim}, 0.0), mu2({spec.fusionDim}, 0.0);
    for (int i = 0; i < 4; ++i) {
        const auto single = v2net.fuseV2(l1s[i], l2s[i]);
        for (std::size_t j = 0; j < single.logits.numel(); ++j)
            CHECK(batch.logits[i][j] == single.logits[j]);
    }

    // Independent penalty computation from raw projections.
    auto densify = [&](const char* wName, const char* bName, const Tensor& x) {
        const auto& w = v3net.params().at(v3net.params().find(wName)).value;
        const auto& b = v3net.params().at(v3net.params().find(bName)).value;
        const int rows = w.dim(0), cols = w.dim(1);
        Tensor y({rows});
        for (int r = 0; r < rows; ++r) {
            double acc = b[r];
            for (int c = 0; c < cols; ++c) acc += w[std::size_t(r) * cols + c] * x[c];
            y[r] = acc;
        }
        return y;
    };
    for (int i = 0; i < 4; ++i) {
        const Tensor p1 = densify("fusion.proj1d.w", "fusion.proj1d.b", l1s[i]);
        const Tensor p2 = densify("fusion.proj2d.w", "fusion.proj2d.b", l2s[i]);
        for (int k = 0; k < spec.fusionDim; ++k) {
            mu1[k] += p1[k] / 4.0;
            mu2[k] += p2[k] / 4.0;
        }
    }
    std::vector<double> p(spec.fusionDim), q(spec.fusionDim);
    stableSoftmax(mu1.data(), spec.fusionDim, p.data());
    stableSoftmax(mu2.data(), spec.fusionDim, q.data());
    CHECK(std::abs(batch.klPenalty - symmetricKl(p, q)) <= 1e-12);

    CHECK_THROWS_AS(v3net.fuseV3({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(v2net.fuseV3(l1s, l2s), std::logic_error);
}

TEST_CASE("symmetric divergence matches the half-versus-quarter oracle") {
    const double got = symmetricKl({0.5, 0.5}, {0.25, 0.75});
    CHECK(std::abs(got - 0.25 * std::log(3.0)) <= 1e-12);
    CHECK(std::abs(got - 0.2746530721670274) <= 1e-12);
}

TEST_CASE("symmetric divergence is symmetric, non-negative and zero at equality") {
    Rng rng(67);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(8));
        std::vector<double> p(k), q(k);
        double sp = 0, sq = 0;
        for (int i = 0; i < k; ++i) {
            p[i] = rng.uniform(0.05, 1.0);
            q[i] = rng.uniform(0.05, 1.0);
            sp += p[i];
            sq += q[i];
        }
        for (int i = 0; i < k; ++i) {
            p[i] /= sp;
            q[i] /= sq;
        }
        const double pq = symmetricKl(p, q);
        CHECK(pq >= 0.0);
        CHECK(std::abs(pq - symmetricKl(q, p)) <= 1e-12);
        CHECK(symmetricKl(p, p) == 0.0);
    }
    CHECK_THROWS_AS(symmetricKl({0.5, 0.5}, {1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(symmetricKl({0.5}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("softmax divergence gradients agree with finite differences") {
    const int k = 7;
    const double h = 1e-6;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(900 + seed);
        Tensor mu1({k}), mu2({k});
        for (auto& v : mu1.v) v = rng.uniform(-2.0, 2.0);
        for (auto& v : mu2.v) v = rng.uniform(-2.0, 2.0);

        const auto res = symmetricKlOfSoftmax(mu1, mu2);
        std::vector<double> p(k), q(k);
        stableSoftmax(mu1.data(), k, p.data());
        stableSoftmax(mu2.data(), k, q.data());
        CHECK(std::abs(res.value - symmetricKl(p, q)) <= 1e-12);

        for (int i = 0; i < k; ++i) {
            const double o1 = mu1[i];
            mu1[i] = o1 + h;
            const double up = symmetricKlOfSoftmax(mu1, mu2).value;
            mu1[i] = o1 - h;
            const double down = symmetricKlOfSoftmax(mu1, mu2).value;
            mu1[i] = o1;
            CHECK(std::abs(res.gradMu1[i] - (up - down) / (2 * h)) <= 1e-6);

            const double o2 = mu2[i];
            mu2[i] = o2 + h;
            const double up2 = symmetricKlOfSoftmax(mu1, mu2).value;
            mu2[i] = o2 - h;
            const double down2 = symmetricKlOfSoftmax(mu1, mu2).value;
            mu2[i] = o2;
            CHECK(std::abs(res.gradMu2[i] - (up2 - down2) / (2 * h)) <= 1e-6);
        }
    }
}

TEST_CASE("cross entropy gradient is softmax minus onehot") {
    const Tensor logits = Tensor::vector({1.0, 2.0, 3.0});
    Tensor grad;
    const double ce = crossEntropyWithGrad(logits, 1, &grad);

    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    CHECK(std::abs(ce - (std::log(z) - 2.0)) <= 1e-12);
    CHECK(std::abs(grad[0] - std::exp(1.0) / z) <= 1e-12);
    CHECK(std::abs(grad[1] - (std::exp(2.0) / z - 1.0)) <= 1e-12);
    CHECK(std::abs(grad[2] - std::exp(3.0) / z) <= 1e-12);

    // Finite differences across random logits.
    Rng rng(71);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor l({5});
        for (auto& v : l.v) v = rng.uniform(-3.0, 3.0);
        const int label = static_cast<int>(rng.below(5));
        Tensor g;
        crossEntropyWithGrad(l, label, &g);
        const double h = 1e-6;
        for (int i = 0; i < 5; ++i) {
            const double orig = l[i];
            l[i] = orig + h;
            const double up = crossEntropyWithGrad(l, label, nullptr);
            l[i] = orig - h;
            const double down = crossEntropyWithGrad(l, label, nullptr);
            l[i] = orig;
            CHECK(std::abs(g[i] - (up - down) / (2 * h)) <= 1e-7);
        }
    }
    CHECK_THROWS_AS(crossEntropyWithGrad(logits, 3, nullptr), std::invalid_argument);
    CHECK_THROWS_AS(crossEntropyWithGrad(logits, -1, nullptr), std::invalid_argument);
}

TEST_CASE("reconstruction objective weights the pathways half and one") {
    Tensor x({36, 60}, 0.0), r1({36, 60}, 1.0), r2({1, 60, 36}, 0.0);
    CHECK(reconstructionLoss(x, r1, r2) == doctest::Approx(1080.0).epsilon(1e-14));

    r2.fill(1.0);
    CHECK(reconstructionLoss(x, r1, r2) == doctest::Approx(1080.0 + 2160.0).epsilon(1e-14));

    // The plane target is the transpose of the window: matching it exactly
    // zeroes the second term even for asymmetric data.
    Rng rng(83);
    Tensor xr({4, 6});
    for (auto& v : xr.v) v = rng.uniform(-1.0, 1.0);
    Tensor r1r = xr, r2r({1, 6, 4});
    for (int t = 0; t < 6; ++t)
        for (int n = 0; n < 4; ++n) r2r[std::size_t(t) * 4 + n] = xr[std::size_t(n) * 6 + t];
    CHECK(reconstructionLoss(xr, r1r, r2r) == 0.0);

    CHECK_THROWS_AS(reconstructionLoss(x, Tensor({36, 59}), r2), std::invalid_argument);
    CHECK_THROWS_AS(reconstructionLoss(x, r1, Tensor({1, 36, 60})), std::invalid_argument);
}

TEST_CASE("whole-model gradients agree with finite differences") {
    const auto spec = ArchitectureSpec::compact();
    const LossWeights lw;
    const double h = 1e-6;

    for (const auto variant : {FusionVariant::v1, FusionVariant::v2, FusionVariant::v3}) {
        const std::string variantName = toString(variant);
        CAPTURE(variantName);
        MarsNet net(spec, variant, 101);
        std::vector<Tensor> xs = {randomWindow(spec, 1), randomWindow(spec, 2)};
        std::vector<int> ys = {0, 2};

        const auto analytic = batchGrads(net, xs, ys, lw);
        auto& store = net.params();
        REQUIRE(static_cast<int>(analytic.size()) == store.count());

        double worst = 0.0;
        for (int p = 0; p < store.count(); ++p) {
            const std::size_t n = store.at(p).value.numel();
            for (const std::size_t j : {std::size_t{0}, n / 2, n - 1}) {
                double& slot = store.at(p).value[j];
                const double orig = slot;
                slot = orig + h;
                const double up = batchLoss(net, xs, ys, lw);
                slot = orig - h;
                const double down = batchLoss(net, xs, ys, lw);
                slot = orig;
                const double fd = (up - down) / (2 * h);
                worst = std::max(worst, std::abs(analytic[p][j] - fd) /
                                            std::max({1.0, std::abs(fd), std::abs(analytic[p][j])}));
            }
        }
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("identical seeds give identical parameters and outputs") {
    const auto spec = ArchitectureSpec::compact();
    MarsNet a(spec, FusionVariant::v3, 333), b(spec, FusionVariant::v3, 333);
    MarsNet c(spec, FusionVariant::v3, 334);

    REQUIRE(a.params().count() == b.params().count());
    bool anyDiff = false;
    for (int p = 0; p < a.params().count(); ++p) {
        CHECK(a.params().at(p).name == b.params().at(p).name);
        CHECK(a.params().at(p).value.v == b.params().at(p).value.v);
        if (a.params().at(p).value.v != c.params().at(p).value.v) anyDiff = true;
    }
    CHECK(anyDiff);

    const Tensor x = randomWindow(spec, 404);
    const Tensor la = a.logitsFor(x), lb = b.logitsFor(x);
    CHECK(la.v == lb.v);
}

TEST_CASE("model description sidecar round-trips") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mars_model_spec_test";
    fs::create_directories(dir);
    const std::string path = (dir / "model.txt").string();

    const auto spec = ArchitectureSpec::standard(48, 60, 8);
    saveModelSpec(path, spec, FusionVariant::v3);
    const auto [loaded, variant] = loadModelSpec(path);
    CHECK(toString(variant) == "v3");
    CHECK(loaded.channels == 48);
    CHECK(loaded.window == 60);
    CHECK(loaded.classCount == 8);
    CHECK(loaded.fusionDim == spec.fusionDim);
    REQUIRE(loaded.path1d.size() == spec.path1d.size());
    for (std::size_t i = 0; i < spec.path1d.size(); ++i) {
        CHECK(loaded.path1d[i].outChannels == spec.path1d[i].outChannels);
        CHECK(loaded.path1d[i].kernel == spec.path1d[i].kernel);
        CHECK(loaded.path1d[i].stride == spec.path1d[i].stride);
    }
    REQUIRE(loaded.path2d.size() == spec.path2d.size());
    for (std::size_t i = 0; i < spec.path2d.size(); ++i) {
        CHECK(loaded.path2d[i].outChannels == spec.path2d[i].outChannels);
        CHECK(loaded.path2d[i].kernelH == spec.path2d[i].kernelH);
        CHECK(loaded.path2d[i].strideW == spec.path2d[i].strideW);
    }

    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("not-a-model 1\n", f);
    std::fclose(f);
    CHECK_THROWS_AS(loadModelSpec(path), std::runtime_error);
    fs::remove_all(dir);
}
