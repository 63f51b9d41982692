#include "mars/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "mars/rng.hpp"

namespace mars {

using ad::Tape;
using ad::Tensor;

void TrainConfig::validate() const {
    if (maxEpochs < 0 || batchSize <= 0) throw std::invalid_argument("TrainConfig: bad sizes");
    if (!(lr0 > 0.0)) throw std::invalid_argument("TrainConfig: lr0 must be positive");
    if (!(lrDecay > 0.0 && lrDecay <= 1.0))
        throw std::invalid_argument("TrainConfig: lrDecay must be in (0, 1]");
    if (lrDecayEvery <= 0) throw std::invalid_argument("TrainConfig: lrDecayEvery must be positive");
    if (!(convergenceThreshold > 0.0 && convergenceThreshold <= 1.0) || convergenceWindow <= 0)
        throw std::invalid_argument("TrainConfig: bad convergence rule");
    loss.validate();
}

std::vector<double> trainAccuracies(const RunReport& report) {
    std::vector<double> accs;
    accs.reserve(report.epochs.size());
    for (const auto& e : report.epochs) accs.push_back(e.trainAccuracy);
    return accs;
}

int epochsToConverge(const RunReport& report) {
    return report.convergedEpoch < 0 ? -1 : report.convergedEpoch + 1;
}

int detectConvergence(const std::vector<double>& accuracies, double threshold, int window) {
    int streak = 0;
    for (std::size_t i = 0; i < accuracies.size(); ++i) {
        streak = accuracies[i] >= threshold ? streak + 1 : 0;
        if (streak == window) return static_cast<int>(i) - window + 1;
    }
    return -1;
}

Tensor windowTensor(const WindowedDataset& ds, int index) {
    if (index < 0 || index >= ds.sampleCount())
        throw std::invalid_argument("windowTensor: index out of range");
    Tensor t({ds.channels, ds.window});
    const float* src = ds.sample(index);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(src[i]);
    return t;
}

namespace {

int argmax(const Tensor& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.numel()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

void checkCompatible(const MarsNet& net, const WindowedDataset& ds, const char* what) {
    if (ds.channels != net.spec().channels || ds.window != net.spec().window ||
        ds.classCount != net.spec().classCount)
        throw std::invalid_argument(std::string(what) + ": dataset geometry " +
                                    std::to_string(ds.channels) + "x" + std::to_string(ds.window) +
                                    "/" + std::to_string(ds.classCount) +
                                    " does not match the model");
}

// One mini-batch update: forward with decoders, analytic seeds for every
// loss term, reverse sweeps accumulating into sink. Returns the composite
// objective value for the batch.
double batchStep(const MarsNet& net, const WindowedDataset& ds, const std::vector<int>& order,
                 std::size_t begin, std::size_t end, const LossWeights& lw,
                 std::vector<Tensor>& sink) {
    const int B = static_cast<int>(end - begin);
    std::vector<Tape> tapes;
    std::vector<MarsNet::ForwardNodes> nodes;
    tapes.reserve(B);
    nodes.reserve(B);
    for (int i = 0; i < B; ++i) {
        tapes.emplace_back(&net.params());
        nodes.push_back(
            net.buildForward(tapes.back(), windowTensor(ds, order[begin + i]), true));
    }

    SymKlResult kl;
    const bool aligned = net.variant() == FusionVariant::v3;
    if (aligned) {
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

    double ce = 0.0, recon = 0.0;
    for (int i = 0; i < B; ++i) {
        Tensor gLogits;
        ce += crossEntropyWithGrad(tapes[i].value(nodes[i].logits),
                                   ds.labels[order[begin + i]], &gLogits);
        for (auto& v : gLogits.v) v /= B;
        tapes[i].seed(nodes[i].logits, gLogits);

        const Tensor& x = tapes[i].value(nodes[i].x);
        const Tensor& r1 = tapes[i].value(nodes[i].recon1);
        const Tensor& r2 = tapes[i].value(nodes[i].recon2);
        recon += reconstructionLoss(x, r1, r2);
        Tensor g1(r1.shape), g2(r2.shape);
        for (std::size_t j = 0; j < r1.numel(); ++j) g1[j] = lw.beta1 * (r1[j] - x[j]);
        const int N = x.dim(0), T = x.dim(1);
        for (int t = 0; t < T; ++t)
            for (int n = 0; n < N; ++n)
                g2[std::size_t(t) * N + n] =
                    lw.beta1 * 2.0 * (r2[std::size_t(t) * N + n] - x[std::size_t(n) * T + t]);
        tapes[i].seed(nodes[i].recon1, g1);
        tapes[i].seed(nodes[i].recon2, g2);

        if (aligned) {
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

    double loss = ce / B + lw.beta1 * recon + lw.beta2 * net.params().squaredWeightNorm();
    if (aligned) loss += lw.beta3 * kl.value;
    return loss;
}

}  // namespace

ConfusionMatrix confusionOf(const MarsNet& net, const WindowedDataset& ds) {
    checkCompatible(net, ds, "confusionOf");
    if (ds.sampleCount() == 0) throw std::invalid_argument("confusionOf: empty dataset");
    ConfusionMatrix cm(ds.classCount);
    for (int i = 0; i < ds.sampleCount(); ++i)
        cm.add(ds.labels[i], argmax(net.logitsFor(windowTensor(ds, i))));
    return cm;
}

ClassifierMetrics evaluate(const MarsNet& net, const WindowedDataset& ds,
                           ConfusionMatrix* confusion) {
    ConfusionMatrix cm = confusionOf(net, ds);
    if (confusion != nullptr) *confusion = cm;
    return computeMetrics(cm);
}

RunReport train(MarsNet& net, const WindowedDataset& trainSet, const WindowedDataset& testSet,
                const TrainConfig& cfg, const EpochCallback& callback) {
    cfg.validate();
    trainSet.validate();
    testSet.validate();
    checkCompatible(net, trainSet, "train");
    checkCompatible(net, testSet, "train(test)");
    if (trainSet.sampleCount() == 0 || testSet.sampleCount() == 0)
        throw std::invalid_argument("train: empty split");

    using clock = std::chrono::steady_clock;
    const auto runStart = clock::now();

    RunReport report;
    report.variant = toString(net.variant());

    Rng shuffle(cfg.shuffleSeed);
    std::vector<int> order(trainSet.sampleCount());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    auto sink = net.params().makeGradSink();
    double lr = cfg.lr0;
    std::vector<double> accs;

    for (int epoch = 0; epoch < cfg.maxEpochs; ++epoch) {
        const auto epochStart = clock::now();
        shuffle.shuffle(order);

        double lossSum = 0.0;
        int batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batchSize) {
            const std::size_t end = std::min(begin + cfg.batchSize, order.size());
            for (auto& t : sink) t.fill(0.0);
            lossSum += batchStep(net, trainSet, order, begin, end, cfg.loss, sink);
            ++batches;

            net.params().accumulateGrads(sink);
            net.params().addWeightDecayGrads(cfg.loss.beta2);
            net.params().sgdStep(lr);
            ++report.totalIterations;
            if (report.totalIterations % cfg.lrDecayEvery == 0) lr *= cfg.lrDecay;
            report.lrAfter.push_back(lr);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.meanLoss = lossSum / batches;
        stats.trainAccuracy = computeMetrics(confusionOf(net, trainSet)).accuracy;
        if (cfg.evaluateTestEachEpoch)
            stats.testAccuracy = computeMetrics(confusionOf(net, testSet)).accuracy;
        stats.seconds = std::chrono::duration<double>(clock::now() - epochStart).count();

        accs.push_back(stats.trainAccuracy);
        report.epochs.push_back(stats);
        report.epochsRun = epoch + 1;
        report.convergedEpoch =
            detectConvergence(accs, cfg.convergenceThreshold, cfg.convergenceWindow);

        bool stop = false;
        if (callback && callback(report, stats)) stop = true;
        if (cfg.stopOnConvergence && report.convergedEpoch >= 0) stop = true;
        if (stop) break;
    }

    report.finalTrain = evaluate(net, trainSet);
    report.finalTest = evaluate(net, testSet, &report.testConfusion);
    report.totalSeconds = std::chrono::duration<double>(clock::now() - runStart).count();
    return report;
}

MarsNet makeFinetuneModel(const MarsNet& source, int targetClassCount, FusionVariant variant,
                          std::uint64_t seed) {
    if (targetClassCount <= 0)
        throw std::invalid_argument("makeFinetuneModel: class count must be positive");
    ArchitectureSpec spec = source.spec();
    spec.classCount = targetClassCount;
    MarsNet target(spec, variant, seed);
    for (int p = 0; p < source.params().count(); ++p) {
        const auto& sp = source.params().at(p);
        if (sp.name.rfind("fusion.", 0) == 0) continue;  // classifier stage starts fresh
        const int idx = target.params().find(sp.name);
        if (idx < 0) throw std::logic_error("makeFinetuneModel: missing " + sp.name);
        auto& tp = target.params().at(idx);
        if (tp.value.shape != sp.value.shape)
            throw std::logic_error("makeFinetuneModel: shape drift on " + sp.name);
        tp.value = sp.value;
    }
    return target;
}

void saveModel(const MarsNet& net, const std::string& checkpointPath, const std::string& specPath) {
    ad::saveCheckpoint(net.params(), checkpointPath);
    saveModelSpec(specPath, net.spec(), net.variant());
}

MarsNet loadModel(const std::string& checkpointPath, const std::string& specPath) {
    const auto [spec, variant] = loadModelSpec(specPath);
    MarsNet net(spec, variant, 0);
    ad::loadCheckpoint(net.params(), checkpointPath);
    return net;
}

}  // namespace mars
