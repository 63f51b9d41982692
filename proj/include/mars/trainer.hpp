#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mars/dataset.hpp"
#include "mars/metrics.hpp"
#include "mars/network.hpp"

namespace mars {

struct TrainConfig {
    int maxEpochs = 200;
    int batchSize = 64;
    double lr0 = 0.001;
    double lrDecay = 0.99;
    int lrDecayEvery = 100;  // iterations; one iteration is one mini-batch update
    LossWeights loss;
    std::uint64_t shuffleSeed = 1;
    double convergenceThreshold = 0.99;
    int convergenceWindow = 10;
    bool stopOnConvergence = true;
    bool evaluateTestEachEpoch = true;
    void validate() const;
};

struct EpochStats {
    int epoch = 0;               // 0-based
    double meanLoss = 0.0;       // mean per-batch composite objective
    double trainAccuracy = 0.0;  // full training split, measured after the epoch
    double testAccuracy = -1.0;  // -1 when per-epoch evaluation is off
    double seconds = 0.0;
};

struct RunReport {
    std::string variant;
    int epochsRun = 0;
    int totalIterations = 0;
    int convergedEpoch = -1;  // first epoch of the sustained-accuracy streak, -1 when never
    std::vector<EpochStats> epochs;
    std::vector<double> lrAfter;  // rate in force once each iteration finished
    ClassifierMetrics finalTrain, finalTest;
    ConfusionMatrix testConfusion;
    double totalSeconds = 0.0;
};

std::vector<double> trainAccuracies(const RunReport& report);
// convergedEpoch as a 1-based epoch count, -1 when the run never converged.
int epochsToConverge(const RunReport& report);

// First index i with `window` consecutive entries >= threshold starting at
// i; -1 when no such streak exists.
int detectConvergence(const std::vector<double>& accuracies, double threshold, int window);

// Sample i widened to the double [channels, window] tensor the network eats.
ad::Tensor windowTensor(const WindowedDataset& ds, int index);

ConfusionMatrix confusionOf(const MarsNet& net, const WindowedDataset& ds);
ClassifierMetrics evaluate(const MarsNet& net, const WindowedDataset& ds,
                           ConfusionMatrix* confusion = nullptr);

// Return true to stop after the epoch just recorded.
using EpochCallback = std::function<bool(const RunReport&, const EpochStats&)>;

// Mini-batch SGD over the composite objective (mean cross entropy, summed
// reconstruction, weight decay, and for the aligned variant the batch-level
// distribution penalty). Each iteration updates the weights first and then
// advances the stepped decay schedule. Training ends at maxEpochs, at
// convergence when stopOnConvergence is set, or when the callback says so.
RunReport train(MarsNet& net, const WindowedDataset& trainSet, const WindowedDataset& testSet,
                const TrainConfig& cfg, const EpochCallback& callback = {});

// Fresh model for a new label space reusing a trained feature stack: every
// encoder/decoder parameter is copied bit for bit, the fusion stage is
// reinitialized for the target class count. The fusion variant is free to
// differ from the source model's since none of its weights carry over.
MarsNet makeFinetuneModel(const MarsNet& source, int targetClassCount, FusionVariant variant,
                          std::uint64_t seed);

// Checkpoint plus sidecar description, enough to reload without out-of-band
// knowledge.
void saveModel(const MarsNet& net, const std::string& checkpointPath, const std::string& specPath);
MarsNet loadModel(const std::string& checkpointPath, const std::string& specPath);

}  // namespace mars
