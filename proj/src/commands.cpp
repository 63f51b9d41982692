#include "mars/commands.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "mars/ablation.hpp"
#include "mars/config.hpp"
#include "mars/manifest.hpp"
#include "mars/report.hpp"
#include "mars/skeleton.hpp"

namespace mars {

namespace fs = std::filesystem;

namespace {

std::ostream& outOf(const CommandContext& ctx) { return ctx.out ? *ctx.out : std::cout; }
std::ostream& errOf(const CommandContext& ctx) { return ctx.err ? *ctx.err : std::cerr; }

Config loadConfig(const CommandContext& ctx) {
    Config cfg = ctx.configPath.empty() ? Config() : Config::parseFile(ctx.configPath);
    for (const auto& [key, value] : ctx.overrides) cfg.set(key, value);
    return cfg;
}

// Exception → exit-code mapping shared by every command.
int guarded(const CommandContext& ctx, const char* command, const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const ConfigError& e) {
        errOf(ctx) << "mars " << command << ": " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        errOf(ctx) << "mars " << command << ": " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::domain_error& e) {
        errOf(ctx) << "mars " << command << ": " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::out_of_range& e) {
        errOf(ctx) << "mars " << command << ": " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::logic_error& e) {
        errOf(ctx) << "mars " << command << ": " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        errOf(ctx) << "mars " << command << ": " << e.what() << '\n';
        return kExitIo;
    }
}

// Artifacts are written into "<out>.partial" and renamed into place at the
// end, so interrupted or failed runs leave no output directory at all.
class Stage {
public:
    Stage(const std::string& outDir, bool overwrite) : final_(outDir), overwrite_(overwrite) {
        if (final_.empty()) throw std::runtime_error("output directory not set");
        checkReplaceable();
        tmp_ = final_;
        tmp_ += ".partial";
        std::error_code ec;
        fs::remove_all(tmp_, ec);
        if (!fs::create_directories(tmp_))
            throw std::runtime_error("cannot create output directory " + tmp_.string());
    }

    ~Stage() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(tmp_, ec);
        }
    }

    const fs::path& dir() const { return tmp_; }
    std::string path(const std::string& name) const { return (tmp_ / name).string(); }

    void commit() {
        checkReplaceable();
        if (fs::exists(final_)) {
            if (fs::is_directory(final_) && fs::is_empty(final_))
                fs::remove(final_);
            else
                fs::remove_all(final_);
        }
        fs::rename(tmp_, final_);
        committed_ = true;
    }

private:
    // Replacing an existing output needs --overwrite, and even then only
    // directories carrying a run manifest are deleted.
    void checkReplaceable() const {
        if (!fs::exists(final_)) return;
        if (fs::is_directory(final_) && fs::is_empty(final_)) return;
        if (!fs::is_directory(final_) || !manifestExists(final_.string()))
            throw std::runtime_error("refusing to replace " + final_.string() +
                                     ": not a run directory");
        if (!overwrite_)
            throw std::runtime_error(final_.string() +
                                     " already exists (pass --overwrite to replace it)");
    }

    fs::path final_;
    fs::path tmp_;
    bool overwrite_ = false;
    bool committed_ = false;
};

// Inputs referenced from another artifact directory must match that
// directory's manifest when one is present.
void verifyInputsDir(const std::string& dir) {
    if (manifestExists(dir)) verifyManifestOutputs(dir);
}

// The full effective configuration in schema order; explicitly set keys and
// resolved defaults are indistinguishable by design.
std::vector<std::pair<std::string, std::string>> echoSettings(const RunSettings& s) {
    auto u64 = [](std::uint64_t v) { return std::to_string(v); };
    auto dbl = [](double v) {
        std::ostringstream o;
        o.precision(17);
        o << v;
        return o.str();
    };
    auto onoff = [](bool v) { return v ? std::string("true") : std::string("false"); };
    auto list = [](const std::vector<std::string>& items) {
        std::string out;
        for (const auto& i : items) out += (out.empty() ? "" : ",") + i;
        return out;
    };
    return {
        {"run.seed", u64(s.masterSeed)},
        {"corpus.domain", s.corpus.taxonomy.size() == targetTaxonomy().size() ? "target" : "source"},
        {"corpus.sequences_per_class", std::to_string(s.corpus.sequencesPerClass)},
        {"corpus.duration_min_sec", dbl(s.corpus.durationMinSec)},
        {"corpus.duration_max_sec", dbl(s.corpus.durationMaxSec)},
        {"corpus.frame_rate", dbl(s.corpus.frameRate)},
        {"corpus.accel_noise_std", dbl(s.corpus.noise.accelNoiseStd)},
        {"corpus.accel_bias_std", dbl(s.corpus.noise.accelBiasStd)},
        {"corpus.orientation_noise_rad", dbl(s.corpus.noise.orientationNoiseRad)},
        {"corpus.seed", u64(s.corpus.seed)},
        {"corpus.sensors", list(s.corpusSensors)},
        {"signal.sensors", list(s.signal.sensors)},
        {"signal.cutoff_hz", dbl(s.signal.cutoffHz)},
        {"signal.window", std::to_string(s.signal.window)},
        {"signal.stride", std::to_string(s.signal.stride)},
        {"signal.root_relative", onoff(s.signal.rootRelative)},
        {"signal.root_sensor", s.signal.rootSensor},
        {"signal.train_fraction", dbl(s.signal.trainFraction)},
        {"signal.split_seed", u64(s.signal.splitSeed)},
        {"architecture.fusion", toString(s.fusion)},
        {"training.max_epochs", std::to_string(s.training.maxEpochs)},
        {"training.batch_size", std::to_string(s.training.batchSize)},
        {"training.lr0", dbl(s.training.lr0)},
        {"training.lr_decay", dbl(s.training.lrDecay)},
        {"training.lr_decay_every", std::to_string(s.training.lrDecayEvery)},
        {"training.beta1", dbl(s.training.loss.beta1)},
        {"training.beta2", dbl(s.training.loss.beta2)},
        {"training.beta3", dbl(s.training.loss.beta3)},
        {"training.shuffle_seed", u64(s.training.shuffleSeed)},
        {"training.model_seed", u64(s.modelSeed)},
        {"training.convergence_threshold", dbl(s.training.convergenceThreshold)},
        {"training.convergence_window", std::to_string(s.training.convergenceWindow)},
        {"training.stop_on_convergence", onoff(s.training.stopOnConvergence)},
        {"training.eval_test_each_epoch", onoff(s.training.evaluateTestEachEpoch)},
        {"transfer.head_seed", u64(s.headSeed)},
        {"ablation.sets", list(s.ablationSets)},
        {"eval.split", s.evalSplit},
    };
}

EpochCallback progressPrinter(const CommandContext& ctx) {
    std::ostream* out = &outOf(ctx);
    return [out](const RunReport&, const EpochStats& e) {
        char line[160];
        if (e.testAccuracy >= 0.0)
            std::snprintf(line, sizeof(line),
                          "  epoch %3d  loss %.4f  train %.4f  test %.4f  (%.1fs)", e.epoch,
                          e.meanLoss, e.trainAccuracy, e.testAccuracy, e.seconds);
        else
            std::snprintf(line, sizeof(line), "  epoch %3d  loss %.4f  train %.4f  (%.1fs)",
                          e.epoch, e.meanLoss, e.trainAccuracy, e.seconds);
        *out << line << std::endl;
        return false;
    };
}

void stampReportFiles(RunManifest& m, const Stage& stage) {
    for (const char* name :
         {"epochs.csv", "lr.csv", "summary.txt", "confusion.csv", "curves.svg"})
        m.outputs.push_back(stampFile(stage.path(name), stage.dir().string()));
}

WindowedDataset loadSplit(const std::string& datasetDir, const std::string& split) {
    const fs::path p = fs::path(datasetDir) / (split + ".bin");
    if (!fs::exists(p))
        throw std::runtime_error("dataset file not found: " + p.string());
    return loadDataset(p.string());
}

// Training entry shared by train and finetune: runs, saves, reports.
void runTraining(const char* command, MarsNet& net, const WindowedDataset& trainSet,
                 const WindowedDataset& testSet, const RunSettings& s,
                 std::vector<FileStamp> inputs, const std::string& outDir,
                 const CommandContext& ctx) {
    Stage stage(outDir, ctx.overwrite);
    outOf(ctx) << command << ": MARS-" << toString(s.fusion) << ", " << trainSet.sampleCount()
               << " train / " << testSet.sampleCount() << " test windows, "
               << trainSet.channels << " channels" << std::endl;

    const RunReport report = train(net, trainSet, testSet, s.training, progressPrinter(ctx));

    saveModel(net, stage.path("model.ckpt"), stage.path("model.spec"));
    writeRunReport(report, stage.dir().string());

    RunManifest m;
    m.command = command;
    m.seed = s.masterSeed;
    m.config = echoSettings(s);
    m.inputs = std::move(inputs);
    m.outputs.push_back(stampFile(stage.path("model.ckpt"), stage.dir().string()));
    m.outputs.push_back(stampFile(stage.path("model.spec"), stage.dir().string()));
    stampReportFiles(m, stage);
    writeManifest(m, stage.dir().string());
    stage.commit();

    outOf(ctx) << command << ": MARS-" << toString(s.fusion) << " epochs=" << report.epochsRun
               << " converged=" << epochsToConverge(report)
               << " test_accuracy=" << report.finalTest.accuracy << " -> " << outDir << std::endl;
}

}  // namespace

int cmdSynth(const std::string& outDir, const CommandContext& ctx) {
    return guarded(ctx, "synth", [&] {
        const RunSettings s = resolveSettings(loadConfig(ctx));
        Stage stage(outDir, ctx.overwrite);

        const RawCorpus corpus = buildCorpus(s.corpus, defaultSkeleton(), s.corpusSensors);
        const std::string corpusDir = stage.path("corpus");
        fs::create_directories(corpusDir);
        saveCorpus(corpus, corpusDir);

        const DatasetPair pair = prepareDatasets(corpus, s.signal);
        saveDataset(pair.train, stage.path("train.bin"));
        saveDataset(pair.test, stage.path("test.bin"));

        RunManifest m;
        m.command = "synth";
        m.seed = s.masterSeed;
        m.config = echoSettings(s);
        m.outputs.push_back(
            stampFile((fs::path(corpusDir) / "manifest.json").string(), stage.dir().string()));
        m.outputs.push_back(stampFile(stage.path("train.bin"), stage.dir().string()));
        m.outputs.push_back(stampFile(stage.path("test.bin"), stage.dir().string()));
        writeManifest(m, stage.dir().string());
        stage.commit();

        outOf(ctx) << "synth: " << corpus.sequences.size() << " sequences, "
                   << pair.train.sampleCount() << " train / " << pair.test.sampleCount()
                   << " test windows, " << pair.train.channels << " channels -> " << outDir
                   << std::endl;
    });
}

int cmdTrain(const std::string& datasetDir, const std::string& outDir, const CommandContext& ctx) {
    return guarded(ctx, "train", [&] {
        const RunSettings s = resolveSettings(loadConfig(ctx));
        verifyInputsDir(datasetDir);
        const WindowedDataset trainSet = loadSplit(datasetDir, "train");
        const WindowedDataset testSet = loadSplit(datasetDir, "test");

        const auto spec = ArchitectureSpec::standard(trainSet.channels, trainSet.window,
                                                     trainSet.classCount);
        MarsNet net(spec, s.fusion, s.modelSeed);

        std::vector<FileStamp> inputs = {
            stampFile((fs::path(datasetDir) / "train.bin").string(), outDir),
            stampFile((fs::path(datasetDir) / "test.bin").string(), outDir),
        };
        runTraining("train", net, trainSet, testSet, s, std::move(inputs), outDir, ctx);
    });
}

int cmdFinetune(const std::string& modelDir, const std::string& datasetDir,
                const std::string& outDir, const CommandContext& ctx) {
    return guarded(ctx, "finetune", [&] {
        const RunSettings s = resolveSettings(loadConfig(ctx));
        verifyInputsDir(modelDir);
        verifyInputsDir(datasetDir);

        const std::string ckpt = (fs::path(modelDir) / "model.ckpt").string();
        const std::string spec = (fs::path(modelDir) / "model.spec").string();
        const MarsNet source = loadModel(ckpt, spec);
        const WindowedDataset trainSet = loadSplit(datasetDir, "train");
        const WindowedDataset testSet = loadSplit(datasetDir, "test");

        if (source.spec().channels != trainSet.channels || source.spec().window != trainSet.window)
            throw std::invalid_argument(
                "finetune: checkpoint expects " + std::to_string(source.spec().channels) + "x" +
                std::to_string(source.spec().window) + " windows, dataset provides " +
                std::to_string(trainSet.channels) + "x" + std::to_string(trainSet.window));

        MarsNet net = makeFinetuneModel(source, trainSet.classCount, s.fusion, s.headSeed);

        std::vector<FileStamp> inputs = {
            stampFile(ckpt, outDir),
            stampFile(spec, outDir),
            stampFile((fs::path(datasetDir) / "train.bin").string(), outDir),
            stampFile((fs::path(datasetDir) / "test.bin").string(), outDir),
        };
        runTraining("finetune", net, trainSet, testSet, s, std::move(inputs), outDir, ctx);
    });
}

int cmdEval(const std::string& modelDir, const std::string& datasetDir, const std::string& outDir,
            const CommandContext& ctx) {
    return guarded(ctx, "eval", [&] {
        const RunSettings s = resolveSettings(loadConfig(ctx));
        Stage stage(outDir, ctx.overwrite);
        verifyInputsDir(modelDir);
        verifyInputsDir(datasetDir);

        const std::string ckpt = (fs::path(modelDir) / "model.ckpt").string();
        const std::string spec = (fs::path(modelDir) / "model.spec").string();
        const MarsNet net = loadModel(ckpt, spec);
        const WindowedDataset ds = loadSplit(datasetDir, s.evalSplit);

        ConfusionMatrix cm;
        const ClassifierMetrics metrics = evaluate(net, ds, &cm);

        char line[200];
        std::snprintf(line, sizeof(line),
                      "MARS-%s split=%s samples=%d accuracy=%.17g precision=%.17g f1=%.17g",
                      toString(net.variant()).c_str(), s.evalSplit.c_str(), ds.sampleCount(),
                      metrics.accuracy, metrics.precision, metrics.f1);
        outOf(ctx) << line << std::endl;

        {
            std::ofstream csv(stage.path("eval.csv"));
            if (!csv) throw std::runtime_error("cannot write " + stage.path("eval.csv"));
            csv << "model,split,samples,accuracy,precision,f1\n";
            char row[200];
            std::snprintf(row, sizeof(row), "MARS-%s,%s,%d,%.17g,%.17g,%.17g\n",
                          toString(net.variant()).c_str(), s.evalSplit.c_str(), ds.sampleCount(),
                          metrics.accuracy, metrics.precision, metrics.f1);
            csv << row;
        }

        RunManifest m;
        m.command = "eval";
        m.seed = s.masterSeed;
        m.config = echoSettings(s);
        m.inputs = {
            stampFile(ckpt, outDir),
            stampFile(spec, outDir),
            stampFile((fs::path(datasetDir) / (s.evalSplit + ".bin")).string(), outDir),
        };
        m.outputs.push_back(stampFile(stage.path("eval.csv"), stage.dir().string()));
        writeManifest(m, stage.dir().string());
        stage.commit();
    });
}

int cmdAblate(const std::string& corpusDir, const std::string& outDir, const CommandContext& ctx) {
    return guarded(ctx, "ablate", [&] {
        const RunSettings s = resolveSettings(loadConfig(ctx));
        const RawCorpus corpus = loadCorpus(corpusDir);
        const std::vector<SensorSet> sets = resolveSensorSets(s.ablationSets);

        Stage stage(outDir, ctx.overwrite);
        auto progress = [&](const AblationRun& run) {
            outOf(ctx) << "ablate: " << run.setName << " (" << run.channels
                       << " channels) epochs=" << run.report.epochsRun
                       << " test_accuracy=" << run.report.finalTest.accuracy << std::endl;
        };
        const std::vector<AblationRun> runs =
            ablateSensors(corpus, sets, s.signal, s.fusion, s.training, s.modelSeed, progress);

        RunManifest m;
        m.command = "ablate";
        m.seed = s.masterSeed;
        m.config = echoSettings(s);
        m.inputs.push_back(
            stampFile((fs::path(corpusDir) / "manifest.json").string(), outDir));

        {
            std::ofstream table(stage.path("ablation.csv"));
            if (!table) throw std::runtime_error("cannot write " + stage.path("ablation.csv"));
            table << "set,channels,epochs_run,epochs_to_converge,final_test_accuracy,"
                     "final_test_precision,final_test_f1,total_seconds\n";
            for (const auto& run : runs) {
                char row[240];
                std::snprintf(row, sizeof(row), "%s,%d,%d,%d,%.17g,%.17g,%.17g,%.17g\n",
                              run.setName.c_str(), run.channels, run.report.epochsRun,
                              epochsToConverge(run.report), run.report.finalTest.accuracy,
                              run.report.finalTest.precision, run.report.finalTest.f1,
                              run.report.totalSeconds);
                table << row;
            }
        }
        m.outputs.push_back(stampFile(stage.path("ablation.csv"), stage.dir().string()));

        for (const auto& run : runs) {
            const std::string setDir = stage.path(run.setName);
            fs::create_directories(setDir);
            writeRunReport(run.report, setDir);
            for (const char* name :
                 {"epochs.csv", "lr.csv", "summary.txt", "confusion.csv", "curves.svg"})
                m.outputs.push_back(
                    stampFile((fs::path(setDir) / name).string(), stage.dir().string()));
        }
        writeManifest(m, stage.dir().string());
        stage.commit();

        outOf(ctx) << "ablate: " << runs.size() << " sensor sets -> " << outDir << std::endl;
    });
}

int cmdReport(const std::string& runDir, const CommandContext& ctx) {
    return guarded(ctx, "report", [&] {
        const RunReport report = readRunReport(runDir);
        outOf(ctx) << summaryText(report);
    });
}

}  // namespace mars
