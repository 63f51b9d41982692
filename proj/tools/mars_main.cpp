// mars: synthesize virtual-IMU corpora, train the fusion network, run
// knowledge transfer, and report results. Every run is driven by a config
// file plus flag overrides and stamped with a manifest.

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "mars/commands.hpp"
#include "mars/config.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::string seed;
    std::string fusion;
    std::string sensors;
    std::vector<std::string> sets;
    bool overwrite = false;
};

void addCommon(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "Run configuration file (INI sections)");
    cmd->add_option("--seed", f.seed, "Master seed, overrides run.seed");
    cmd->add_option("--fusion", f.fusion, "Fusion variant: v1, v2, or v3");
    cmd->add_option("--sensors", f.sensors, "Comma-separated sensors for windowing");
    cmd->add_option("--set", f.sets, "Extra override as section.key=value")
        ->type_name("KEY=VALUE");
    cmd->add_flag("--overwrite", f.overwrite, "Replace an existing output directory");
}

mars::CommandContext contextOf(const CommonFlags& f) {
    mars::CommandContext ctx;
    ctx.configPath = f.config;
    ctx.overwrite = f.overwrite;
    if (!f.seed.empty()) ctx.overrides.emplace_back("run.seed", f.seed);
    if (!f.fusion.empty()) ctx.overrides.emplace_back("architecture.fusion", f.fusion);
    if (!f.sensors.empty()) ctx.overrides.emplace_back("signal.sensors", f.sensors);
    for (const std::string& kv : f.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw mars::ConfigError("--set expects section.key=value, got '" + kv + "'");
        ctx.overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return ctx;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Virtual-IMU activity recognition: synthesis, training, transfer"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string outDir, datasetDir, modelDir, corpusDir, runDir;
    int rc = 0;

    auto* synth = app.add_subcommand("synth", "Generate a corpus and windowed train/test sets");
    addCommon(synth, flags);
    synth->add_option("--out", outDir, "Output directory")->required();
    synth->callback([&] { rc = mars::cmdSynth(outDir, contextOf(flags)); });

    auto* train = app.add_subcommand("train", "Train a model from scratch on a dataset");
    addCommon(train, flags);
    train->add_option("dataset", datasetDir, "Dataset directory from synth")->required();
    train->add_option("--out", outDir, "Output directory")->required();
    train->callback([&] { rc = mars::cmdTrain(datasetDir, outDir, contextOf(flags)); });

    auto* finetune =
        app.add_subcommand("finetune", "Fine-tune a pretrained model with a fresh fusion head");
    addCommon(finetune, flags);
    finetune->add_option("model", modelDir, "Run directory holding the pretrained model")
        ->required();
    finetune->add_option("dataset", datasetDir, "Target dataset directory")->required();
    finetune->add_option("--out", outDir, "Output directory")->required();
    finetune->callback(
        [&] { rc = mars::cmdFinetune(modelDir, datasetDir, outDir, contextOf(flags)); });

    auto* eval = app.add_subcommand("eval", "Evaluate a saved model on one dataset split");
    addCommon(eval, flags);
    eval->add_option("model", modelDir, "Run directory holding the model")->required();
    eval->add_option("dataset", datasetDir, "Dataset directory")->required();
    eval->add_option("--out", outDir, "Output directory")->required();
    eval->callback([&] { rc = mars::cmdEval(modelDir, datasetDir, outDir, contextOf(flags)); });

    auto* ablate = app.add_subcommand("ablate", "Train once per configured sensor subset");
    addCommon(ablate, flags);
    ablate->add_option("corpus", corpusDir, "Corpus directory (synth writes one under corpus/)")
        ->required();
    ablate->add_option("--out", outDir, "Output directory")->required();
    ablate->callback([&] { rc = mars::cmdAblate(corpusDir, outDir, contextOf(flags)); });

    auto* report = app.add_subcommand("report", "Print the summary of an existing run directory");
    report->add_option("run", runDir, "Run directory")->required();
    report->callback([&] { rc = mars::cmdReport(runDir, {}); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : mars::kExitConfig;
    } catch (const mars::ConfigError& e) {
        std::cerr << "mars: " << e.what() << '\n';
        return mars::kExitConfig;
    }
    return rc;
}
