#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace mars {

// Process exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;      // config does not parse or has bad keys/values
inline constexpr int kExitValidation = 3;  // shape or content mismatch between artifacts
inline constexpr int kExitIo = 4;          // missing, unreadable, or refused-to-clobber files

struct CommandContext {
    std::string configPath;  // empty = built-in defaults
    std::vector<std::pair<std::string, std::string>> overrides;  // dotted key, value
    bool overwrite = false;
    std::ostream* out = nullptr;  // defaults to std::cout
    std::ostream* err = nullptr;  // defaults to std::cerr
};

// Each command stages its artifacts in a scratch directory and renames it
// into place on success, so a failed run leaves nothing behind. An existing
// output is replaced only under --overwrite, and only when it carries a
// manifest (unknown directories are never deleted).

// Corpus + windowed train/test datasets from the configured generator.
int cmdSynth(const std::string& outDir, const CommandContext& ctx);
// From-scratch training on a dataset directory's train/test files.
int cmdTrain(const std::string& datasetDir, const std::string& outDir, const CommandContext& ctx);
// Pretrained encoders/decoders, fresh fusion stage, then training on the
// target dataset.
int cmdFinetune(const std::string& modelDir, const std::string& datasetDir,
                const std::string& outDir, const CommandContext& ctx);
// Metrics of a saved model on one split; prints one summary line and writes
// eval.csv. Split chosen by "eval.split" (train|test, default test).
int cmdEval(const std::string& modelDir, const std::string& datasetDir, const std::string& outDir,
            const CommandContext& ctx);
// One training run per configured sensor subset over a saved corpus.
int cmdAblate(const std::string& corpusDir, const std::string& outDir, const CommandContext& ctx);
// Prints the summary of an existing run directory; read-only.
int cmdReport(const std::string& runDir, const CommandContext& ctx);

}  // namespace mars
