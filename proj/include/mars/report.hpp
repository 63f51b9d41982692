#pragma once

#include <string>

#include "mars/trainer.hpp"

namespace mars {

// Files a training run leaves in its directory.
struct ReportPaths {
    std::string epochsCsv;    // per-epoch loss/accuracy rows
    std::string lrCsv;        // per-iteration learning-rate log
    std::string summaryTxt;   // human-readable run summary
    std::string confusionCsv; // test confusion matrix, rows = actual class
    std::string curvesSvg;    // accuracy/loss curves over epochs
};
ReportPaths reportPaths(const std::string& dir);

void writeRunReport(const RunReport& report, const std::string& dir);

// Rebuilds a RunReport from the files above — enough for re-printing and
// re-plotting; per-epoch wall-clock values survive the round trip.
RunReport readRunReport(const std::string& dir);

std::string summaryText(const RunReport& report);
std::string curvesSvgText(const RunReport& report);

}  // namespace mars
