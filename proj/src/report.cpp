#include "mars/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mars {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream openOut(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::vector<std::string> splitCsv(const std::string& line) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(line);
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

double toDouble(const std::string& s, const std::string& where) {
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw std::runtime_error("malformed number '" + s + "' in " + where);
    }
}

// Maps data coordinates into the plot rectangle of the curves figure.
struct Frame {
    double x0, y0, w, h;     // pixel rectangle, y grows downward
    double xMin, xMax, yMin, yMax;
    double px(double x) const {
        const double t = xMax > xMin ? (x - xMin) / (xMax - xMin) : 0.5;
        return x0 + t * w;
    }
    double py(double y) const {
        const double t = yMax > yMin ? (y - yMin) / (yMax - yMin) : 0.5;
        return y0 + h - t * h;
    }
};

std::string polyline(const Frame& f, const std::vector<double>& ys, const char* color) {
    std::ostringstream out;
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
        if (i) out << ' ';
        out << f.px(static_cast<double>(i)) << ',' << f.py(ys[i]);
    }
    out << "\"/>\n";
    return out.str();
}

}  // namespace

ReportPaths reportPaths(const std::string& dir) {
    const fs::path base(dir);
    return {
        (base / "epochs.csv").string(),    (base / "lr.csv").string(),
        (base / "summary.txt").string(),   (base / "confusion.csv").string(),
        (base / "curves.svg").string(),
    };
}

std::string summaryText(const RunReport& report) {
    std::ostringstream out;
    out << "model: MARS-" << report.variant << '\n';
    out << "epochs_run: " << report.epochsRun << '\n';
    out << "total_iterations: " << report.totalIterations << '\n';
    out << "converged_epoch: " << report.convergedEpoch << '\n';
    out << "epochs_to_converge: " << epochsToConverge(report) << '\n';
    out << "final_train_accuracy: " << num(report.finalTrain.accuracy) << '\n';
    out << "final_train_precision: " << num(report.finalTrain.precision) << '\n';
    out << "final_train_f1: " << num(report.finalTrain.f1) << '\n';
    out << "final_test_accuracy: " << num(report.finalTest.accuracy) << '\n';
    out << "final_test_precision: " << num(report.finalTest.precision) << '\n';
    out << "final_test_f1: " << num(report.finalTest.f1) << '\n';
    out << "total_seconds: " << num(report.totalSeconds) << '\n';
    return out.str();
}

std::string curvesSvgText(const RunReport& report) {
    const int W = 720, H = 420;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
    out << "  <rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "  <text x=\"20\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">MARS-"
        << report.variant << " training curves</text>\n";

    if (report.epochs.empty()) {
        out << "  <text x=\"20\" y=\"60\" font-family=\"sans-serif\" font-size=\"13\">no epochs "
               "recorded</text>\n</svg>\n";
        return out.str();
    }

    std::vector<double> trainAcc, testAcc, loss;
    for (const auto& e : report.epochs) {
        trainAcc.push_back(e.trainAccuracy);
        if (e.testAccuracy >= 0.0) testAcc.push_back(e.testAccuracy);
        loss.push_back(e.meanLoss);
    }
    double lossMax = 0.0;
    for (double v : loss) lossMax = std::max(lossMax, std::fabs(v));
    if (lossMax <= 0.0) lossMax = 1.0;

    Frame acc{60, 50, W - 90.0, 220, 0.0, std::max<double>(1.0, loss.size() - 1.0), 0.0, 1.0};
    Frame lossFrame{60, 300, W - 90.0, 90, acc.xMin, acc.xMax, 0.0, lossMax};

    // axes and accuracy gridlines
    out << "  <g stroke=\"#444\" stroke-width=\"1\">\n";
    out << "    <line x1=\"" << acc.x0 << "\" y1=\"" << acc.y0 + acc.h << "\" x2=\""
        << acc.x0 + acc.w << "\" y2=\"" << acc.y0 + acc.h << "\"/>\n";
    out << "    <line x1=\"" << acc.x0 << "\" y1=\"" << acc.y0 << "\" x2=\"" << acc.x0
        << "\" y2=\"" << acc.y0 + acc.h << "\"/>\n";
    out << "    <line x1=\"" << lossFrame.x0 << "\" y1=\"" << lossFrame.y0 + lossFrame.h
        << "\" x2=\"" << lossFrame.x0 + lossFrame.w << "\" y2=\"" << lossFrame.y0 + lossFrame.h
        << "\"/>\n";
    out << "  </g>\n";
    for (double tick : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        out << "  <line x1=\"" << acc.x0 << "\" y1=\"" << acc.py(tick) << "\" x2=\""
            << acc.x0 + acc.w << "\" y2=\"" << acc.py(tick)
            << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
        out << "  <text x=\"" << acc.x0 - 8 << "\" y=\"" << acc.py(tick) + 4
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << tick
            << "</text>\n";
    }

    out << polyline(acc, trainAcc, "#1f77b4");
    if (testAcc.size() == trainAcc.size()) out << polyline(acc, testAcc, "#d62728");
    out << polyline(lossFrame, loss, "#2ca02c");

    out << "  <text x=\"60\" y=\"290\" font-family=\"sans-serif\" font-size=\"12\" "
           "fill=\"#1f77b4\">train accuracy</text>\n";
    if (testAcc.size() == trainAcc.size())
        out << "  <text x=\"160\" y=\"290\" font-family=\"sans-serif\" font-size=\"12\" "
               "fill=\"#d62728\">test accuracy</text>\n";
    out << "  <text x=\"255\" y=\"290\" font-family=\"sans-serif\" font-size=\"12\" "
           "fill=\"#2ca02c\">mean loss (0.."
        << num(lossMax) << ")</text>\n";
    out << "  <text x=\"" << acc.x0 + acc.w / 2 << "\" y=\"" << H - 8
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n";
    out << "</svg>\n";
    return out.str();
}

void writeRunReport(const RunReport& report, const std::string& dir) {
    const ReportPaths paths = reportPaths(dir);

    {
        auto out = openOut(paths.epochsCsv);
        out << "epoch,mean_loss,train_accuracy,test_accuracy,seconds\n";
        for (const auto& e : report.epochs)
            out << e.epoch << ',' << num(e.meanLoss) << ',' << num(e.trainAccuracy) << ','
                << num(e.testAccuracy) << ',' << num(e.seconds) << '\n';
    }
    {
        auto out = openOut(paths.lrCsv);
        out << "iteration,lr\n";
        for (std::size_t i = 0; i < report.lrAfter.size(); ++i)
            out << (i + 1) << ',' << num(report.lrAfter[i]) << '\n';
    }
    {
        auto out = openOut(paths.summaryTxt);
        out << summaryText(report);
    }
    {
        auto out = openOut(paths.confusionCsv);
        const int k = report.testConfusion.classCount();
        for (int c = 0; c < k; ++c) out << "predicted_" << c << (c + 1 < k ? ',' : '\n');
        for (int a = 0; a < k; ++a) {
            for (int p = 0; p < k; ++p) out << report.testConfusion.at(a, p) << (p + 1 < k ? "," : "\n");
        }
    }
    {
        auto out = openOut(paths.curvesSvg);
        out << curvesSvgText(report);
    }
}

RunReport readRunReport(const std::string& dir) {
    const ReportPaths paths = reportPaths(dir);
    RunReport report;

    {
        std::ifstream in(paths.summaryTxt);
        if (!in) throw std::runtime_error("cannot open " + paths.summaryTxt);
        std::string line;
        while (std::getline(in, line)) {
            const std::size_t colon = line.find(": ");
            if (colon == std::string::npos) continue;
            const std::string key = line.substr(0, colon);
            const std::string value = line.substr(colon + 2);
            if (key == "model")
                report.variant = value.rfind("MARS-", 0) == 0 ? value.substr(5) : value;
            else if (key == "epochs_run")
                report.epochsRun = static_cast<int>(toDouble(value, key));
            else if (key == "total_iterations")
                report.totalIterations = static_cast<int>(toDouble(value, key));
            else if (key == "converged_epoch")
                report.convergedEpoch = static_cast<int>(toDouble(value, key));
            else if (key == "final_train_accuracy")
                report.finalTrain.accuracy = toDouble(value, key);
            else if (key == "final_train_precision")
                report.finalTrain.precision = toDouble(value, key);
            else if (key == "final_train_f1")
                report.finalTrain.f1 = toDouble(value, key);
            else if (key == "final_test_accuracy")
                report.finalTest.accuracy = toDouble(value, key);
            else if (key == "final_test_precision")
                report.finalTest.precision = toDouble(value, key);
            else if (key == "final_test_f1")
                report.finalTest.f1 = toDouble(value, key);
            else if (key == "total_seconds")
                report.totalSeconds = toDouble(value, key);
        }
    }
    {
        std::ifstream in(paths.epochsCsv);
        if (!in) throw std::runtime_error("cannot open " + paths.epochsCsv);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto cells = splitCsv(line);
            if (cells.size() != 5) throw std::runtime_error("malformed row in " + paths.epochsCsv);
            EpochStats e;
            e.epoch = static_cast<int>(toDouble(cells[0], "epochs.csv"));
            e.meanLoss = toDouble(cells[1], "epochs.csv");
            e.trainAccuracy = toDouble(cells[2], "epochs.csv");
            e.testAccuracy = toDouble(cells[3], "epochs.csv");
            e.seconds = toDouble(cells[4], "epochs.csv");
            report.epochs.push_back(e);
        }
    }
    {
        std::ifstream in(paths.lrCsv);
        if (!in) throw std::runtime_error("cannot open " + paths.lrCsv);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto cells = splitCsv(line);
            if (cells.size() != 2) throw std::runtime_error("malformed row in " + paths.lrCsv);
            report.lrAfter.push_back(toDouble(cells[1], "lr.csv"));
        }
    }
    {
        std::ifstream in(paths.confusionCsv);
        if (!in) throw std::runtime_error("cannot open " + paths.confusionCsv);
        std::string line;
        if (!std::getline(in, line)) throw std::runtime_error("empty " + paths.confusionCsv);
        const int k = static_cast<int>(splitCsv(line).size());
        ConfusionMatrix cm(k);
        for (int a = 0; a < k; ++a) {
            if (!std::getline(in, line))
                throw std::runtime_error("truncated " + paths.confusionCsv);
            const auto cells = splitCsv(line);
            if (static_cast<int>(cells.size()) != k)
                throw std::runtime_error("ragged row in " + paths.confusionCsv);
            for (int p = 0; p < k; ++p) {
                const long count = std::lround(toDouble(cells[p], "confusion.csv"));
                for (long i = 0; i < count; ++i) cm.add(a, p);
            }
        }
        report.testConfusion = cm;
    }
    return report;
}

}  // namespace mars
