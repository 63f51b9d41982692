#include "mars/motion.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mars/rng.hpp"

namespace mars {
namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// Joint indices of the default 24-joint humanoid; scripts are written
// against that skeleton.
enum JointId {
    kPelvis = 0, kLHip = 1, kRHip = 2, kSpine1 = 3, kLKnee = 4, kRKnee = 5,
    kSpine2 = 6, kLAnkle = 7, kRAnkle = 8, kSpine3 = 9, kNeck = 12, kHead = 15,
    kLShoulder = 16, kRShoulder = 17, kLElbow = 18, kRElbow = 19,
    kLWrist = 20, kRWrist = 21,
};
constexpr int kJointCount = 24;

struct ScriptParams {
    double amp = 1.0;    // overall amplitude scale
    double omega = 0.0;  // angular frequency, rad/s
    double phase = 0.0;
    double phase2 = 0.0;
    double extra = 0.0;  // script-specific draw in [0, 1)
};

ScriptParams drawParams(Rng& rng, double freqLo, double freqHi) {
    ScriptParams p;
    p.amp = rng.uniform(0.85, 1.15);
    p.omega = kTwoPi * rng.uniform(freqLo, freqHi);
    p.phase = rng.uniform(0.0, kTwoPi);
    p.phase2 = rng.uniform(0.0, kTwoPi);
    p.extra = rng.uniform();
    return p;
}

using PoseFn = std::function<void(double t, PoseFrame& pose)>;

void scriptUpperBody(const ScriptParams& p, double t, PoseFrame& pose) {
    const double s = std::sin(p.omega * t + p.phase);
    const double wobble = 0.08 * std::sin(2.0 * p.omega * t + p.phase2);
    const double raise = p.amp * (0.8 * s + wobble);
    pose.jointRotations[kLShoulder] = rotationY(raise);
    pose.jointRotations[kRShoulder] = rotationY(raise);  // mirrored arm goes opposite
    const double flex = 0.25 * p.amp * (1.0 + std::sin(p.omega * t + p.phase2)) * 0.5;
    pose.jointRotations[kLElbow] = rotationZ(flex);
    pose.jointRotations[kRElbow] = rotationZ(-flex);
}

void scriptLowerBody(const ScriptParams& p, double t, PoseFrame& pose) {
    const double d = 0.5 * (1.0 - std::cos(p.omega * t + p.phase));
    pose.jointRotations[kLHip] = rotationX(0.6 * p.amp * d);
    pose.jointRotations[kRHip] = rotationX(0.6 * p.amp * d);
    pose.jointRotations[kLKnee] = rotationX(-1.1 * p.amp * d);
    pose.jointRotations[kRKnee] = rotationX(-1.1 * p.amp * d);
    pose.jointRotations[kLAnkle] = rotationX(0.5 * p.amp * d);
    pose.jointRotations[kRAnkle] = rotationX(0.5 * p.amp * d);
    pose.rootTranslation = Vec3(0, 0, -0.22 * p.amp * d);
}

void scriptLocomotion(const ScriptParams& p, double t, PoseFrame& pose) {
    const double s = std::sin(p.omega * t + p.phase);
    pose.jointRotations[kLHip] = rotationX(0.5 * p.amp * s);
    pose.jointRotations[kRHip] = rotationX(-0.5 * p.amp * s);
    const double flexL = 0.35 * p.amp * 0.5 * (1.0 + std::sin(p.omega * t + p.phase - 1.0));
    const double flexR = 0.35 * p.amp * 0.5 * (1.0 + std::sin(p.omega * t + p.phase - 1.0 + 3.14159265358979));
    pose.jointRotations[kLKnee] = rotationX(-flexL);
    pose.jointRotations[kRKnee] = rotationX(-flexR);
    pose.jointRotations[kLShoulder] = rotationZ(-0.25 * p.amp * s);
    pose.jointRotations[kRShoulder] = rotationZ(-0.25 * p.amp * s);
    pose.jointRotations[kSpine1] = rotationZ(0.08 * p.amp * s);
    const double speed = 0.7 * p.amp;
    pose.rootTranslation =
        Vec3(0, speed * t, 0.02 * p.amp * std::sin(2.0 * p.omega * t + p.phase2));
}

void scriptJumping(const ScriptParams& p, double t, PoseFrame& pose) {
    const double c = 0.5 * (1.0 - std::cos(p.omega * t + p.phase));
    const double crouch = 1.0 - c;
    pose.jointRotations[kLHip] = rotationX(0.5 * p.amp * crouch);
    pose.jointRotations[kRHip] = rotationX(0.5 * p.amp * crouch);
    pose.jointRotations[kLKnee] = rotationX(-0.8 * p.amp * crouch);
    pose.jointRotations[kRKnee] = rotationX(-0.8 * p.amp * crouch);
    pose.jointRotations[kLAnkle] = rotationX(-0.2 * p.amp * crouch);
    pose.jointRotations[kRAnkle] = rotationX(-0.2 * p.amp * crouch);
    pose.jointRotations[kLShoulder] = rotationY(0.35 * p.amp * crouch);
    pose.jointRotations[kRShoulder] = rotationY(-0.35 * p.amp * crouch);
    pose.rootTranslation = Vec3(0, 0, 0.3 * p.amp * c);
}

void scriptComputerWorks(const ScriptParams& p, double t, PoseFrame& pose) {
    const double typing = std::sin(p.omega * t + p.phase);
    const double typing2 = std::sin(1.7 * p.omega * t + p.phase2);
    pose.jointRotations[kLElbow] = rotationZ(0.9 + 0.06 * p.amp * typing);
    pose.jointRotations[kRElbow] = rotationZ(-0.9 - 0.06 * p.amp * typing2);
    pose.jointRotations[kLWrist] = rotationX(0.08 * p.amp * typing2);
    pose.jointRotations[kRWrist] = rotationX(0.08 * p.amp * typing);
    pose.jointRotations[kHead] = rotationX(0.03 * std::sin(0.3 * p.omega * t + p.phase));
}

void scriptArmCircles(const ScriptParams& p, double t, PoseFrame& pose) {
    const double a = 0.45 * p.amp;
    const double u = p.omega * t + p.phase;
    const double delta = p.extra < 0.5 ? 0.0 : 3.14159265358979;
    pose.jointRotations[kLShoulder] = rotationX(a * std::sin(u)) * rotationY(a * std::cos(u));
    pose.jointRotations[kRShoulder] =
        rotationX(a * std::sin(u + delta)) * rotationY(-a * std::cos(u + delta));
}

void scriptTorsoTwist(const ScriptParams& p, double t, PoseFrame& pose) {
    const double s = std::sin(p.omega * t + p.phase);
    pose.jointRotations[kSpine1] = rotationZ(0.35 * p.amp * s);
    pose.jointRotations[kSpine2] = rotationZ(0.25 * p.amp * s);
    pose.jointRotations[kNeck] = rotationZ(-0.2 * p.amp * s);
    pose.jointRotations[kLShoulder] = rotationY(0.15);
    pose.jointRotations[kRShoulder] = rotationY(-0.15);
}

void scriptMarching(const ScriptParams& p, double t, PoseFrame& pose) {
    const double sL = std::sin(p.omega * t + p.phase);
    const double sR = std::sin(p.omega * t + p.phase + 3.14159265358979);
    pose.jointRotations[kLHip] = rotationX(0.75 * p.amp * 0.5 * (1.0 + sL));
    pose.jointRotations[kRHip] = rotationX(0.75 * p.amp * 0.5 * (1.0 + sR));
    pose.jointRotations[kLKnee] = rotationX(-0.85 * p.amp * 0.5 * (1.0 + std::sin(p.omega * t + p.phase - 0.6)));
    pose.jointRotations[kRKnee] =
        rotationX(-0.85 * p.amp * 0.5 * (1.0 + std::sin(p.omega * t + p.phase - 0.6 + 3.14159265358979)));
    pose.jointRotations[kLShoulder] = rotationZ(-0.3 * p.amp * sL);
    pose.jointRotations[kRShoulder] = rotationZ(-0.3 * p.amp * sL);
    pose.rootTranslation = Vec3(0, 0, 0.015 * std::sin(2.0 * p.omega * t + p.phase2));
}

struct ScriptEntry {
    const char* name;
    double freqLo, freqHi;
    void (*fn)(const ScriptParams&, double, PoseFrame&);
};

constexpr ScriptEntry kScripts[] = {
    {"upper_body", 0.80, 1.20, scriptUpperBody},
    {"lower_body", 0.45, 0.75, scriptLowerBody},
    {"locomotion", 0.85, 1.25, scriptLocomotion},
    {"jumping", 1.30, 1.70, scriptJumping},
    {"computer_works", 1.60, 2.30, scriptComputerWorks},
    {"arm_circles", 0.65, 1.05, scriptArmCircles},
    {"torso_twist", 0.55, 0.85, scriptTorsoTwist},
    {"marching", 0.90, 1.30, scriptMarching},
};

}  // namespace

int Taxonomy::indexOf(const std::string& name) const {
    for (const auto& c : classes)
        if (c.name == name) return c.id;
    return -1;
}

Taxonomy targetTaxonomy() {
    Taxonomy t;
    const char* names[] = {"upper_body", "lower_body", "locomotion", "jumping", "computer_works"};
    for (int i = 0; i < 5; ++i) t.classes.push_back({i, names[i]});
    return t;
}

Taxonomy sourceTaxonomy() {
    Taxonomy t = targetTaxonomy();
    const char* extra[] = {"arm_circles", "torso_twist", "marching"};
    for (int i = 0; i < 3; ++i) t.classes.push_back({5 + i, extra[i]});
    return t;
}

MotionSequence generateMotion(const std::string& className, double durationSec, double frameRate,
                              std::uint64_t seed) {
    if (durationSec <= 0.0) throw std::invalid_argument("generateMotion: duration must be positive");
    if (frameRate <= 0.0) throw std::invalid_argument("generateMotion: frame rate must be positive");
    const ScriptEntry* entry = nullptr;
    for (const auto& e : kScripts)
        if (className == e.name) entry = &e;
    if (!entry) throw std::invalid_argument("generateMotion: unknown activity '" + className + "'");

    Rng rng(seed);
    const ScriptParams params = drawParams(rng, entry->freqLo, entry->freqHi);

    MotionSequence seq;
    seq.frameRate = frameRate;
    seq.className = className;
    const int frames = std::max(3, static_cast<int>(std::lround(durationSec * frameRate)));
    seq.frames.resize(frames);
    for (int f = 0; f < frames; ++f) {
        PoseFrame& pose = seq.frames[f];
        pose.jointRotations.assign(kJointCount, Mat3::Identity());
        entry->fn(params, f / frameRate, pose);
    }
    return seq;
}

void applyNoise(std::vector<std::vector<VirtualImuSample>>& streams, const NoiseModel& noise,
                std::uint64_t seed) {
    if (noise.accelNoiseStd < 0 || noise.accelBiasStd < 0 || noise.orientationNoiseRad < 0)
        throw std::invalid_argument("applyNoise: negative noise level");
    for (std::size_t s = 0; s < streams.size(); ++s) {
        Rng rng(mixSeed(seed, s));
        const Vec3 bias(rng.normal(0, noise.accelBiasStd), rng.normal(0, noise.accelBiasStd),
                        rng.normal(0, noise.accelBiasStd));
        for (auto& sample : streams[s]) {
            sample.acceleration += bias + Vec3(rng.normal(0, noise.accelNoiseStd),
                                               rng.normal(0, noise.accelNoiseStd),
                                               rng.normal(0, noise.accelNoiseStd));
            if (noise.orientationNoiseRad > 0) {
                Vec3 axis(rng.normal(), rng.normal(), rng.normal());
                const double angle = rng.normal(0, noise.orientationNoiseRad);
                if (axis.norm() > 1e-12 && angle != 0.0)
                    sample.orientation =
                        reorthonormalize(axisAngleRotation(axis, angle) * sample.orientation);
            }
        }
    }
}

RawCorpus buildCorpus(const CorpusSpec& spec, const Skeleton& skel,
                      const std::vector<std::string>& sensorNames) {
    if (spec.taxonomy.classes.empty()) throw std::invalid_argument("buildCorpus: empty taxonomy");
    if (spec.sequencesPerClass <= 0)
        throw std::invalid_argument("buildCorpus: sequencesPerClass must be positive");
    if (spec.durationMinSec <= 0 || spec.durationMaxSec < spec.durationMinSec)
        throw std::invalid_argument("buildCorpus: bad duration range");
    std::vector<int> sensorIds;
    for (const auto& name : sensorNames) {
        const int id = skel.vertexIndex(name);
        if (id < 0) throw std::invalid_argument("buildCorpus: unknown sensor '" + name + "'");
        sensorIds.push_back(id);
    }

    RawCorpus corpus;
    corpus.spec = spec;
    corpus.sensorNames = sensorNames;
    for (const auto& cls : spec.taxonomy.classes) {
        for (int i = 0; i < spec.sequencesPerClass; ++i) {
            SequenceRecord rec;
            rec.classId = cls.id;
            rec.index = i;
            rec.seed = mixSeed(mixSeed(spec.seed, cls.id), i);
            Rng rng(rec.seed);
            const double duration = rng.uniform(spec.durationMinSec, spec.durationMaxSec);
            MotionSequence seq =
                generateMotion(cls.name, duration, spec.frameRate, mixSeed(rec.seed, 1));
            seq.label = cls.id;
            rec.streams = sampleVirtualImus(seq, skel, sensorIds);
            applyNoise(rec.streams, spec.noise, mixSeed(rec.seed, 2));
            corpus.sequences.push_back(std::move(rec));
        }
    }
    return corpus;
}

CorpusSpec defaultSourceSpec() {
    CorpusSpec spec;
    spec.taxonomy = sourceTaxonomy();
    spec.sequencesPerClass = 16;
    spec.durationMinSec = 4.5;
    spec.durationMaxSec = 6.0;
    spec.frameRate = 60.0;
    spec.seed = 11;
    return spec;
}

CorpusSpec defaultTargetSpec() {
    CorpusSpec spec;
    spec.taxonomy = targetTaxonomy();
    spec.sequencesPerClass = 44;
    spec.durationMinSec = 6.5;
    spec.durationMaxSec = 8.0;
    spec.frameRate = 60.0;
    spec.seed = 22;
    return spec;
}

void saveCorpus(const RawCorpus& corpus, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    nlohmann::json manifest;
    manifest["format"] = "mars-raw-corpus";
    manifest["version"] = 1;
    manifest["frameRate"] = corpus.spec.frameRate;
    manifest["seed"] = corpus.spec.seed;
    manifest["sequencesPerClass"] = corpus.spec.sequencesPerClass;
    manifest["durationMinSec"] = corpus.spec.durationMinSec;
    manifest["durationMaxSec"] = corpus.spec.durationMaxSec;
    manifest["noise"] = {{"accelNoiseStd", corpus.spec.noise.accelNoiseStd},
                         {"accelBiasStd", corpus.spec.noise.accelBiasStd},
                         {"orientationNoiseRad", corpus.spec.noise.orientationNoiseRad}};
    manifest["sensors"] = corpus.sensorNames;
    auto classes = nlohmann::json::array();
    for (const auto& c : corpus.spec.taxonomy.classes)
        classes.push_back({{"id", c.id}, {"name", c.name}});
    manifest["classes"] = classes;

    auto sequences = nlohmann::json::array();
    for (const auto& rec : corpus.sequences) {
        char name[64];
        std::snprintf(name, sizeof(name), "seq_%03d_%03d.txt", rec.classId, rec.index);
        const int samples = rec.streams.empty() ? 0 : static_cast<int>(rec.streams[0].size());
        sequences.push_back({{"file", name},
                             {"classId", rec.classId},
                             {"index", rec.index},
                             {"seed", rec.seed},
                             {"samples", samples}});

        std::ofstream out(fs::path(dir) / name);
        if (!out) throw std::runtime_error("saveCorpus: cannot open sequence file");
        out.precision(17);
        for (int t = 0; t < samples; ++t) {
            bool first = true;
            for (const auto& stream : rec.streams) {
                const auto& sample = stream[t];
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) {
                        if (!first) out << ' ';
                        first = false;
                        out << sample.orientation(r, c);
                    }
                for (int a = 0; a < 3; ++a) out << ' ' << sample.acceleration(a);
            }
            out << '\n';
        }
        if (!out) throw std::runtime_error("saveCorpus: write failed");
    }
    manifest["sequences"] = sequences;

    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("saveCorpus: cannot open manifest.json");
    mf << manifest.dump(2) << '\n';
    if (!mf) throw std::runtime_error("saveCorpus: manifest write failed");
}

RawCorpus loadCorpus(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("loadCorpus: cannot open manifest.json in " + dir);
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("loadCorpus: malformed manifest: ") + e.what());
    }
    if (manifest.value("format", "") != "mars-raw-corpus" || manifest.value("version", 0) != 1)
        throw std::runtime_error("loadCorpus: unrecognized corpus format");

    RawCorpus corpus;
    corpus.spec.frameRate = manifest.at("frameRate").get<double>();
    corpus.spec.seed = manifest.at("seed").get<std::uint64_t>();
    corpus.spec.sequencesPerClass = manifest.value("sequencesPerClass", 0);
    corpus.spec.durationMinSec = manifest.value("durationMinSec", 0.0);
    corpus.spec.durationMaxSec = manifest.value("durationMaxSec", 0.0);
    const auto& noise = manifest.at("noise");
    corpus.spec.noise.accelNoiseStd = noise.at("accelNoiseStd").get<double>();
    corpus.spec.noise.accelBiasStd = noise.at("accelBiasStd").get<double>();
    corpus.spec.noise.orientationNoiseRad = noise.at("orientationNoiseRad").get<double>();
    corpus.sensorNames = manifest.at("sensors").get<std::vector<std::string>>();
    for (const auto& c : manifest.at("classes"))
        corpus.spec.taxonomy.classes.push_back(
            {c.at("id").get<int>(), c.at("name").get<std::string>()});

    const int sensors = static_cast<int>(corpus.sensorNames.size());
    for (const auto& s : manifest.at("sequences")) {
        SequenceRecord rec;
        rec.classId = s.at("classId").get<int>();
        rec.index = s.at("index").get<int>();
        rec.seed = s.at("seed").get<std::uint64_t>();
        const int samples = s.at("samples").get<int>();
        rec.streams.assign(sensors, std::vector<VirtualImuSample>(samples));

        std::ifstream in(fs::path(dir) / s.at("file").get<std::string>());
        if (!in) throw std::runtime_error("loadCorpus: missing sequence file");
        for (int t = 0; t < samples; ++t) {
            for (int sn = 0; sn < sensors; ++sn) {
                auto& sample = rec.streams[sn][t];
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c)
                        if (!(in >> sample.orientation(r, c)))
                            throw std::runtime_error("loadCorpus: truncated sequence file");
                for (int a = 0; a < 3; ++a)
                    if (!(in >> sample.acceleration(a)))
                        throw std::runtime_error("loadCorpus: truncated sequence file");
            }
        }
        corpus.sequences.push_back(std::move(rec));
    }
    return corpus;
}

}  // namespace mars
