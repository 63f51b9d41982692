#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mars/skeleton.hpp"

namespace mars {

struct ActivityClass {
    int id = 0;
    std::string name;
};

struct Taxonomy {
    std::vector<ActivityClass> classes;

    int size() const { return static_cast<int>(classes.size()); }
    int indexOf(const std::string& name) const;  // -1 when absent
};

// Five coarse daily-activity classes used for the small labeled domain.
Taxonomy targetTaxonomy();
// Superset of eight classes used for the large pretraining domain.
Taxonomy sourceTaxonomy();

// Scripted joint-angle motion for a named activity. All intra-class variety
// (amplitude, frequency, phase) is drawn from the seed, so equal seeds give
// identical sequences. Unknown class names are rejected.
MotionSequence generateMotion(const std::string& className, double durationSec, double frameRate,
                              std::uint64_t seed);

// Measurement imperfections applied to otherwise ideal IMU streams: white
// accelerometer noise, a constant per-sensor accelerometer bias, and a
// small-angle orientation wobble that keeps rotations orthonormal.
struct NoiseModel {
    double accelNoiseStd = 0.3;       // m/s^2 per axis per sample
    double accelBiasStd = 0.15;       // m/s^2 per axis per sequence
    double orientationNoiseRad = 0.03;
};

void applyNoise(std::vector<std::vector<VirtualImuSample>>& streams, const NoiseModel& noise,
                std::uint64_t seed);

struct CorpusSpec {
    Taxonomy taxonomy;
    int sequencesPerClass = 20;
    double durationMinSec = 4.5;
    double durationMaxSec = 6.0;
    double frameRate = 60.0;
    NoiseModel noise;
    std::uint64_t seed = 1;
};

struct SequenceRecord {
    int classId = 0;
    int index = 0;  // within its class
    std::uint64_t seed = 0;
    std::vector<std::vector<VirtualImuSample>> streams;  // [sensor][sample]
};

struct RawCorpus {
    CorpusSpec spec;
    std::vector<std::string> sensorNames;
    std::vector<SequenceRecord> sequences;
};

// Synthesizes every sequence of the spec through the skeleton's virtual IMUs
// and applies the noise model. sensorNames must name skeleton vertices.
RawCorpus buildCorpus(const CorpusSpec& spec, const Skeleton& skel,
                      const std::vector<std::string>& sensorNames);

// Defaults used by the command line: a 6-sensor source corpus over the wide
// taxonomy and a denser 6-sensor target corpus over the five-class taxonomy.
CorpusSpec defaultSourceSpec();
CorpusSpec defaultTargetSpec();

// Directory layout: manifest.json plus one whitespace-separated text file per
// sequence; each row is one IMU sample, each sensor contributes 12 columns
// (9 row-major orientation entries, then 3 acceleration entries).
void saveCorpus(const RawCorpus& corpus, const std::string& dir);
RawCorpus loadCorpus(const std::string& dir);

}  // namespace mars
