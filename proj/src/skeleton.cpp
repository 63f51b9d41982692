#include "mars/skeleton.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mars {

Skeleton::Skeleton(std::vector<Joint> joints, std::vector<SensorVertex> vertices)
    : joints_(std::move(joints)), vertices_(std::move(vertices)) {
    const int n = static_cast<int>(joints_.size());
    if (n == 0) throw std::invalid_argument("skeleton: no joints");

    root_ = -1;
    for (int i = 0; i < n; ++i) {
        const int p = joints_[i].parent;
        if (p == -1) {
            if (root_ != -1) throw std::invalid_argument("skeleton: multiple roots");
            root_ = i;
        } else if (p < 0 || p >= n || p == i) {
            throw std::invalid_argument("skeleton: invalid parent index");
        }
    }
    if (root_ == -1) throw std::invalid_argument("skeleton: no root");

    // Children-of lists, then a DFS from the root; any joint left unvisited
    // sits on a cycle or a disconnected island.
    std::vector<std::vector<int>> children(n);
    for (int i = 0; i < n; ++i)
        if (i != root_) children[joints_[i].parent].push_back(i);
    order_.clear();
    order_.reserve(n);
    std::vector<int> stack = {root_};
    std::vector<char> seen(n, 0);
    while (!stack.empty()) {
        const int j = stack.back();
        stack.pop_back();
        if (seen[j]) throw std::invalid_argument("skeleton: cycle detected");
        seen[j] = 1;
        order_.push_back(j);
        for (auto it = children[j].rbegin(); it != children[j].rend(); ++it) stack.push_back(*it);
    }
    if (static_cast<int>(order_.size()) != n)
        throw std::invalid_argument("skeleton: disconnected joints");

    restPositions_.assign(n, Vec3::Zero());
    for (const int j : order_) {
        if (j == root_)
            restPositions_[j] = Vec3::Zero();
        else
            restPositions_[j] = restPositions_[joints_[j].parent] + joints_[j].restOffset;
    }

    for (const auto& v : vertices_) {
        if (v.weights.empty())
            throw std::invalid_argument("skeleton: vertex '" + v.name + "' has no skin weights");
        double sum = 0.0;
        for (const auto& w : v.weights) {
            if (w.joint < 0 || w.joint >= n)
                throw std::invalid_argument("skeleton: skin weight references missing joint");
            if (w.weight < 0.0)
                throw std::invalid_argument("skeleton: negative skin weight");
            sum += w.weight;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("skeleton: skin weights of '" + v.name +
                                        "' do not sum to 1");
    }
}

int Skeleton::jointIndex(const std::string& name) const {
    for (int i = 0; i < jointCount(); ++i)
        if (joints_[i].name == name) return i;
    return -1;
}

int Skeleton::vertexIndex(const std::string& name) const {
    for (int i = 0; i < vertexCount(); ++i)
        if (vertices_[i].name == name) return i;
    return -1;
}

int Skeleton::dominantJoint(int vertexId) const {
    const auto& v = vertices_.at(vertexId);
    int best = v.weights.front().joint;
    double bestW = v.weights.front().weight;
    for (const auto& w : v.weights) {
        if (w.weight > bestW) {
            bestW = w.weight;
            best = w.joint;
        }
    }
    return best;
}

std::vector<JointTransform> forwardKinematics(const Skeleton& skel, const PoseFrame& pose) {
    const int n = skel.jointCount();
    if (static_cast<int>(pose.jointRotations.size()) != n)
        throw std::invalid_argument("forwardKinematics: pose has wrong joint count");
    if (!isRotation(pose.rootOrientation))
        throw std::invalid_argument("forwardKinematics: root orientation not orthonormal");
    for (const auto& R : pose.jointRotations)
        if (!isRotation(R))
            throw std::invalid_argument("forwardKinematics: joint rotation not orthonormal");

    std::vector<JointTransform> out(n);
    for (const int j : skel.topoOrder()) {
        if (j == skel.root()) {
            out[j].rotation = pose.rootOrientation;
            out[j].translation = pose.rootTranslation;
        } else {
            const auto& parent = out[skel.joint(j).parent];
            out[j].rotation = parent.rotation * pose.jointRotations[j];
            out[j].translation = parent.translation + parent.rotation * skel.joint(j).restOffset;
        }
    }
    return out;
}

Vec3 skinPosition(const Skeleton& skel, const std::vector<JointTransform>& transforms,
                  int vertexId) {
    if (static_cast<int>(transforms.size()) != skel.jointCount())
        throw std::invalid_argument("skinPosition: transform count mismatch");
    if (vertexId < 0 || vertexId >= skel.vertexCount())
        throw std::invalid_argument("skinPosition: invalid vertex id");
    const auto& v = skel.vertex(vertexId);
    Vec3 p = Vec3::Zero();
    for (const auto& w : v.weights) {
        const auto& jt = transforms[w.joint];
        const Vec3 local = v.restPosition - skel.restJointPositions()[w.joint];
        p += w.weight * (jt.rotation * local + jt.translation);
    }
    return p;
}

Vec3 virtualAcceleration(const Vec3& prev, const Vec3& cur, const Vec3& next, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("virtualAcceleration: dt must be positive");
    return (prev + next - 2.0 * cur) / (dt * dt);
}

std::vector<std::vector<VirtualImuSample>> sampleVirtualImus(const MotionSequence& seq,
                                                             const Skeleton& skel,
                                                             const std::vector<int>& sensorIds,
                                                             const ImuSampleOptions& options) {
    const int frames = static_cast<int>(seq.frames.size());
    if (frames < 3) throw std::invalid_argument("sampleVirtualImus: need at least 3 frames");
    if (seq.frameRate <= 0.0) throw std::invalid_argument("sampleVirtualImus: bad frame rate");
    for (const int id : sensorIds)
        if (id < 0 || id >= skel.vertexCount())
            throw std::invalid_argument("sampleVirtualImus: invalid sensor id");
    if (!isRotation(options.mountRotation))
        throw std::invalid_argument("sampleVirtualImus: mount rotation not orthonormal");

    const int sensors = static_cast<int>(sensorIds.size());
    std::vector<std::vector<Vec3>> positions(sensors, std::vector<Vec3>(frames));
    std::vector<std::vector<Mat3>> orientations(sensors, std::vector<Mat3>(frames));
    for (int f = 0; f < frames; ++f) {
        const auto transforms = forwardKinematics(skel, seq.frames[f]);
        for (int s = 0; s < sensors; ++s) {
            positions[s][f] = skinPosition(skel, transforms, sensorIds[s]);
            orientations[s][f] =
                transforms[skel.dominantJoint(sensorIds[s])].rotation * options.mountRotation;
        }
    }

    const double dt = seq.dt();
    const Vec3 g = options.addGravity ? Vec3(0, 0, options.gravity) : Vec3::Zero();
    std::vector<std::vector<VirtualImuSample>> out(sensors);
    for (int s = 0; s < sensors; ++s) {
        out[s].resize(frames - 2);
        for (int f = 1; f + 1 < frames; ++f) {
            auto& sample = out[s][f - 1];
            sample.orientation = orientations[s][f];
            sample.acceleration =
                virtualAcceleration(positions[s][f - 1], positions[s][f], positions[s][f + 1], dt) +
                g;
        }
    }
    return out;
}

Skeleton defaultSkeleton() {
    // Proportions of a ~1.7 m figure in T pose, pelvis at the origin.
    const std::vector<Joint> joints = {
        {"pelvis", -1, {0, 0, 0}},          {"l_hip", 0, {0.09, 0, -0.05}},
        {"r_hip", 0, {-0.09, 0, -0.05}},    {"spine1", 0, {0, 0.01, 0.10}},
        {"l_knee", 1, {0.01, 0, -0.40}},    {"r_knee", 2, {-0.01, 0, -0.40}},
        {"spine2", 3, {0, 0.005, 0.10}},    {"l_ankle", 4, {0, 0, -0.40}},
        {"r_ankle", 5, {0, 0, -0.40}},      {"spine3", 6, {0, 0.005, 0.13}},
        {"l_foot", 7, {0.01, 0.12, -0.07}}, {"r_foot", 8, {-0.01, 0.12, -0.07}},
        {"neck", 9, {0, -0.01, 0.19}},      {"l_collar", 9, {0.07, 0, 0.14}},
        {"r_collar", 9, {-0.07, 0, 0.14}},  {"head", 12, {0, 0.01, 0.13}},
        {"l_shoulder", 13, {0.10, -0.02, 0.02}}, {"r_shoulder", 14, {-0.10, -0.02, 0.02}},
        {"l_elbow", 16, {0.28, 0, 0}},      {"r_elbow", 17, {-0.28, 0, 0}},
        {"l_wrist", 18, {0.26, 0, 0}},      {"r_wrist", 19, {-0.26, 0, 0}},
        {"l_hand", 20, {0.08, 0, 0}},       {"r_hand", 21, {-0.08, 0, 0}},
    };
    const std::vector<SensorVertex> vertices = {
        {"head", {0, 0.05, 0.71}, {{15, 0.9}, {12, 0.1}}},
        {"l_wrist", {0.71, 0.02, 0.48}, {{20, 0.85}, {18, 0.15}}},
        {"r_knee", {-0.10, 0.04, -0.45}, {{5, 0.85}, {2, 0.15}}},
        {"spine", {0, -0.08, 0.30}, {{9, 0.8}, {6, 0.2}}},
        {"l_knee", {0.10, 0.04, -0.45}, {{4, 0.85}, {1, 0.15}}},
        {"r_wrist", {-0.71, 0.02, 0.48}, {{21, 0.85}, {19, 0.15}}},
    };
    return Skeleton(joints, vertices);
}

void saveSkeleton(const Skeleton& skel, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("saveSkeleton: cannot open " + path);
    out.precision(17);
    out << "skeleton 1\n";
    out << "joints " << skel.jointCount() << "\n";
    for (int i = 0; i < skel.jointCount(); ++i) {
        const auto& j = skel.joint(i);
        out << "joint " << i << " " << j.name << " " << j.parent << " " << j.restOffset.x() << " "
            << j.restOffset.y() << " " << j.restOffset.z() << "\n";
    }
    out << "vertices " << skel.vertexCount() << "\n";
    for (int i = 0; i < skel.vertexCount(); ++i) {
        const auto& v = skel.vertex(i);
        out << "vertex " << i << " " << v.name << " " << v.restPosition.x() << " "
            << v.restPosition.y() << " " << v.restPosition.z() << " " << v.weights.size();
        for (const auto& w : v.weights) out << " " << w.joint << " " << w.weight;
        out << "\n";
    }
    if (!out) throw std::runtime_error("saveSkeleton: write failed for " + path);
}

Skeleton loadSkeleton(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("loadSkeleton: cannot open " + path);
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "skeleton" || version != 1)
        throw std::runtime_error("loadSkeleton: bad header in " + path);

    int jointCount = 0;
    if (!(in >> tag >> jointCount) || tag != "joints" || jointCount <= 0)
        throw std::runtime_error("loadSkeleton: bad joint count");
    std::vector<Joint> joints(jointCount);
    for (int i = 0; i < jointCount; ++i) {
        int id = -1;
        Joint j;
        if (!(in >> tag >> id >> j.name >> j.parent >> j.restOffset.x() >> j.restOffset.y() >>
              j.restOffset.z()) ||
            tag != "joint" || id != i)
            throw std::runtime_error("loadSkeleton: bad joint record");
        joints[i] = std::move(j);
    }

    int vertexCount = 0;
    if (!(in >> tag >> vertexCount) || tag != "vertices" || vertexCount < 0)
        throw std::runtime_error("loadSkeleton: bad vertex count");
    std::vector<SensorVertex> vertices(vertexCount);
    for (int i = 0; i < vertexCount; ++i) {
        int id = -1, weightCount = 0;
        SensorVertex v;
        if (!(in >> tag >> id >> v.name >> v.restPosition.x() >> v.restPosition.y() >>
              v.restPosition.z() >> weightCount) ||
            tag != "vertex" || id != i || weightCount <= 0)
            throw std::runtime_error("loadSkeleton: bad vertex record");
        v.weights.resize(weightCount);
        for (auto& w : v.weights)
            if (!(in >> w.joint >> w.weight))
                throw std::runtime_error("loadSkeleton: bad skin weight record");
        vertices[i] = std::move(v);
    }
    return Skeleton(std::move(joints), std::move(vertices));
}

}  // namespace mars
