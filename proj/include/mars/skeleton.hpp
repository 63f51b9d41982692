#pragma once

#include <string>
#include <vector>

#include "mars/rotation.hpp"

namespace mars {

struct Joint {
    std::string name;
    int parent = -1;  // -1 marks the root
    Vec3 restOffset = Vec3::Zero();
};

struct SkinWeight {
    int joint = 0;
    double weight = 0.0;
};

// A surface point that carries a virtual IMU. Orientation follows the joint
// with the largest skin weight; position follows the blended joints.
struct SensorVertex {
    std::string name;
    Vec3 restPosition = Vec3::Zero();
    std::vector<SkinWeight> weights;
};

// Rigid articulated body. Construction validates the tree (exactly one root,
// acyclic, every parent a valid index) and the skin weights (non-negative,
// summing to 1 within 1e-9). Rest joint positions are chained offsets with
// the root pinned at the origin.
class Skeleton {
public:
    Skeleton(std::vector<Joint> joints, std::vector<SensorVertex> vertices);

    int jointCount() const { return static_cast<int>(joints_.size()); }
    int vertexCount() const { return static_cast<int>(vertices_.size()); }
    const Joint& joint(int i) const { return joints_.at(i); }
    const SensorVertex& vertex(int i) const { return vertices_.at(i); }
    int root() const { return root_; }

    // Parents precede children; forward kinematics walks this order.
    const std::vector<int>& topoOrder() const { return order_; }
    const std::vector<Vec3>& restJointPositions() const { return restPositions_; }

    int jointIndex(const std::string& name) const;   // -1 when absent
    int vertexIndex(const std::string& name) const;  // -1 when absent
    int dominantJoint(int vertexId) const;

private:
    std::vector<Joint> joints_;
    std::vector<SensorVertex> vertices_;
    std::vector<int> order_;
    std::vector<Vec3> restPositions_;
    int root_ = -1;
};

struct PoseFrame {
    std::vector<Mat3> jointRotations;  // local, one per joint; root entry is identity by convention
    Mat3 rootOrientation = Mat3::Identity();
    Vec3 rootTranslation = Vec3::Zero();
};

struct MotionSequence {
    std::vector<PoseFrame> frames;
    double frameRate = 60.0;
    int label = -1;
    std::string className;

    double dt() const { return 1.0 / frameRate; }
};

struct JointTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
};

struct VirtualImuSample {
    Mat3 orientation = Mat3::Identity();
    Vec3 acceleration = Vec3::Zero();
};

// Global joint transforms for one pose. The root transform is exactly
// (rootOrientation, rootTranslation); each child composes its parent with
// (restOffset, local rotation). Non-orthonormal rotations are rejected.
std::vector<JointTransform> forwardKinematics(const Skeleton& skel, const PoseFrame& pose);

// Linear blend skinning: sum_j w_j * (R_j * (restPos - restJointPos_j) + t_j).
Vec3 skinPosition(const Skeleton& skel, const std::vector<JointTransform>& transforms, int vertexId);

// Central second difference (prev + next - 2*cur) / dt^2.
Vec3 virtualAcceleration(const Vec3& prev, const Vec3& cur, const Vec3& next, double dt);

struct ImuSampleOptions {
    Mat3 mountRotation = Mat3::Identity();  // sensor frame relative to its dominant joint
    bool addGravity = false;                // adds the +z reaction to world acceleration
    double gravity = 9.81;
};

// Per-sensor IMU streams in the world frame. The first and last frames have
// no central difference, so each stream has frameCount - 2 samples, sample i
// corresponding to source frame i + 1. Sequences shorter than 3 frames are
// rejected.
std::vector<std::vector<VirtualImuSample>> sampleVirtualImus(
    const MotionSequence& seq, const Skeleton& skel, const std::vector<int>& sensorIds,
    const ImuSampleOptions& options = {});

// 24-joint humanoid with six named sensor vertices: head, l_wrist, r_knee,
// spine, l_knee, r_wrist. Z up, meters, pelvis at the origin.
Skeleton defaultSkeleton();

void saveSkeleton(const Skeleton& skel, const std::string& path);
Skeleton loadSkeleton(const std::string& path);

}  // namespace mars
