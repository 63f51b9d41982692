#pragma once

#include <Eigen/Dense>

namespace mars {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// True when R^T R = I within tol (max-abs entry) and det(R) = 1 within tol.
bool isRotation(const Mat3& R, double tol = 1e-6);

// Rodrigues rotation about a unit axis; the axis is normalized internally.
// A zero axis is rejected.
Mat3 axisAngleRotation(const Vec3& axis, double angle);

// Projects a near-rotation back onto SO(3) via Gram-Schmidt on the columns.
Mat3 reorthonormalize(const Mat3& R);

Mat3 rotationX(double angle);
Mat3 rotationY(double angle);
Mat3 rotationZ(double angle);

}  // namespace mars
