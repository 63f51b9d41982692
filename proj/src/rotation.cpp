#include "mars/rotation.hpp"

#include <cmath>
#include <stdexcept>

namespace mars {

bool isRotation(const Mat3& R, double tol) {
    const Mat3 err = R.transpose() * R - Mat3::Identity();
    if (err.cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(R.determinant() - 1.0) <= tol;
}

Mat3 axisAngleRotation(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n <= 0.0) throw std::invalid_argument("axisAngleRotation: zero axis");
    const Vec3 u = axis / n;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Mat3 K;
    K << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
    return Mat3::Identity() + s * K + (1.0 - c) * (K * K);
}

Mat3 reorthonormalize(const Mat3& R) {
    Vec3 c0 = R.col(0);
    const double n0 = c0.norm();
    if (n0 <= 0.0) throw std::invalid_argument("reorthonormalize: degenerate matrix");
    c0 /= n0;
    Vec3 c1 = R.col(1) - c0 * c0.dot(R.col(1));
    const double n1 = c1.norm();
    if (n1 <= 0.0) throw std::invalid_argument("reorthonormalize: degenerate matrix");
    c1 /= n1;
    const Vec3 c2 = c0.cross(c1);
    Mat3 out;
    out.col(0) = c0;
    out.col(1) = c1;
    out.col(2) = c2;
    return out;
}

Mat3 rotationX(double angle) { return axisAngleRotation(Vec3(1, 0, 0), angle); }
Mat3 rotationY(double angle) { return axisAngleRotation(Vec3(0, 1, 0), angle); }
Mat3 rotationZ(double angle) { return axisAngleRotation(Vec3(0, 0, 1), angle); }

}  // namespace mars
