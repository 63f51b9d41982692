#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mars/rng.hpp"
#include "mars/rotation.hpp"

using namespace mars;

namespace {
const double kPi = 3.14159265358979323846;

Mat3 randomRotation(Rng& rng) {
    const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    return axisAngleRotation(axis, rng.uniform(-kPi, kPi));
}
}  // namespace

TEST_CASE("quarter turn about z maps x to y") {
    const Mat3 R = rotationZ(kPi / 2);
    const Vec3 y = R * Vec3(1, 0, 0);
    CHECK((y - Vec3(0, 1, 0)).norm() < 1e-15);
}

TEST_CASE("axis-angle matches Rodrigues hand values") {
    // 120 degrees about the diagonal permutes the axes: x->y->z->x.
    const Mat3 R = axisAngleRotation(Vec3(1, 1, 1), 2.0 * kPi / 3.0);
    CHECK((R * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-14);
    CHECK((R * Vec3(0, 1, 0) - Vec3(0, 0, 1)).norm() < 1e-14);
    CHECK((R * Vec3(0, 0, 1) - Vec3(1, 0, 0)).norm() < 1e-14);
}

TEST_CASE("isRotation accepts rotations and rejects non-rotations") {
    Rng rng(5);
    for (int i = 0; i < 100; ++i) CHECK(isRotation(randomRotation(rng)));
    CHECK(isRotation(Mat3::Identity()));
    CHECK_FALSE(isRotation(2.0 * Mat3::Identity()));
    Mat3 reflection = Mat3::Identity();
    reflection(2, 2) = -1.0;  // det = -1
    CHECK_FALSE(isRotation(reflection));
    Mat3 sheared = Mat3::Identity();
    sheared(0, 1) = 0.01;
    CHECK_FALSE(isRotation(sheared));
}

TEST_CASE("zero axis is rejected") {
    CHECK_THROWS_AS(axisAngleRotation(Vec3::Zero(), 1.0), std::invalid_argument);
}

TEST_CASE("reorthonormalize projects a perturbed rotation back onto SO(3)") {
    Rng rng(17);
    for (int i = 0; i < 50; ++i) {
        const Mat3 R = randomRotation(rng);
        Mat3 noisy = R;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) noisy(r, c) += rng.normal(0, 1e-4);
        const Mat3 fixed = reorthonormalize(noisy);
        CHECK(isRotation(fixed, 1e-12));
        CHECK((fixed - R).cwiseAbs().maxCoeff() < 1e-3);
    }
    const Mat3 R = randomRotation(rng);
    CHECK((reorthonormalize(R) - R).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("composition stays orthonormal") {
    Rng rng(23);
    Mat3 R = Mat3::Identity();
    for (int i = 0; i < 200; ++i) R = R * randomRotation(rng);
    CHECK(isRotation(R, 1e-10));
}
