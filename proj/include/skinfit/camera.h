// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_CAMERA_H
#define SKINFIT_CAMERA_H

#include <skinfit/vecmath.h>

#include <array>
#include <string>

namespace skinfit {

// Pinhole camera, OpenCV convention: camera space looks down +z with +y
// pointing down the image. Pixel (x, y) covers [x, x+1) x [y, y+1) and is
// sampled at its center.
struct Camera {
    double fx = 1, fy = 1, cx = 0, cy = 0;
    int width = 1, height = 1;
    Mat3 rotation;      // world -> camera
    Vec3d translation;  // world -> camera

    Vec3d to_camera(const Vec3d &p) const { return rotation * p + translation; }
    Vec3d center() const { return -(rotation.transposed() * translation); }
    // Direction of the camera's optical axis in world space.
    Vec3d forward() const { return rotation.transposed() * Vec3d{0, 0, 1}; }

    // Row-major 4x4 camera-to-world matrix, and its inverse construction.
    std::array<double, 16> camera_to_world() const;
    static Camera from_camera_to_world(const std::array<double, 16> &m, double fx, double fy,
                                       double cx, double cy, int width, int height);

    // Camera at `eye` looking at `target`; `up` is the world direction that
    // appears upward in the image.
    static Camera look_at(const Vec3d &eye, const Vec3d &target, const Vec3d &up, double fx,
                          double fy, int width, int height);

    // Throws ConfigError on non-positive focal lengths, bad sizes, or a
    // rotation that is not orthonormal.
    void validate() const;
};

// Point light co-located with the capturing camera.
struct PointLight {
    Vec3d position;
    Vec3d intensity{10, 10, 10};
};

enum class Polarization { Cross, Parallel };
enum class ViewRole { Train, Holdout };

std::string to_string(Polarization p);
std::string to_string(ViewRole r);
Polarization parse_polarization(const std::string &s);
ViewRole parse_view_role(const std::string &s);

}  // namespace skinfit

#endif  // SKINFIT_CAMERA_H
