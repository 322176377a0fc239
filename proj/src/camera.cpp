// SPDX-License-Identifier: Apache-2.0

#include <skinfit/camera.h>

#include <skinfit/error.h>

namespace skinfit {

std::array<double, 16> Camera::camera_to_world() const {
    const Mat3 rt = rotation.transposed();
    const Vec3d c = center();
    return {rt(0, 0), rt(0, 1), rt(0, 2), c.x, rt(1, 0), rt(1, 1), rt(1, 2), c.y,
            rt(2, 0), rt(2, 1), rt(2, 2), c.z, 0,        0,        0,        1};
}

Camera Camera::from_camera_to_world(const std::array<double, 16> &m, double fx, double fy,
                                    double cx, double cy, int width, int height) {
    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.width = width;
    cam.height = height;
    Mat3 c2w = Mat3::from_rows({m[0], m[1], m[2]}, {m[4], m[5], m[6]}, {m[8], m[9], m[10]});
    cam.rotation = c2w.transposed();
    cam.translation = -(cam.rotation * Vec3d{m[3], m[7], m[11]});
    return cam;
}

Camera Camera::look_at(const Vec3d &eye, const Vec3d &target, const Vec3d &up, double fx,
                       double fy, int width, int height) {
    const Vec3d z = normalize(target - eye);
    Vec3d x = cross(z, up);
    if (length(x) < 1e-9) x = any_orthonormal(z);
    x = normalize(x);
    const Vec3d y = cross(z, x);  // image down
    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    cam.rotation = Mat3::from_rows(x, y, z);
    cam.translation = -(cam.rotation * eye);
    return cam;
}

void Camera::validate() const {
    if (!(fx > 0) || !(fy > 0)) throw ConfigError("camera focal lengths must be positive");
    if (width < 1 || height < 1) throw ConfigError("camera image size must be positive");
    const Mat3 should_be_id = rotation * rotation.transposed();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (std::abs(should_be_id(i, j) - (i == j ? 1.0 : 0.0)) > 1e-6)
                throw ConfigError("camera rotation is not orthonormal");
}

std::string to_string(Polarization p) { return p == Polarization::Cross ? "cross" : "parallel"; }
std::string to_string(ViewRole r) { return r == ViewRole::Train ? "train" : "holdout"; }

Polarization parse_polarization(const std::string &s) {
    if (s == "cross") return Polarization::Cross;
    if (s == "parallel") return Polarization::Parallel;
    throw DataError("unknown polarization '" + s + "'");
}

ViewRole parse_view_role(const std::string &s) {
    if (s == "train") return ViewRole::Train;
    if (s == "holdout") return ViewRole::Holdout;
    throw DataError("unknown view role '" + s + "'");
}

}  // namespace skinfit
