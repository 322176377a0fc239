// SPDX-License-Identifier: Apache-2.0

#include <skinfit/color.h>

#include <skinfit/error.h>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace skinfit {

ColorAffine fit_color_affine(const std::vector<Vec3d> &measured,
                             const std::vector<Vec3d> &reference) {
    if (measured.size() != reference.size())
        throw DataError("measured and reference patch counts differ");
    if (measured.size() < 4) throw DataError("affine color fit needs at least 4 patches");

    const Eigen::Index n = Eigen::Index(measured.size());
    Eigen::MatrixXd X(n, 4), R(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3d &m = measured[std::size_t(i)], &r = reference[std::size_t(i)];
        X.row(i) << m.x, m.y, m.z, 1.0;
        R.row(i) << r.x, r.y, r.z;
    }
    // Rank test on the design matrix itself; the normal equations square
    // its condition number.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
    const auto &sv = svd.singularValues();
    if (sv(3) <= 1e-9 * std::max(1.0, sv(0)))
        throw NumericalError("color patches are rank-deficient; cannot fit an affine map");

    const Eigen::Matrix4d normal = X.transpose() * X;
    const Eigen::Matrix<double, 4, 3> theta = normal.ldlt().solve(X.transpose() * R);

    ColorAffine out;
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) out.A(row, col) = theta(col, row);
        out.b[row] = theta(3, row);
    }
    return out;
}

Image apply_color_correction(const Image &image, const ColorAffine &affine) {
    if (image.channels() != 3) throw DataError("color correction needs an RGB image");
    Image out(image.width(), image.height(), 3);
    auto src = image.data();
    auto dst = out.data();
    for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        const Vec3d c = affine.apply({src[3 * p], src[3 * p + 1], src[3 * p + 2]});
        for (int k = 0; k < 3; ++k) dst[3 * p + k] = float(std::max(0.0, c[k]));
    }
    return out;
}

std::vector<Vec3d> read_patches(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<Vec3d> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = line.substr(0, line.find('#'));
        std::istringstream ls(line);
        Vec3d c;
        if (!(ls >> c.x)) continue;
        if (!(ls >> c.y >> c.z))
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected r g b");
        out.push_back(c);
    }
    return out;
}

void write_patches(const std::filesystem::path &path, const std::vector<Vec3d> &patches) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    char buf[128];
    for (const Vec3d &c : patches) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", c.x, c.y, c.z);
        out << buf;
    }
}

void save_color_affine(const std::filesystem::path &path, const ColorAffine &affine) {
    nlohmann::json j;
    for (int r = 0; r < 3; ++r)
        j["A"].push_back({affine.A(r, 0), affine.A(r, 1), affine.A(r, 2)});
    j["b"] = {affine.b.x, affine.b.y, affine.b.z};
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw DataError("cannot write " + path.string());
}

ColorAffine load_color_affine(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        ColorAffine a;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) a.A(r, c) = j.at("A").at(r).at(c).get<double>();
        for (int r = 0; r < 3; ++r) a.b[r] = j.at("b").at(r).get<double>();
        return a;
    } catch (const nlohmann::json::exception &e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace skinfit
