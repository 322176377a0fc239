// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_DATASET_H
#define SKINFIT_DATASET_H

#include <skinfit/camera.h>
#include <skinfit/color.h>
#include <skinfit/image.h>
#include <skinfit/mesh.h>
#include <skinfit/raster.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace skinfit {

struct CaptureView {
    std::string id;
    Image image;  // linear RGB, color-corrected when a correction was configured
    Camera camera;
    Polarization polarization = Polarization::Cross;
    ViewRole role = ViewRole::Train;
};

// A capture session: geometry, posed images, and the calibration products
// shared by every view.
struct Dataset {
    TriMesh mesh;
    std::vector<CaptureView> views;
    // Empty means M = 1 everywhere. 1 or 3 channels, camera image size.
    AttenuationMap attenuation;
    Vec3d light_intensity{10, 10, 10};
    // Directory of a reference TextureSet, when one is known.
    std::optional<std::filesystem::path> ground_truth;

    std::vector<std::size_t> select(Polarization p, ViewRole r) const;
    // Index of the view with the given id; throws DataError when absent.
    std::size_t find(const std::string &id) const;
};

// Holdout protocol when a manifest assigns no roles: the highest-index view
// of each polarization is held out.
void assign_default_roles(std::vector<CaptureView> &views);

// Manifest (JSON) layout, paths relative to the manifest's directory:
//   mesh              OBJ path; unit-scaled on load, camera translations
//                     scaled by the same factor
//   attenuation       PFM path or null
//   color_affine      null, a JSON path, or {"cross": path, "parallel": path}
//   light_intensity   [r, g, b]
//   ground_truth      optional texture-set directory
//   views[]           id, image (PFM), camera_to_world (16 numbers,
//                     row-major), intrinsics {fx, fy, cx, cy, width, height},
//                     polarization ("cross" | "parallel"), role ("train" |
//                     "holdout", optional)
// Throws DataError on missing files, unknown keys, or malformed entries.
Dataset load_manifest(const std::filesystem::path &manifest_path);

// Writes mesh.obj, images/<id>.pfm, attenuation.pfm (when set) and
// manifest.json into `dir`. `ground_truth` is recorded as given (relative
// to `dir`).
void write_dataset(const std::filesystem::path &dir, const Dataset &dataset,
                   const std::optional<std::filesystem::path> &ground_truth = std::nullopt);

// Attenuation used for a view: the dataset map, or ones when none is set.
AttenuationMap attenuation_or_ones(const AttenuationMap &map, int width, int height);

}  // namespace skinfit

#endif  // SKINFIT_DATASET_H
