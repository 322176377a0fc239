// SPDX-License-Identifier: Apache-2.0

#include <skinfit/dataset.h>

#include <skinfit/error.h>
#include <skinfit/log.h>

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;

namespace skinfit {

std::vector<std::size_t> Dataset::select(Polarization p, ViewRole r) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < views.size(); ++i)
        if (views[i].polarization == p && views[i].role == r) out.push_back(i);
    return out;
}

std::size_t Dataset::find(const std::string &id) const {
    for (std::size_t i = 0; i < views.size(); ++i)
        if (views[i].id == id) return i;
    throw DataError("no view with id '" + id + "'");
}

void assign_default_roles(std::vector<CaptureView> &views) {
    for (Polarization p : {Polarization::Cross, Polarization::Parallel}) {
        std::optional<std::size_t> last;
        for (std::size_t i = 0; i < views.size(); ++i)
            if (views[i].polarization == p) {
                views[i].role = ViewRole::Train;
                last = i;
            }
        if (last) views[*last].role = ViewRole::Holdout;
    }
}

AttenuationMap attenuation_or_ones(const AttenuationMap &map, int width, int height) {
    if (map.empty()) return AttenuationMap(width, height, 1, 1.f);
    if (map.width() != width || map.height() != height)
        throw DataError("attenuation map is " + std::to_string(map.width()) + "x" +
                        std::to_string(map.height()) + ", views are " + std::to_string(width) +
                        "x" + std::to_string(height));
    return map;
}

namespace {

void check_keys(const json &j, const std::set<std::string> &allowed, const std::string &where) {
    if (!j.is_object()) throw DataError(where + " must be a JSON object");
    for (const auto &item : j.items())
        if (!allowed.count(item.key()))
            throw DataError("unknown key '" + item.key() + "' in " + where);
}

fs::path resolve(const fs::path &base, const std::string &p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

fs::path existing(const fs::path &p) {
    if (!fs::exists(p)) throw DataError("missing file " + p.string());
    return p;
}

}  // namespace

Dataset load_manifest(const fs::path &manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest " + manifest_path.string());
    const fs::path base = manifest_path.parent_path();
    Dataset ds;
    try {
        const json j = json::parse(in);
        check_keys(j, {"mesh", "attenuation", "color_affine", "light_intensity", "ground_truth",
                       "views"},
                   "manifest");

        ObjLoadResult obj = load_obj(existing(resolve(base, j.at("mesh").get<std::string>())));
        ds.mesh = std::move(obj.mesh);
        const double scale = obj.scale;

        if (j.contains("light_intensity"))
            for (int k = 0; k < 3; ++k)
                ds.light_intensity[k] = j["light_intensity"].at(k).get<double>();
        if (j.contains("ground_truth") && !j["ground_truth"].is_null())
            ds.ground_truth = resolve(base, j["ground_truth"].get<std::string>());

        std::optional<ColorAffine> affine_cross, affine_parallel;
        if (j.contains("color_affine") && !j["color_affine"].is_null()) {
            const json &ca = j["color_affine"];
            if (ca.is_string()) {
                affine_cross = load_color_affine(existing(resolve(base, ca.get<std::string>())));
                affine_parallel = affine_cross;
            } else {
                check_keys(ca, {"cross", "parallel"}, "color_affine");
                if (ca.contains("cross"))
                    affine_cross = load_color_affine(
                        existing(resolve(base, ca["cross"].get<std::string>())));
                if (ca.contains("parallel"))
                    affine_parallel = load_color_affine(
                        existing(resolve(base, ca["parallel"].get<std::string>())));
            }
        }

        bool any_role = false;
        std::set<std::string> ids;
        for (const json &v : j.at("views")) {
            check_keys(v, {"id", "image", "camera_to_world", "intrinsics", "polarization", "role"},
                       "view");
            CaptureView view;
            view.id = v.at("id").get<std::string>();
            if (!ids.insert(view.id).second) throw DataError("duplicate view id '" + view.id + "'");
            const json &intr = v.at("intrinsics");
            check_keys(intr, {"fx", "fy", "cx", "cy", "width", "height"}, "intrinsics");
            std::array<double, 16> c2w{};
            if (v.at("camera_to_world").size() != 16)
                throw DataError("view '" + view.id + "': camera_to_world needs 16 numbers");
            for (int k = 0; k < 16; ++k) c2w[k] = v["camera_to_world"][k].get<double>();
            c2w[3] *= scale;
            c2w[7] *= scale;
            c2w[11] *= scale;
            view.camera = Camera::from_camera_to_world(
                c2w, intr.at("fx").get<double>(), intr.at("fy").get<double>(),
                intr.at("cx").get<double>(), intr.at("cy").get<double>(),
                intr.at("width").get<int>(), intr.at("height").get<int>());
            try {
                view.camera.validate();
            } catch (const ConfigError &e) {
                throw DataError("view '" + view.id + "': " + e.what());
            }
            view.polarization = parse_polarization(v.at("polarization").get<std::string>());
            if (v.contains("role")) {
                view.role = parse_view_role(v["role"].get<std::string>());
                any_role = true;
            }
            view.image = read_pfm(existing(resolve(base, v.at("image").get<std::string>())));
            if (view.image.width() != view.camera.width ||
                view.image.height() != view.camera.height || view.image.channels() != 3)
                throw DataError("view '" + view.id + "': image does not match its intrinsics");
            const auto &affine =
                view.polarization == Polarization::Cross ? affine_cross : affine_parallel;
            if (affine) view.image = apply_color_correction(view.image, *affine);
            ds.views.push_back(std::move(view));
        }
        if (ds.views.empty()) throw DataError("manifest lists no views");
        if (!any_role) assign_default_roles(ds.views);

        if (j.contains("attenuation") && !j["attenuation"].is_null()) {
            ds.attenuation =
                read_pfm(existing(resolve(base, j["attenuation"].get<std::string>())));
            const Camera &c = ds.views.front().camera;
            attenuation_or_ones(ds.attenuation, c.width, c.height);  // shape check
            if (ds.attenuation.channels() != 1 && ds.attenuation.channels() != 3)
                throw DataError("attenuation map must have 1 or 3 channels");
        }
    } catch (const json::exception &e) {
        throw DataError(manifest_path.string() + ": " + e.what());
    } catch (const std::invalid_argument &e) {
        throw DataError(manifest_path.string() + ": " + e.what());
    }
    log_info("loaded " + std::to_string(ds.views.size()) + " views from " +
             manifest_path.string());
    return ds;
}

void write_dataset(const fs::path &dir, const Dataset &ds,
                   const std::optional<fs::path> &ground_truth) {
    fs::create_directories(dir / "images");
    save_obj(dir / "mesh.obj", ds.mesh);
    json j;
    j["mesh"] = "mesh.obj";
    if (!ds.attenuation.empty()) {
        write_pfm(dir / "attenuation.pfm", ds.attenuation);
        j["attenuation"] = "attenuation.pfm";
    } else {
        j["attenuation"] = nullptr;
    }
    j["color_affine"] = nullptr;
    j["light_intensity"] = {ds.light_intensity.x, ds.light_intensity.y, ds.light_intensity.z};
    if (ground_truth) j["ground_truth"] = ground_truth->generic_string();
    j["views"] = json::array();
    for (const CaptureView &v : ds.views) {
        const std::string image = "images/" + v.id + ".pfm";
        write_pfm(dir / image, v.image);
        const Camera &c = v.camera;
        j["views"].push_back({{"id", v.id},
                              {"image", image},
                              {"camera_to_world", c.camera_to_world()},
                              {"intrinsics",
                               {{"fx", c.fx},
                                {"fy", c.fy},
                                {"cx", c.cx},
                                {"cy", c.cy},
                                {"width", c.width},
                                {"height", c.height}}},
                              {"polarization", to_string(v.polarization)},
                              {"role", to_string(v.role)}});
    }
    std::ofstream out(dir / "manifest.json");
    out << j.dump(2) << '\n';
    if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
}

}  // namespace skinfit
