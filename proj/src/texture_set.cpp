// SPDX-License-Identifier: Apache-2.0

#include <skinfit/texture_set.h>

#include <skinfit/error.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace skinfit {

TextureSet TextureSet::make(int resolution, double kd) {
    TextureSet t;
    t.kd = Texture(resolution, 3, kd);
    t.ks = Texture(resolution, 1, 0.0);
    t.ka = Texture(resolution, 3, 0.0);
    t.normal = Texture(resolution, 3, 0.0);
    for (std::size_t k = 0; k < t.normal.texel_count(); ++k) t.normal[k * 3 + 2] = 1.0;
    return t;
}

int TextureSet::resolution() const {
    const int r = kd.resolution();
    return ks.resolution() == r && ka.resolution() == r && normal.resolution() == r ? r : 0;
}

void TextureSet::validate() const {
    if (kd.channels() != 3 || ks.channels() != 1 || ka.channels() != 3 || normal.channels() != 3)
        throw DataError("texture set has wrong channel counts");
    if (resolution() == 0) throw DataError("texture set maps differ in resolution");
    for (const Texture *t : {&kd, &ks, &ka, &normal})
        if (!t->all_finite()) throw DataError("texture set contains non-finite texels");
    for (const Texture *t : {&kd, &ks, &ka})
        for (double v : t->data())
            if (v < 0) throw DataError("albedo/gain/ambient texels must be non-negative");
    for (std::size_t k = 0; k < normal.texel_count(); ++k) {
        const Vec3d n{normal[3 * k], normal[3 * k + 1], normal[3 * k + 2]};
        if (!(length(n) > 0)) throw DataError("normal texel has zero length");
    }
    if (!(alpha >= 0 && alpha <= 1)) throw DataError("alpha outside [0,1]");
    for (double s : diffuse_scale)
        if (!(s > 0) || !std::isfinite(s)) throw DataError("diffuse scale must be positive");
}

void TextureSet::save(const std::filesystem::path &dir, bool previews) const {
    std::filesystem::create_directories(dir);
    write_pfm(dir / "kd.pfm", kd);
    write_pfm(dir / "ks.pfm", ks);
    write_pfm(dir / "ka.pfm", ka);
    write_pfm(dir / "normal.pfm", normal);
    if (previews) {
        write_png(dir / "kd.png", kd);
        write_png(dir / "ks.png", ks);
        write_png(dir / "ka.png", ka);
        Texture shown = normal;
        for (double &v : shown.data()) v = 0.5 * v + 0.5;
        write_png(dir / "normal.png", shown);
    }
    nlohmann::json j;
    j["alpha"] = alpha;
    j["diffuse_scale"] = diffuse_scale;
    j["resolution"] = resolution();
    std::ofstream out(dir / "params.json");
    out << j.dump(2) << '\n';
    if (!out) throw DataError("cannot write " + (dir / "params.json").string());
}

TextureSet TextureSet::load(const std::filesystem::path &dir) {
    TextureSet t;
    t.kd = read_pfm_texture(dir / "kd.pfm");
    t.ks = read_pfm_texture(dir / "ks.pfm");
    t.ka = read_pfm_texture(dir / "ka.pfm");
    t.normal = read_pfm_texture(dir / "normal.pfm");
    std::ifstream in(dir / "params.json");
    if (!in) throw DataError("cannot open " + (dir / "params.json").string());
    try {
        const auto j = nlohmann::json::parse(in);
        t.alpha = j.at("alpha").get<double>();
        t.diffuse_scale = j.at("diffuse_scale").get<std::array<double, 3>>();
    } catch (const nlohmann::json::exception &e) {
        throw DataError((dir / "params.json").string() + ": " + e.what());
    }
    t.validate();
    return t;
}

TextureGradients TextureGradients::zeros_like(const TextureSet &p) {
    TextureGradients g;
    g.kd = Texture(p.kd.resolution(), 3);
    g.ks = Texture(p.ks.resolution(), 1);
    g.ka = Texture(p.ka.resolution(), 3);
    g.normal = Texture(p.normal.resolution(), 3);
    return g;
}

void TextureGradients::set_zero() {
    for (Texture *t : {&kd, &ks, &ka, &normal}) std::fill(t->data().begin(), t->data().end(), 0.0);
    alpha = 0;
    diffuse_scale = {0, 0, 0};
}

bool TextureGradients::all_finite() const {
    for (const Texture *t : {&kd, &ks, &ka, &normal})
        if (!t->all_finite()) return false;
    if (!std::isfinite(alpha)) return false;
    for (double v : diffuse_scale)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string to_string(ParamClass c) {
    switch (c) {
    case ParamClass::Kd: return "kd";
    case ParamClass::Ks: return "ks";
    case ParamClass::Ka: return "ka";
    case ParamClass::Normal: return "normal";
    case ParamClass::Alpha: return "alpha";
    case ParamClass::DiffuseScale: return "diffuse_scale";
    }
    return "?";
}

}  // namespace skinfit
