// SPDX-License-Identifier: Apache-2.0

#include "run_config.h"

#include <fstream>

namespace fs = std::filesystem;

namespace skinfit::cli {

RunConfig RunConfig::load(const std::optional<fs::path> &path,
                          const std::set<std::string> &allowed) {
    RunConfig cfg;
    if (!path) return cfg;
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config " + path->string());
    try {
        cfg.json_ = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(path->string() + ": " + e.what());
    }
    if (!cfg.json_.is_object()) throw ConfigError(path->string() + ": expected a JSON object");
    for (const auto &item : cfg.json_.items())
        if (!allowed.count(item.key()))
            throw ConfigError("unknown config key '" + item.key() + "'");
    cfg.base_ = path->parent_path();
    return cfg;
}

std::optional<fs::path> RunConfig::path(const std::string &key) const {
    if (!json_.contains(key) || json_.at(key).is_null()) return std::nullopt;
    const fs::path p(get<std::string>(key, ""));
    return p.is_absolute() ? p : base_ / p;
}

fs::path RunConfig::required_path(const std::string &key) const {
    auto p = path(key);
    if (!p) throw ConfigError("config key '" + key + "' is required");
    return *p;
}

}  // namespace skinfit::cli
