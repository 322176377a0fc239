// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_TOOLS_RUN_CONFIG_H
#define SKINFIT_TOOLS_RUN_CONFIG_H

#include <skinfit/error.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <set>
#include <string>

namespace skinfit::cli {

// Subcommand settings read from a JSON object. Keys outside the allowed set
// are rejected at load time; relative paths resolve against the directory
// of the config file.
class RunConfig {
  public:
    RunConfig() = default;

    static RunConfig load(const std::optional<std::filesystem::path> &path,
                          const std::set<std::string> &allowed);

    bool has(const std::string &key) const { return json_.contains(key); }

    template <typename T>
    T get(const std::string &key, const T &fallback) const {
        if (!json_.contains(key)) return fallback;
        try {
            return json_.at(key).get<T>();
        } catch (const nlohmann::json::exception &) {
            throw ConfigError("config key '" + key + "' has the wrong type");
        }
    }

    std::optional<std::filesystem::path> path(const std::string &key) const;
    // Like path(), but a ConfigError names the key when it is absent.
    std::filesystem::path required_path(const std::string &key) const;

  private:
    nlohmann::json json_ = nlohmann::json::object();
    std::filesystem::path base_;
};

}  // namespace skinfit::cli

#endif  // SKINFIT_TOOLS_RUN_CONFIG_H
