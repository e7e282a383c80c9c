#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "elbnn/builders.hpp"
#include "elbnn/trainer.hpp"

namespace elbnn {

// Line-oriented `key = value` config with [section] headers; keys resolve to
// "section.key". Unknown keys are rejected, not ignored.
struct RunConfig {
    std::string subcommand;
    std::string config_path;
    std::string out_dir;
    std::map<std::string, std::string> values;

    const std::string& get(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    int get_int(const std::string& key) const;
    float get_float(const std::string& key) const;
};

const std::map<std::string, std::string>& config_defaults();

// Builds the resolved config: defaults, then the optional file, then
// key=value overrides in order.
RunConfig make_run_config(const std::string& subcommand, const std::string& config_path,
                          const std::vector<std::string>& overrides, const std::string& out_dir);

// Parses config text into out, validating keys. `source` names the input for
// error messages.
void parse_config_text(const std::string& text, const std::string& source,
                       std::map<std::string, std::string>& out);

// Manifest emission; parse_config_text(emit_manifest(cfg)) reproduces
// cfg.values exactly.
std::string emit_manifest(const RunConfig& cfg);

ArchSpec arch_from_config(const RunConfig& cfg);
TrainConfig train_from_config(const RunConfig& cfg);

}  // namespace elbnn
