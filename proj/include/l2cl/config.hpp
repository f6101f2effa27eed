#pragma once

#include <map>
#include <string>
#include <vector>

#include "l2cl/trainer.hpp"

namespace l2cl {

// Flat key=value config text: '#' comments, blank lines ignored, unknown or
// ill-typed keys collected as errors so a bad file reports everything at
// once. lambda1 is the one required key; every other key has a default that
// is echoed into the run manifest.
struct ConfigMap {
    std::map<std::string, std::string> kv;
};

ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);

struct ConfigResult {
    TrainConfig config;
    std::vector<std::string> errors;
    bool ok() const { return errors.empty(); }
};

ConfigResult make_train_config(const ConfigMap& map);

// Canonical serialization of the effective configuration: fixed key order,
// one key=value per line. Identical configs hash identically.
std::string canonical_config(const TrainConfig& cfg);
uint64_t config_hash(const TrainConfig& cfg);

uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64_file(const std::string& path);

}  // namespace l2cl
