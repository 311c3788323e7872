#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tplab/rng.hpp"
#include "tplab/types.hpp"

namespace tplab {

void validate(const GenConfig& cfg);

// Strict JSON round trip for generator configs: class centers serialize as
// shortest round-trip decimal strings, unknown fields are rejected on parse.
nlohmann::json gen_to_json(const GenConfig& cfg);
GenConfig gen_from_json(const nlohmann::json& j, const std::string& where);

// The class centers a config implies: either the explicit list or centers
// placed deterministically from the seed with a minimum pairwise separation.
std::vector<std::vector<double>> class_centers_of(const GenConfig& cfg);

// One temporally coherent drive: a waypoint tour over the class centers with
// randomized dwell times, constant-speed travel in between, sampled at
// rate_hz with timestamp jitter, plus OU noise on the features. Labels are
// the nearest class center. Rejects configs whose label flip rate exceeds
// one flip per second on average.
Drive gen_drive(const GenConfig& cfg, const std::string& id, const Rng& rng);

// 1 initial + n_unlabeled_drives stream drives + 1 val + 1 test.
DatasetBundle gen_bundle(const GenConfig& cfg);

// Label changes per second over the drive's time span.
double label_flip_rate(const Drive& d);

// ==================== persistence ====================

// Layout: <dir>/<drive_id>.jsonl per drive plus <dir>/manifest.json. Frames
// are JSON lines with `t` and `x` as shortest round-trip decimal strings, so
// save -> load reproduces every double bit-exactly.
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle load_bundle(const std::filesystem::path& dir);

// Content hash over the manifest and all drive files, in manifest order.
std::string bundle_hash(const std::filesystem::path& dir);

}  // namespace tplab
