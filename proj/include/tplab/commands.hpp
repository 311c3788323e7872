#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tplab/scenario.hpp"
#include "tplab/types.hpp"

namespace tplab {

// Options for the `gen` subcommand.
struct GenOptions {
    std::optional<std::filesystem::path> config;  // JSON file with generator settings
    // Flag values merged over the config file, keyed by GenConfig field name.
    nlohmann::json overrides = nlohmann::json::object();
    std::filesystem::path out;  // bundle directory to create
};

// Options for the `run` subcommand.
struct RunOptions {
    std::filesystem::path config;  // run spec JSON
    std::filesystem::path out;     // output directory
};

// Options for the `report` subcommand.
struct ReportOptions {
    std::vector<std::filesystem::path> inputs;  // run output directories
    std::filesystem::path out;                  // report directory
    bool svg = false;                           // also emit accuracy_curves.svg
};

// Everything a `run` invocation needs, parsed from one JSON file.
struct RunSpec {
    std::filesystem::path bundle;        // dataset bundle directory
    std::vector<std::string> strategies; // strategy names, run order
    std::vector<std::uint64_t> seeds{1, 42, 64};
    bool reference = true;               // also train on the full labeled+unlabeled set
    ScenarioCfg scenario;
};

RunSpec run_spec_from_string(const std::string& text, const std::filesystem::path& bundle_base);
RunSpec run_spec_from_file(const std::filesystem::path& path);

// Round-trips a RunSpec back to JSON (used for the run manifest echo).
nlohmann::json run_spec_to_json(const RunSpec& spec);

int cmd_gen(const GenOptions& opt);
int cmd_run(const RunOptions& opt);
int cmd_report(const ReportOptions& opt);

}  // namespace tplab
