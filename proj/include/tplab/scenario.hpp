#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tplab/query.hpp"
#include "tplab/trainer.hpp"
#include "tplab/types.hpp"

namespace tplab {

enum class ScenarioKind { stream_batch, pool_stream };
enum class RetrainMode { scratch, continuous };

ScenarioKind scenario_from_string(const std::string& name);
std::string scenario_name(ScenarioKind kind);
RetrainMode retrain_from_string(const std::string& name);
std::string retrain_name(RetrainMode mode);

struct ScenarioCfg {
    ScenarioKind kind = ScenarioKind::stream_batch;
    RetrainMode retrain = RetrainMode::scratch;
    double query_fraction = 0.10;        // per-drive budget: floor(q * drive size)
    double total_budget_fraction = 0.5;  // overall cap: floor(f * initial labeled size)
    ArchSpec arch;
    TrainCfg train;
    QueryCfg query;

    void validate() const;
};

// One row of the results table. labeled_count is the size of the training set
// behind the recorded test_accuracy: in stream_batch each cycle evaluates
// before selecting from its drive, in pool_stream after folding in its batch.
struct CycleRecord {
    int cycle = 0;
    std::string drive_id;
    std::size_t n_selected = 0;
    std::size_t labeled_count = 0;
    double labeled_fraction = 0.0;
    double test_accuracy = 0.0;
    double selection_seconds = 0.0;
    int train_epochs = 0;
};

struct CycleDiversity {
    int cycle = 0;
    std::string drive_id;
    std::size_t n_selected = 0;
    double mean_pairwise = 0.0;
    double covering_radius = 0.0;
};

struct RunResult {
    std::vector<CycleRecord> records;      // one per unlabeled drive, plus one
    std::vector<CycleDiversity> diversity; // cycles that selected at least one frame
    std::vector<FrameRef> selected;        // every labeled frame, in selection order
};

RunResult run_scenario(StrategyId id, const DatasetBundle& bundle, const ScenarioCfg& cfg,
                       std::uint64_t seed);

// Upper reference: train once on every frame of the initial and unlabeled
// drives, evaluate on the test split.
struct ReferenceResult {
    double test_accuracy = 0.0;
    int train_epochs = 0;
};

ReferenceResult run_full_reference(const DatasetBundle& bundle, const ScenarioCfg& cfg,
                                   std::uint64_t seed);

}  // namespace tplab
