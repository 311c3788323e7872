#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tplab {

inline constexpr char kResultsHeader[] =
    "strategy,seed,cycle,drive_id,n_selected,labeled_count,labeled_fraction,test_accuracy,"
    "selection_seconds,train_epochs";
inline constexpr char kDiversityHeader[] =
    "strategy,seed,cycle,drive_id,n_selected,mean_pairwise,covering_radius";
inline constexpr char kReferenceHeader[] = "seed,test_accuracy,train_epochs";

struct ResultRow {
    std::string strategy;
    std::uint64_t seed = 0;
    int cycle = 0;
    std::string drive_id;
    std::size_t n_selected = 0;
    std::size_t labeled_count = 0;
    double labeled_fraction = 0.0;
    double test_accuracy = 0.0;
    double selection_seconds = 0.0;
    int train_epochs = 0;
};

struct DiversityRow {
    std::string strategy;
    std::uint64_t seed = 0;
    int cycle = 0;
    std::string drive_id;
    std::size_t n_selected = 0;
    double mean_pairwise = 0.0;
    double covering_radius = 0.0;
};

struct ReferenceRow {
    std::uint64_t seed = 0;
    double test_accuracy = 0.0;
    int train_epochs = 0;
};

std::string csv_of(const ResultRow& r);
std::string csv_of(const DiversityRow& r);
std::string csv_of(const ReferenceRow& r);

// Parsers skip '#' comment lines and insist on the exact header.
std::vector<ResultRow> parse_results_csv(const std::filesystem::path& path);
std::vector<DiversityRow> parse_diversity_csv(const std::filesystem::path& path);
std::vector<ReferenceRow> parse_reference_csv(const std::filesystem::path& path);

// One strategy's accuracy curves on the shared labeled-fraction grid.
struct StrategyCurve {
    std::string strategy;
    std::vector<double> fractions;
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<double>> acc;  // [seed][grid point]
};

// Groups rows into per-strategy curves. Every (strategy, seed) run must sit on
// the same labeled-fraction grid; the error names the offending run.
std::vector<StrategyCurve> build_curves(const std::vector<ResultRow>& rows);

// Writes summary.json, curves.csv, timing_summary.csv, and (when diversity
// rows exist) diversity_summary.csv; with_svg adds curves.svg. `rows` feeds
// the selection-time table; every CSV starts with a `# bundle_hash=` line.
void write_report(const std::vector<ResultRow>& rows, const std::vector<StrategyCurve>& curves,
                  const std::vector<DiversityRow>& diversity,
                  const std::vector<ReferenceRow>& references, const std::string& bundle_hash,
                  const std::filesystem::path& out_dir, bool with_svg);

}  // namespace tplab
