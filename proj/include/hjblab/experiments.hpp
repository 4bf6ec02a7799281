#pragma once

#include "hjblab/ambrosetti.hpp"
#include "hjblab/config.hpp"

#include <string>
#include <vector>

namespace hjb {

/// Validated experiment inputs assembled from a config tree.
struct ExperimentSetup {
    ControlledOperator op;
    GridPtr grid;
    Field h;                // right-hand side component, sampled on the grid
    SolverParams solver;
    APParams ap;
    std::string kind;
    std::uint64_t seed = 0;
    std::string out_root;
    ConfigTable raw;        // kind-specific sections live under [experiment.*]
    std::string config_hash;
};

/// Parses and validates; throws ConfigError naming the offending section.
/// out_override (CLI/env) wins over [experiment].out_dir when nonempty.
ExperimentSetup load_setup(const ConfigTable& root, const std::string& config_text,
                           const std::string& out_override);

struct EmittedFile {
    std::string path;      // relative to the manifest directory
    std::string checksum;  // fnv64 of the bytes
};

struct ExperimentStatus {
    std::string kind;
    bool passed = false;
    std::string detail;    // failure names the violated invariant
    std::vector<EmittedFile> files;
};

struct RunManifest {
    std::string config_hash;
    std::string version;
    std::string timestamp;
    std::vector<ExperimentStatus> experiments;

    bool all_passed() const;
};

/// Executes the configured experiment kind (or every kind for full_suite),
/// writes the CSV/JSON artifacts plus manifest.json under out_root, and
/// returns the manifest.
RunManifest run_experiments(const ExperimentSetup& setup);

/// Reshapes a previous run's branch/census/eigen outputs into plot-friendly
/// long-format CSVs under target_dir. Throws when the manifest references
/// no reshapeable outputs.
void emit_plotdata(const std::string& manifest_path, const std::string& target_dir);

/// Runs the calibration suite described by [calibrate] / [[calibrate.problems]]
/// and writes calibration.json.
CalibrationReport run_calibration(const ConfigTable& root, const std::string& out_override);

} // namespace hjb
