#pragma once

#include <mawii/comparators.hpp>
#include <mawii/cue.hpp>
#include <mawii/simulate.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mawii::cli {

enum class Command
{
    estimate,
    simulate,
    sweep,
    diagnose,
    compare,
};

struct RunConfig
{
    Command command = Command::estimate;
    std::filesystem::path input;
    std::string schema;  // file path or inline "key=value;..." text
    OptimizerSettings optimizer;
    double alpha = 0.05;
    SimulationConfig simulation;
    std::filesystem::path genotypes;
    std::vector<double> gammas = {0.01, 0.02, 0.03, 0.04, 0.05};
    std::string diagnostic_f = "fitted_exposure_sq";
    std::filesystem::path out_dir = "out";
    bool svg = false;
    bool verbose = false;
    bool with_reps = false;
    bool write_data = false;
};

enum ExitCode
{
    success = 0,
    estimation_failure = 1,
    input_failure = 2,
};

int cmd_estimate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_diagnose(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Parses arguments (argv[0] included), dispatches, and maps errors to exit
// codes. Errors are written as JSON to `err` and to <out>/error.json.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace mawii::cli
