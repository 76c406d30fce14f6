#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aggdiff/config.hpp"
#include "aggdiff/ensemble.hpp"
#include "aggdiff/grid.hpp"
#include "aggdiff/metrics.hpp"
#include "aggdiff/pressure.hpp"
#include "json.hpp"

namespace aggdiff {

// A solver failure inside a scenario, tagged with its id and the CLI exit
// code (1 solver error, 2 config error).
struct ScenarioError : std::runtime_error {
    ScenarioError(const std::string& scenario_id, const std::string& message, int code);
    std::string scenario_id;
    int exit_code;
};

// 2 for ConfigError (including ParseError), ScenarioError's own code, 1 otherwise.
int exit_code_for(const std::exception& e);

using State = std::variant<ParticleEnsemble, GridField>;

struct RunOptions {
    std::filesystem::path output_dir = ".";
    bool write_files = true;
};

struct RunReport {
    std::string id;
    nlohmann::json summary;
    std::vector<std::filesystem::path> files;
    std::vector<double> times;
    std::vector<State> states;
    double seconds = 0.0;
};

// Builds the tier's initial state (grid field or ensemble).
State initial_state(const Scenario& s);

// Runs one scenario and writes its artifacts into output_dir/<id>/ via a
// temp file + rename each. The summary embeds the resolved parameters.
RunReport run_scenario(const Scenario& s, const RunOptions& opt = {});

struct SweepRow {
    std::string id;
    double value = 0.0;
    bool ok = false;
    std::string message;
    RunReport report;
};

// Runs every child of a sweep on up to `workers` threads; rows come back in
// sweep order and sweep_summary.csv is written once all children finish.
std::vector<SweepRow> run_sweep(const Scenario& s, const RunOptions& opt, std::size_t workers = 1);

struct FinestSelf {};
struct Oracle {
    Scenario scenario;
};
using StudyReference = std::variant<FinestSelf, Oracle>;

struct StudyRow {
    double value = 0.0;
    double distance = 0.0;
    std::optional<double> ratio;  // distance / previous distance
};

struct StudyTable {
    std::string key;
    std::string metric;
    double time = 0.0;
    std::vector<StudyRow> rows;
    std::optional<double> fitted_order;  // slope of log distance against log value
    bool monotone = true;                // distances strictly decreasing
};

// Distances of the sweep members to the reference at a matched time.
// FinestSelf compares every value with the last one. metric: "w2", "l1",
// or "auto" (W2 when particles are involved, L1 for two grids).
StudyTable convergence_study(const Scenario& base, const std::string& key, const std::vector<double>& values,
                             const StudyReference& reference, const std::string& metric = "auto",
                             double time = 0.0, const RunOptions& opt = {.output_dir = ".", .write_files = false},
                             std::size_t workers = 1);

// Same table from sweep rows that were already run (rows in sweep order).
StudyTable tabulate_study(const std::string& key, const std::vector<SweepRow>& rows, const StudyReference& reference,
                          const std::string& metric = "auto", double time = 0.0, const RunOptions& opt = {});

// Evaluates E_f, J_eps, G_eps or G_eta_eps on a field. The kernel is
// unscaled; eps sets the length scale.
EnergyReport evaluate_functional(const GridField& field, const std::string& functional, const PressureLaw& law,
                                 const InteractionKernel& kernel, double eps, double eta_w = 0.0);

// State at time t from samples by linear interpolation between the two
// bracketing samples (grids cellwise, ensembles particlewise).
State state_at(const std::vector<double>& times, const std::vector<State>& states, double t);

double state_distance(const State& a, const State& b, const std::string& metric);

// Worker budget from AGGDIFF_WORKERS (default 1).
std::size_t worker_budget();

// CSV helpers shared by the CLI.
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string field_csv(const GridField& rho, const std::vector<double>& phi, const std::vector<double>& pressure);
GridField read_field_csv(const std::filesystem::path& path, Boundary bc = Boundary::NoFlux);
ParticleEnsemble read_positions_csv(const std::filesystem::path& path, double delta);
std::string study_csv(const StudyTable& t);

}  // namespace aggdiff
