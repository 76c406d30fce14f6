#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "aggdiff/acceptance.hpp"
#include "aggdiff/config.hpp"
#include "aggdiff/errors.hpp"
#include "aggdiff/harness.hpp"
#include "aggdiff/kernels.hpp"
#include "aggdiff/pressure.hpp"

using namespace aggdiff;
namespace fs = std::filesystem;

namespace {

struct LawArgs {
    std::string law = "power";
    double m = 3.0;
    double alpha = 1.0;
    double sigma = 1.0;
    double eta = 1.0;
    double eps = 1.0;

    void add(CLI::App* app) {
        app->add_option("--law", law, "power, hard_sphere, singular_reciprocal, singular_log")
            ->check(CLI::IsMember({"power", "hard_sphere", "singular_reciprocal", "singular_log"}))
            ->capture_default_str();
        app->add_option("--m", m, "power-law exponent")->capture_default_str();
        app->add_option("--alpha", alpha, "singular-law strength")->capture_default_str();
        app->add_option("--sigma", sigma)->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--eta", eta)->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--eps", eps, "kernel length scale")->check(CLI::PositiveNumber)->capture_default_str();
    }
    PressureLaw pressure_law() const {
        if (law == "hard_sphere") return HardSphere{};
        if (law == "singular_reciprocal") return SingularReciprocal{alpha};
        if (law == "singular_log") return SingularLog{alpha};
        return PowerLaw{m};
    }
    InteractionKernel kernel() const {
        InteractionKernel k;
        k.sigma = sigma;
        k.eta = eta;
        return k;
    }
};

void log(const std::string& msg) { std::cerr << "[aggdiff] " << msg << "\n"; }

int cmd_run(const fs::path& config, const fs::path& out) {
    const auto s = load_config(config);
    if (s.sweep) throw ConfigError("config has a [sweep] section; use 'aggdiff sweep'");
    log("running " + s.id + " (" + tier_name(s.tier) + ")");
    const auto rep = run_scenario(s, {out, true});
    log("done in " + format_number(rep.seconds) + " s, " + std::to_string(rep.files.size()) + " files in " +
        (out / s.id).string());
    return 0;
}

int cmd_sweep(const fs::path& config, const fs::path& out) {
    const auto s = load_config(config);
    if (!s.sweep) throw ConfigError("config has no [sweep] section");
    const std::size_t workers = worker_budget();
    log("sweep " + s.id + " over " + s.sweep->key + " (" + std::to_string(s.sweep->values.size()) + " children, " +
        std::to_string(workers) + " workers)");
    const RunOptions opt{out, true};
    const auto rows = run_sweep(s, opt, workers);
    int code = 0;
    for (const auto& r : rows) {
        log(r.id + ": " + (r.ok ? "ok" : r.message));
        if (!r.ok) code = 1;
    }
    if (s.study && code == 0) {
        StudyReference ref = FinestSelf{};
        if (s.study->reference == "oracle") ref = Oracle{load_config(s.study->oracle)};
        const auto table = tabulate_study(s.sweep->key, rows, ref, s.study->metric, s.study->time,
                                          RunOptions{out / s.id, true});
        write_atomic(out / s.id / "study.csv", study_csv(table));
        nlohmann::json j = {{"key", table.key}, {"metric", table.metric}, {"time", table.time}, {"monotone", table.monotone}};
        j["fitted_order"] = table.fitted_order ? nlohmann::json(*table.fitted_order) : nlohmann::json(nullptr);
        write_atomic(out / s.id / "study.json", j.dump(2) + "\n");
        if (!table.monotone) log("study distances are not monotone (flagged, not fatal)");
    }
    log("sweep summary in " + (out / s.id / "sweep_summary.csv").string());
    return code;
}

int cmd_constants(const LawArgs& a) {
    const auto k = a.kernel();
    nlohmann::json j = {{"law", a.law}, {"sigma", a.sigma}, {"eta", a.eta}, {"beta", beta_moment(k)}};
    if (a.law == "power") j["m"] = a.m;
    try {
        const auto dw = DoubleWell::make(a.pressure_law(), a.sigma);
        j["theta"] = dw.theta;
        j["a_shift"] = dw.a_shift;
        j["gamma"] = surface_tension_gamma(dw);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("no double well for this law: ") + e.what());
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_energy(const fs::path& file, const std::string& functional, const LawArgs& a, double eta_w,
               const std::string& boundary) {
    const auto f = read_field_csv(file, boundary == "whole_line" ? Boundary::WholeLineTruncated : Boundary::NoFlux);
    const auto r = evaluate_functional(f, functional, a.pressure_law(), a.kernel(), a.eps, eta_w);
    nlohmann::json j = {{"functional", functional_name(r.id)}, {"terms", r.terms}, {"total", r.total},
                        {"divergent", r.divergent}, {"details", r.details}};
    if (r.cross_check) j["cross_check"] = *r.cross_check;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_kernel(const LawArgs& a, double spacing, const fs::path& out) {
    const auto t = tabulate_green(a.kernel().rescaled(a.eps), spacing);
    std::string csv = "x,value\n";
    for (std::size_t i = 0; i < t.x.size(); ++i) csv += format_number(t.x[i]) + "," + format_number(t.value[i]) + "\n";
    if (out.empty()) std::cout << csv;
    else write_atomic(out, csv);
    return 0;
}

int cmd_keys() {
    for (const auto& k : config_keys())
        std::cout << k.key << "  [" << k.type << "]  default " << k.default_value << "  tiers " << k.tiers << "  " << k.doc
                  << "\n";
    return 0;
}

int cmd_verify(const std::string& suite) {
    const auto results = run_acceptance(suite, std::cout);
    for (const auto& r : results)
        if (!r.pass) return 3;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"aggregation-diffusion solvers, scenario runner and acceptance suite"};
    app.require_subcommand(1);

    fs::path config, out = "out";
    auto* run = app.add_subcommand("run", "run one scenario from a config file");
    run->add_option("config", config)->required()->check(CLI::ExistingFile);
    run->add_option("-o,--output", out, "output directory")->capture_default_str();

    auto* sweep = app.add_subcommand("sweep", "run every child of a [sweep] config (AGGDIFF_WORKERS threads)");
    sweep->add_option("config", config)->required()->check(CLI::ExistingFile);
    sweep->add_option("-o,--output", out, "output directory")->capture_default_str();

    LawArgs law;
    auto* constants = app.add_subcommand("constants", "theta, gamma, beta and a_shift as JSON");
    law.add(constants);

    fs::path field;
    std::string functional = "G_eps", boundary = "no_flux";
    double eta_w = 0.0;
    auto* energy = app.add_subcommand("energy", "evaluate a functional on a field CSV (x_center, rho)");
    energy->add_option("field", field)->required()->check(CLI::ExistingFile);
    energy->add_option("--functional", functional)
        ->check(CLI::IsMember({"E_f", "J_eps", "G_eps", "G_eta_eps"}))
        ->capture_default_str();
    energy->add_option("--eta-w", eta_w, "wall weight for G_eta_eps")->capture_default_str();
    energy->add_option("--boundary", boundary)->check(CLI::IsMember({"no_flux", "whole_line"}))->capture_default_str();
    law.add(energy);

    double spacing = 0.01;
    fs::path table_out;
    auto* kernel = app.add_subcommand("kernel", "tabulate G_eps as CSV (x, value)");
    kernel->add_option("--spacing", spacing)->check(CLI::PositiveNumber)->capture_default_str();
    kernel->add_option("-o,--output", table_out, "file; stdout when omitted");
    law.add(kernel);

    app.add_subcommand("keys", "list config keys with defaults");

    std::string suite = "all";
    auto* verify = app.add_subcommand("verify", "run acceptance criteria: all, a number, or a name");
    verify->add_option("suite", suite)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(config, out);
        if (*sweep) return cmd_sweep(config, out);
        if (*constants) return cmd_constants(law);
        if (*energy) return cmd_energy(field, functional, law, eta_w, boundary);
        if (*kernel) return cmd_kernel(law, spacing, table_out);
        if (*verify) return cmd_verify(suite);
        return cmd_keys();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}
