#include "aggdiff/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "aggdiff/hardsphere.hpp"
#include "aggdiff/metrics.hpp"
#include "aggdiff/particles.hpp"
#include "aggdiff/pde.hpp"

namespace aggdiff {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string num(double v) { return format_number(v); }

PressureLaw law_of(const Scenario& s) {
    const auto& name = s.text("model.law");
    if (name == "hard_sphere") return HardSphere{};
    if (name == "singular_reciprocal") return SingularReciprocal{s.real("model.alpha")};
    if (name == "singular_log") return SingularLog{s.real("model.alpha")};
    return PowerLaw{s.real("model.m")};
}

InteractionKernel kernel_of(const Scenario& s) {
    InteractionKernel k;
    k.sigma = s.real("model.sigma");
    if (s.params.count("model.eta")) k.eta = s.real("model.eta");
    return k;
}

Mollifier mollifier_of(const Scenario& s) {
    return Mollifier(s.real("particles.delta"), s.text("particles.mollifier") == "indicator" ? MollifierShape::IndicatorBall
                                                                                            : MollifierShape::SmoothBump);
}

Boundary boundary_of(const Scenario& s) {
    return s.text("grid.boundary") == "whole_line" ? Boundary::WholeLineTruncated : Boundary::NoFlux;
}

json params_json(const Scenario& s) {
    json j = json::object();
    for (const auto& [key, value] : s.params) {
        const auto dot = key.find('.');
        json& slot = j[key.substr(0, dot)][key.substr(dot + 1)];
        std::visit([&](const auto& v) { slot = v; }, value);
        // Integer-valued keys echo as integers.
        if (const auto* d = std::get_if<double>(&value); d && *d == std::trunc(*d) && std::abs(*d) < 9.0e15 &&
                                                          (key == "scenario.seed" || key == "initial.seed" ||
                                                           key == "particles.n" || key == "grid.cells" ||
                                                           key == "time.energy_every"))
            slot = static_cast<std::int64_t>(*d);
    }
    return j;
}

json initial_json(const InitialData& init) {
    struct V {
        json operator()(const Bump& b) const {
            return {{"kind", "bump"}, {"center", b.center}, {"width", b.width}, {"height", b.height}};
        }
        json operator()(const Plateau& p) const {
            return {{"kind", "plateau"}, {"value", p.value}, {"left", p.left}, {"right", p.right}};
        }
        json operator()(const TwoBumps& t) const { return {{"kind", "two_bumps"}, {"first", (*this)(t.first)}, {"second", (*this)(t.second)}}; }
        json operator()(const Empirical& e) const { return {{"kind", "empirical"}, {"file", e.file.string()}}; }
        json operator()(const Sampled& s) const {
            const json d = std::visit(*this, s.density);
            return {{"kind", "sampled"}, {"density", d}, {"n", s.n}, {"seed", s.seed}};
        }
    };
    return std::visit(V{}, init);
}

json dissipation_json(const std::vector<double>& series, double tol) {
    if (series.size() < 2) return {{"checked", false}};
    const auto r = dissipation_check(series, tol);
    return {{"checked", true},
            {"pass", r.pass},
            {"worst_increase", r.worst_increase},
            {"worst_index", r.worst_index},
            {"tolerance_per_sample", tol}};
}

json dt_stats(const std::vector<double>& dts) {
    if (dts.empty()) return {{"steps", 0}};
    double lo = dts[0], hi = dts[0], sum = 0.0;
    for (double d : dts) {
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        sum += d;
    }
    return {{"steps", dts.size()}, {"min", lo}, {"max", hi}, {"mean", sum / static_cast<double>(dts.size())}};
}

std::string dt_history_csv(const std::vector<double>& dts) {
    std::string out = "step,t,dt\n";
    double t = 0.0;
    for (std::size_t k = 0; k < dts.size(); ++k) {
        t += dts[k];
        out += std::to_string(k + 1) + "," + num(t) + "," + num(dts[k]) + "\n";
    }
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto a = item.find_first_not_of(" \t\r");
        const auto b = item.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? std::string() : item.substr(a, b - a + 1));
    }
    return out;
}

double csv_number(const std::string& s, const fs::path& file, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw InputError(file.string() + ":" + std::to_string(line) + ": not a number '" + s + "'");
    return v;
}

// Reads the named columns of a headed CSV file.
std::vector<std::vector<double>> read_columns(const fs::path& file, const std::vector<std::string>& names,
                                              std::vector<bool>* present = nullptr) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot read " + file.string());
    std::string line;
    if (!std::getline(in, line)) throw InputError(file.string() + " is empty");
    const auto header = split_csv(line);
    std::vector<int> idx;
    for (const auto& n : names) {
        const auto it = std::find(header.begin(), header.end(), n);
        idx.push_back(it == header.end() ? -1 : static_cast<int>(it - header.begin()));
    }
    if (present) {
        present->clear();
        for (int i : idx) present->push_back(i >= 0);
    }
    std::vector<std::vector<double>> cols(names.size());
    std::size_t ln = 1;
    while (std::getline(in, line)) {
        ++ln;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv(line);
        for (std::size_t c = 0; c < names.size(); ++c) {
            if (idx[c] < 0) continue;
            if (static_cast<std::size_t>(idx[c]) >= cells.size())
                throw InputError(file.string() + ":" + std::to_string(ln) + ": missing column " + names[c]);
            cols[c].push_back(csv_number(cells[static_cast<std::size_t>(idx[c])], file, ln));
        }
    }
    return cols;
}

struct Writer {
    const Scenario& s;
    fs::path dir;
    bool enabled;
    std::vector<fs::path> files;
    void put(const std::string& artifact, const std::string& name, const std::string& content) {
        if (!enabled || !s.wants(artifact)) return;
        write_atomic(dir / name, content);
        files.push_back(dir / name);
    }
};

std::string trajectory_csv(const std::vector<double>& times, const std::vector<ParticleEnsemble>& states) {
    std::string out = "t,i,x\n";
    for (std::size_t k = 0; k < times.size(); ++k)
        for (std::size_t i = 0; i < states[k].count(); ++i)
            out += num(times[k]) + "," + std::to_string(i) + "," + num(states[k].positions[i]) + "\n";
    return out;
}

double quadratic_energy(const ParticleEnsemble& e, double k) {
    double s = 0.0;
    for (double x : e.positions) s += 0.5 * k * x * x;
    return s * e.weight();
}

void run_blob(const Scenario& s, RunReport& rep, Writer& w) {
    const auto ens = std::get<ParticleEnsemble>(initial_state(s));
    BlobConfig cfg;
    cfg.law = law_of(s);
    cfg.kernel = kernel_of(s);
    cfg.kernel.scale_eps = s.real("model.eps");
    cfg.mollifier = mollifier_of(s);
    cfg.dt = s.real("time.dt");
    cfg.integrator = s.text("blob.integrator") == "heun" ? Integrator::Heun : Integrator::Euler;
    cfg.eval_spacing = s.real("blob.eval_spacing");
    cfg.interaction_weight = s.real("model.interaction_weight");
    const std::size_t every = s.count("time.energy_every");
    const auto tr = blob_simulate(cfg, ens, s.real("time.T"), s.list("time.samples"), every);

    w.put("trajectory", "trajectory.csv", trajectory_csv(tr.times, tr.states));
    std::string diag = "t,energy_entropy,energy_interaction,second_moment\n";
    for (std::size_t k = 0; k < tr.times.size(); ++k)
        diag += num(tr.times[k]) + "," + num(tr.energies[k].terms.at("entropy")) + "," +
                num(tr.energies[k].terms.at("interaction")) + "," + num(tr.second_moments[k]) + "\n";
    w.put("diagnostics", "diagnostics.csv", diag);
    w.put("dt_history", "dt_history.csv", dt_history_csv(tr.step_dt));

    const double dtmax = tr.step_dt.empty() ? 0.0 : *std::max_element(tr.step_dt.begin(), tr.step_dt.end());
    const double n = static_cast<double>(ens.count());
    rep.summary["particles"] = ens.count();
    rep.summary["conservation"] = {{"initial_mass", 1.0}, {"final_mass", 1.0}, {"max_relative_drift", 0.0}};
    rep.summary["dissipation"] = dissipation_json(tr.step_energy, 10.0 * dtmax * dtmax * n * static_cast<double>(every));
    rep.summary["dt"] = dt_stats(tr.step_dt);
    rep.summary["final_energy"] = tr.energies.back().total;
    rep.summary["second_moment"] = {{"initial", tr.second_moments.front()}, {"final", tr.second_moments.back()}};
    rep.times = tr.times;
    for (const auto& e : tr.states) rep.states.emplace_back(e);
}

void run_hard_sphere(const Scenario& s, RunReport& rep, Writer& w) {
    const auto ens = std::get<ParticleEnsemble>(initial_state(s));
    HsConfig cfg;
    if (s.real("time.dt") > 0.0) cfg.dt = s.real("time.dt");
    cfg.gap_tol = s.real("hardsphere.gap_tol");
    cfg.feas_tol = s.real("hardsphere.feas_tol");
    auto kernel = kernel_of(s);
    kernel.scale_eps = s.real("model.eps");
    const bool self = s.text("hardsphere.desired") == "self_consistent";
    const double strength = s.real("hardsphere.strength");
    DesiredVelocityMode mode;
    if (self) {
        SelfConsistent sc;
        sc.kernel = kernel;
        sc.mollifier = mollifier_of(s);
        mode = sc;
    }
    else mode = FixedPotential{[strength](double x) { return -0.5 * strength * x * x; },
                               [strength](double x) { return -strength * x; }};
    const bool energies = s.count("time.energy_every") > 0 && self;
    const auto tr = hs_simulate(ens, cfg, mode, s.real("time.T"), s.list("time.samples"),
                                energies ? std::optional<InteractionKernel>(kernel) : std::nullopt);

    w.put("trajectory", "trajectory.csv", trajectory_csv(tr.times, tr.states));
    const Mollifier emoll(ens.delta, MollifierShape::IndicatorBall);
    std::string diag = "t,energy_entropy,energy_interaction,second_moment\n";
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        const double inter = self ? hs_energy(tr.states[k], kernel, emoll).terms.at("interaction")
                                  : quadratic_energy(tr.states[k], strength);
        diag += num(tr.times[k]) + ",0," + num(inter) + "," + num(second_moment(tr.states[k])) + "\n";
    }
    w.put("diagnostics", "diagnostics.csv", diag);
    std::string contacts = "t,i,j,p_ij\n";
    for (const auto& c : tr.contacts)
        contacts += num(c.t) + "," + std::to_string(c.i) + "," + std::to_string(c.j) + "," + num(c.pressure) + "\n";
    w.put("contacts", "contacts.csv", contacts);

    double dmin = min_pair_distance(ens);
    for (double d : tr.min_distance) dmin = std::min(dmin, d);
    const double n = static_cast<double>(ens.count());
    rep.summary["particles"] = ens.count();
    rep.summary["conservation"] = {{"initial_mass", 1.0}, {"final_mass", 1.0}, {"max_relative_drift", 0.0}};
    rep.summary["feasibility"] = {{"min_distance", dmin},
                                  {"two_delta", 2.0 * ens.delta},
                                  {"margin_over_delta", (dmin - 2.0 * ens.delta) / ens.delta},
                                  {"max_restoration", tr.max_restoration}};
    rep.summary["dissipation"] = dissipation_json(tr.step_energy, 10.0 * cfg.dt * cfg.dt * n);
    rep.summary["dt"] = {{"steps", tr.steps}, {"dt", cfg.dt}};
    if (!tr.step_energy.empty()) rep.summary["final_energy"] = tr.step_energy.back();
    rep.times = tr.times;
    for (const auto& e : tr.states) rep.states.emplace_back(e);
}

PdeConfig pde_config(const Scenario& s) {
    PdeConfig c;
    c.law = law_of(s);
    c.kernel = kernel_of(s);
    c.eps = s.real("model.eps");
    const auto& ts = s.text("pde.time_scaling");
    c.time_scaling = ts == "hele_shaw" ? TimeScaling::HeleShaw : ts == "stefan" ? TimeScaling::Stefan : TimeScaling::Micro;
    const auto& pot = s.text("pde.potential");
    if (pot == "robin") c.potential = RobinSolve{RobinBC{s.real("pde.robin_a"), s.real("pde.robin_b")}};
    else if (pot == "obstacle") c.potential = ObstacleExtendByZero{};
    else if (pot == "eta_wall") c.potential = EtaBoundaryDrift{s.real("model.eta_w")};
    c.diffusion = s.text("pde.diffusion") == "explicit" ? DiffusionScheme::Explicit : DiffusionScheme::SemiImplicit;
    c.drift = s.text("pde.drift") == "upwind" ? DriftScheme::Upwind : DriftScheme::PressureConsistent;
    c.dt_safety = s.real("pde.dt_safety");
    c.dt_max = s.real("pde.dt_max");
    c.interaction_weight = s.real("model.interaction_weight");
    c.boundary_mass_tol = s.real("pde.boundary_mass_tol");
    return c;
}

std::optional<DoubleWell> double_well_of(const PressureLaw& law, double sigma) {
    try {
        return DoubleWell::make(law, sigma);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

json interface_json(const GridField& f, const DoubleWell& dw) {
    const auto d = interface_diagnostics(f, dw);
    json j = {{"perimeter_count", d.perimeter_count}, {"positions", d.positions}};
    j["width"] = d.width ? json(*d.width) : json(nullptr);
    j["plateau_value"] = d.plateau_value ? json(*d.plateau_value) : json(nullptr);
    return j;
}

void write_snapshots(Writer& w, const std::vector<double>& times, const std::vector<GridField>& states,
                     const std::function<std::vector<double>(const GridField&)>& phi,
                     const std::function<double(double)>& pressure) {
    std::string index = "k,t,file\n";
    for (std::size_t k = 0; k < states.size(); ++k) {
        std::string name = std::to_string(k);
        name = "snapshot_" + std::string(4 - std::min<std::size_t>(4, name.size()), '0') + name + ".csv";
        std::vector<double> p(states[k].size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = pressure(states[k].values[i]);
        w.put("snapshots", name, field_csv(states[k], phi(states[k]), p));
        index += std::to_string(k) + "," + num(times[k]) + "," + name + "\n";
    }
    w.put("snapshots", "snapshots.csv", index);
}

void run_pde(const Scenario& s, RunReport& rep, Writer& w) {
    const auto init = std::get<GridField>(initial_state(s));
    const auto cfg = pde_config(s);
    const std::size_t every = s.count("time.energy_every");
    // Stride 0 keeps only the sample endpoints of the series.
    const auto run = pde_run(cfg, init, s.real("time.T"), s.list("time.samples"),
                             every == 0 ? std::numeric_limits<std::size_t>::max() : every);

    write_snapshots(
        w, run.times, run.states, [&](const GridField& f) { return potential_field(f, cfg).values; },
        [&](double r) { return f_prime(cfg.law, r); });
    std::string energy = "t,energy,entropy\n";
    for (std::size_t k = 0; k < run.series_times.size(); ++k)
        energy += num(run.series_times[k]) + "," + num(run.energies[k]) + "," + num(run.entropies[k]) + "\n";
    w.put("energy", "energy.csv", energy);
    w.put("dt_history", "dt_history.csv", dt_history_csv(run.dt_history));

    const double dtmax = run.dt_history.empty() ? 0.0 : *std::max_element(run.dt_history.begin(), run.dt_history.end());
    const double stride = static_cast<double>(every == 0 ? std::max<std::size_t>(run.steps, 1) : every);
    rep.summary["energy_functional"] = functional_name(run.energy_id);
    rep.summary["conservation"] = {{"initial_mass", run.initial_mass},
                                   {"final_mass", run.states.back().mass()},
                                   {"max_relative_drift", run.max_relative_mass_drift}};
    rep.summary["min_value"] = run.min_value;
    rep.summary["dissipation"] = dissipation_json(run.energies, 10.0 * stride * dtmax * dtmax);
    rep.summary["dt"] = dt_stats(run.dt_history);
    rep.summary["dt"]["halvings"] = run.halvings;
    if (!run.energies.empty()) rep.summary["final_energy"] = run.energies.back();
    if (const auto rate = entropy_growth_rate(cfg, init); rate && !run.entropies.empty()) {
        bool ok = true;
        for (std::size_t k = 0; k < run.entropies.size(); ++k)
            ok = ok && run.entropies[k] <= run.entropies.front() + *rate * run.series_times[k] + 1e-12;
        rep.summary["entropy_bound"] = {{"rate", *rate}, {"pass", ok}};
    }
    if (const auto dw = double_well_of(cfg.law, cfg.kernel.sigma)) rep.summary["interface"] = interface_json(run.states.back(), *dw);
    rep.times = run.times;
    for (const auto& f : run.states) rep.states.emplace_back(f);
}

void run_stefan(const Scenario& s, RunReport& rep, Writer& w) {
    const auto init = std::get<GridField>(initial_state(s));
    const auto dw = DoubleWell::make(law_of(s), s.real("model.sigma"));
    StefanOptions opt;
    opt.dt = s.real("time.dt");
    opt.prepared_tol = s.real("stefan.prepared_tol");
    const auto run = stefan_solve(init, dw, s.real("time.T"), s.list("time.samples"), opt);

    write_snapshots(
        w, run.times, run.states, [](const GridField& f) { return std::vector<double>(f.size(), 0.0); },
        [&](double r) { return h_hull_prime(dw, r); });
    std::string fronts = "t,left,right\n";
    for (std::size_t k = 0; k < run.times.size(); ++k)
        fronts += num(run.times[k]) + "," + num(run.support_left[k]) + "," + num(run.support_right[k]) + "\n";
    w.put("interfaces", "interfaces.csv", fronts);

    const double m0 = init.mass();
    double drift = 0.0;
    for (const auto& f : run.states) drift = std::max(drift, std::abs(f.mass() - m0) / m0);
    rep.summary["conservation"] = {{"initial_mass", m0}, {"final_mass", run.states.back().mass()}, {"max_relative_drift", drift}};
    rep.summary["dt"] = {{"steps", run.steps}};
    rep.summary["theta"] = dw.theta;
    rep.summary["interface"] = interface_json(run.states.back(), dw);
    rep.times = run.times;
    for (const auto& f : run.states) rep.states.emplace_back(f);
}

void run_energy(const Scenario& s, RunReport& rep, Writer& w) {
    const auto f = std::get<GridField>(initial_state(s));
    const auto r = evaluate_functional(f, s.text("energy.functional"), law_of(s), kernel_of(s), s.real("model.eps"),
                                       s.real("model.eta_w"));
    std::string csv = "term,value\n";
    for (const auto& [k, v] : r.terms) csv += k + "," + num(v) + "\n";
    csv += "total," + num(r.total) + "\n";
    if (r.cross_check) csv += "cross_check," + num(*r.cross_check) + "\n";
    w.put("energy", "energy.csv", csv);
    rep.summary["energy"] = {{"functional", functional_name(r.id)}, {"terms", r.terms}, {"total", r.total},
                             {"divergent", r.divergent}, {"details", r.details}};
    if (r.cross_check) rep.summary["energy"]["cross_check"] = *r.cross_check;
    rep.summary["final_energy"] = r.total;
    rep.summary["conservation"] = {{"initial_mass", f.mass()}, {"final_mass", f.mass()}, {"max_relative_drift", 0.0}};
    rep.times = {0.0};
    rep.states = {f};
}

std::vector<SweepRow> run_children(const std::vector<Scenario>& children, const std::vector<double>& values,
                                   const RunOptions& opt, std::size_t workers) {
    std::vector<SweepRow> rows(children.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (std::size_t k = next++; k < children.size(); k = next++) {
            rows[k].id = children[k].id;
            rows[k].value = values[k];
            try {
                rows[k].report = run_scenario(children[k], opt);
                rows[k].ok = true;
            } catch (const std::exception& e) {
                rows[k].message = e.what();
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(workers, children.size()));
    if (n == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return rows;
}

std::string csv_escape(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace

EnergyReport evaluate_functional(const GridField& f, const std::string& functional, const PressureLaw& law,
                                 const InteractionKernel& kernel, double eps, double eta_w) {
    if (functional == "E_f") return energy_E_f(f, law, kernel.rescaled(kernel.scale_eps * eps));
    const auto dw = DoubleWell::make(law, kernel.sigma);
    if (functional == "J_eps") return energy_J_eps(f, dw, kernel, eps);
    if (functional == "G_eps") return energy_G_eps(f, dw, kernel, eps);
    if (functional == "G_eta_eps") return energy_G_eta_eps(f, dw, kernel, eps, eta_w);
    throw ConfigError("unknown functional '" + functional + "' (E_f, J_eps, G_eps, G_eta_eps)");
}

ScenarioError::ScenarioError(const std::string& id, const std::string& message, int code)
    : std::runtime_error("scenario '" + id + "': " + message), scenario_id(id), exit_code(code) {}

int exit_code_for(const std::exception& e) {
    if (const auto* se = dynamic_cast<const ScenarioError*>(&e)) return se->exit_code;
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    return 1;
}

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw NumericalError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw NumericalError("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string field_csv(const GridField& rho, const std::vector<double>& phi, const std::vector<double>& pressure) {
    std::string out = "x_center,rho,phi,pressure\n";
    for (std::size_t i = 0; i < rho.size(); ++i)
        out += num(rho.center(i)) + "," + num(rho.values[i]) + "," + num(phi[i]) + "," + num(pressure[i]) + "\n";
    return out;
}

GridField read_field_csv(const fs::path& path, Boundary bc) {
    std::vector<bool> present;
    const auto cols = read_columns(path, {"x_center", "rho"}, &present);
    if (!present[0] || !present[1]) throw InputError(path.string() + ": needs columns x_center and rho");
    const auto& x = cols[0];
    if (x.size() < 2) throw InputError(path.string() + ": needs at least two cells");
    const double dx = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
    for (std::size_t i = 1; i < x.size(); ++i)
        if (std::abs(x[i] - x[i - 1] - dx) > 1e-9 * std::max(1.0, std::abs(dx)))
            throw InputError(path.string() + ": x_center is not uniformly spaced");
    if (!(dx > 0.0)) throw InputError(path.string() + ": x_center must increase");
    GridField f;
    f.values = cols[1];
    f.dx = dx;
    f.x_left = x.front() - 0.5 * dx;
    f.bc = bc;
    for (double v : f.values)
        if (v < 0.0) throw InputError(path.string() + ": negative density");
    return f;
}

ParticleEnsemble read_positions_csv(const fs::path& path, double delta) {
    std::vector<bool> present;
    const auto cols = read_columns(path, {"x", "t"}, &present);
    if (!present[0]) throw InputError(path.string() + ": needs a column x");
    ParticleEnsemble e;
    e.delta = delta;
    if (present[1] && !cols[1].empty()) {
        const double last = *std::max_element(cols[1].begin(), cols[1].end());
        for (std::size_t k = 0; k < cols[0].size(); ++k)
            if (cols[1][k] == last) e.positions.push_back(cols[0][k]);
    } else {
        e.positions = cols[0];
    }
    e.validate();
    return e;
}

State initial_state(const Scenario& s) {
    const bool particles = s.tier == Tier::Blob || s.tier == Tier::HardSphere;
    if (particles) {
        const double delta = s.real("particles.delta");
        const std::size_t n = s.count("particles.n");
        if (const auto* e = std::get_if<Empirical>(&s.initial)) return read_positions_csv(e->file, delta);
        if (const auto* sm = std::get_if<Sampled>(&s.initial)) {
            const auto [lo, hi] = shape_support(sm->density);
            return sample_iid([&](double x) { return shape_value(sm->density, x); }, lo, hi, sm->n, delta, sm->seed);
        }
        const DensityShape shape = std::visit(
            [](const auto& v) -> DensityShape {
                if constexpr (std::is_same_v<std::decay_t<decltype(v)>, Bump> ||
                              std::is_same_v<std::decay_t<decltype(v)>, Plateau> ||
                              std::is_same_v<std::decay_t<decltype(v)>, TwoBumps>)
                    return v;
                else
                    return Bump{};
            },
            s.initial);
        const auto [lo, hi] = shape_support(shape);
        auto fn = [&](double x) { return shape_value(shape, x); };
        if (s.text("particles.sampling") == "iid")
            return sample_iid(fn, lo, hi, n, delta, static_cast<std::uint64_t>(s.real("initial.seed")));
        return sample_quantiles(fn, lo, hi, n, delta);
    }
    const Boundary bc = boundary_of(s);
    if (const auto* e = std::get_if<Empirical>(&s.initial)) return read_field_csv(e->file, bc);
    const double left = s.real("grid.left"), right = s.real("grid.right");
    const std::size_t cells = s.count("grid.cells");
    if (const auto* p = std::get_if<Plateau>(&s.initial))
        return GridField::indicator(left, right, cells, p->left, p->right, p->value, bc);
    if (const auto* b = std::get_if<Bump>(&s.initial)) return GridField::from_function(left, right, cells, *b, bc);
    if (const auto* t = std::get_if<TwoBumps>(&s.initial)) return GridField::from_function(left, right, cells, *t, bc);
    throw ConfigError("initial data kind does not apply to tier " + tier_name(s.tier));
}

RunReport run_scenario(const Scenario& s, const RunOptions& opt) {
    RunReport rep;
    rep.id = s.id;
    Writer w{s, opt.output_dir / s.id, opt.write_files, {}};
    const auto t0 = std::chrono::steady_clock::now();
    rep.summary = {{"id", s.id},
                   {"tier", tier_name(s.tier)},
                   {"params", params_json(s)},
                   {"initial", initial_json(s.initial)},
                   {"rng", {{"algorithm", "mt19937_64"}, {"seed", static_cast<std::uint64_t>(s.real("scenario.seed"))}}}};
    try {
        switch (s.tier) {
            case Tier::Blob: run_blob(s, rep, w); break;
            case Tier::HardSphere: run_hard_sphere(s, rep, w); break;
            case Tier::Pde: run_pde(s, rep, w); break;
            case Tier::Stefan: run_stefan(s, rep, w); break;
            case Tier::EnergyStudy: run_energy(s, rep, w); break;
        }
    } catch (const ScenarioError&) {
        throw;
    } catch (const ConfigError& e) {
        throw ScenarioError(s.id, e.what(), 2);
    } catch (const std::exception& e) {
        throw ScenarioError(s.id, e.what(), 1);
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.summary["timing"] = {{"seconds", rep.seconds}};
    std::vector<std::string> names;
    for (const auto& f : w.files) names.push_back(f.filename().string());
    names.push_back("summary.json");
    rep.summary["files"] = names;
    if (opt.write_files) {
        write_atomic(w.dir / "summary.json", rep.summary.dump(2) + "\n");
        w.files.push_back(w.dir / "summary.json");
    }
    rep.files = w.files;
    return rep;
}

std::vector<SweepRow> run_sweep(const Scenario& s, const RunOptions& opt, std::size_t workers) {
    if (!s.sweep) throw ConfigError("scenario '" + s.id + "' has no [sweep] section");
    RunOptions child = opt;
    child.output_dir = opt.output_dir / s.id;
    auto rows = run_children(expand_sweep(s), s.sweep->values, child, workers);

    std::string csv = "id,key,value,status,seconds,final_mass,max_relative_mass_drift,final_energy,dissipation_pass,message\n";
    for (const auto& r : rows) {
        const auto& sm = r.report.summary;
        auto field = [&](const json& j) { return j.is_number() ? num(j.get<double>()) : std::string(); };
        std::string mass, drift, energy, diss;
        if (r.ok) {
            if (sm.contains("conservation")) {
                mass = field(sm["conservation"]["final_mass"]);
                drift = field(sm["conservation"]["max_relative_drift"]);
            }
            if (sm.contains("final_energy")) energy = field(sm["final_energy"]);
            if (sm.contains("dissipation") && sm["dissipation"].value("checked", false))
                diss = sm["dissipation"]["pass"].get<bool>() ? "true" : "false";
        }
        csv += r.id + "," + s.sweep->key + "," + num(r.value) + "," + (r.ok ? "ok" : "error") + "," +
               (r.ok ? num(r.report.seconds) : std::string()) + "," + mass + "," + drift + "," + energy + "," + diss + "," +
               csv_escape(r.message) + "\n";
    }
    if (opt.write_files) write_atomic(child.output_dir / "sweep_summary.csv", csv);
    return rows;
}

State state_at(const std::vector<double>& times, const std::vector<State>& states, double t) {
    if (times.empty() || times.size() != states.size()) throw InputError("state_at needs matching samples");
    const double tol = 1e-12 * std::max(1.0, std::abs(t));
    if (t < times.front() - tol || t > times.back() + tol) throw InputError("time " + num(t) + " is outside the samples");
    std::size_t k = 0;
    while (k + 1 < times.size() && times[k + 1] < t - tol) ++k;
    if (std::abs(times[k] - t) <= tol) return states[k];
    if (k + 1 >= times.size() || std::abs(times[k + 1] - t) <= tol) return states[std::min(k + 1, times.size() - 1)];
    const double a = (t - times[k]) / (times[k + 1] - times[k]);
    if (const auto* g0 = std::get_if<GridField>(&states[k])) {
        const auto& g1 = std::get<GridField>(states[k + 1]);
        GridField out = *g0;
        for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = (1.0 - a) * g0->values[i] + a * g1.values[i];
        return out;
    }
    const auto& e0 = std::get<ParticleEnsemble>(states[k]);
    const auto& e1 = std::get<ParticleEnsemble>(states[k + 1]);
    ParticleEnsemble out = e0;
    for (std::size_t i = 0; i < out.positions.size(); ++i)
        out.positions[i] = (1.0 - a) * e0.positions[i] + a * e1.positions[i];
    return out;
}

double state_distance(const State& a, const State& b, const std::string& metric) {
    const bool grids = std::holds_alternative<GridField>(a) && std::holds_alternative<GridField>(b);
    if (metric == "l1" || (metric == "auto" && grids)) {
        if (!grids) throw InputError("L1 distance needs two grid fields");
        const auto& ga = std::get<GridField>(a);
        const auto& gb = std::get<GridField>(b);
        if (ga.size() == gb.size() && ga.x_left == gb.x_left && ga.dx == gb.dx) return l1_distance(ga, gb);
        return l1_distance_resampled(ga, gb);
    }
    if (metric != "w2" && metric != "auto") throw ConfigError("unknown metric '" + metric + "'");
    return std::visit([](const auto& x, const auto& y) { return wasserstein1d(x, y); }, a, b);
}

StudyTable tabulate_study(const std::string& key, const std::vector<SweepRow>& rows, const StudyReference& reference,
                          const std::string& metric, double time, const RunOptions& opt) {
    if (rows.size() < 3) throw ConfigError("a convergence study needs at least 3 values");
    for (const auto& r : rows)
        if (!r.ok) throw ScenarioError(r.id, r.message, 1);
    StudyTable table;
    table.key = key;
    table.metric = metric;
    table.time = time > 0.0 ? time : rows.back().report.times.back();
    auto at = [&](const RunReport& r) { return state_at(r.times, r.states, table.time); };

    std::optional<State> ref;
    std::size_t count = rows.size();
    if (const auto* o = std::get_if<Oracle>(&reference)) {
        ref = at(run_scenario(o->scenario, opt));
    } else {
        ref = at(rows.back().report);
        --count;
    }
    for (std::size_t k = 0; k < count; ++k) {
        StudyRow row;
        row.value = rows[k].value;
        row.distance = state_distance(at(rows[k].report), *ref, metric);
        if (!table.rows.empty() && table.rows.back().distance > 0.0) row.ratio = row.distance / table.rows.back().distance;
        if (!table.rows.empty() && !(row.distance < table.rows.back().distance)) table.monotone = false;
        table.rows.push_back(row);
    }
    // Least-squares slope of log d against log value.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t n = 0;
    for (const auto& r : table.rows) {
        if (!(r.distance > 0.0) || !(r.value > 0.0)) continue;
        const double x = std::log(r.value), y = std::log(r.distance);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    const double den = static_cast<double>(n) * sxx - sx * sx;
    if (n >= 2 && std::abs(den) > 0.0) table.fitted_order = (static_cast<double>(n) * sxy - sx * sy) / den;
    return table;
}

StudyTable convergence_study(const Scenario& base, const std::string& key, const std::vector<double>& values,
                             const StudyReference& reference, const std::string& metric, double time,
                             const RunOptions& opt, std::size_t workers) {
    if (values.size() < 3) throw ConfigError("a convergence study needs at least 3 values");
    if (!base.params.count(key) || !std::holds_alternative<double>(base.params.at(key)))
        throw ConfigError("study key '" + key + "' is not a numeric parameter of scenario '" + base.id + "'");
    for (double v : values)
        if (!std::isfinite(v)) throw ConfigError("study values must be finite");
    Scenario s = base;
    s.sweep = Sweep{key, values};
    s.study.reset();
    RunOptions child = opt;
    child.output_dir = opt.output_dir / base.id;
    const auto rows = run_children(expand_sweep(s), values, child, workers);
    return tabulate_study(key, rows, reference, metric, time > 0.0 ? time : base.real("time.T"), child);
}

std::string study_csv(const StudyTable& t) {
    std::string out = "value,distance,ratio\n";
    for (const auto& r : t.rows) out += num(r.value) + "," + num(r.distance) + "," + (r.ratio ? num(*r.ratio) : "") + "\n";
    return out;
}

std::size_t worker_budget() {
    const char* env = std::getenv("AGGDIFF_WORKERS");
    if (!env || !*env) return 1;
    std::size_t n = 0;
    const std::string s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc() || ptr != s.data() + s.size() || n == 0)
        throw ConfigError("AGGDIFF_WORKERS must be a positive integer, got '" + s + "'");
    return n;
}

}  // namespace aggdiff
