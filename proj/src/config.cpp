#include "aggdiff/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "aggdiff/pressure.hpp"

namespace aggdiff {

namespace {

constexpr unsigned kBlob = 1, kHard = 2, kPde = 4, kStefan = 8, kEnergy = 16;
constexpr unsigned kAll = 31, kParticles = kBlob | kHard, kGrid = kPde | kStefan | kEnergy;
constexpr unsigned kTimed = kBlob | kHard | kPde | kStefan;

enum class Type { Real, Integer, Text, List };
enum class Check { None, Positive, NonNegative, AtLeastOne, AtLeastThree };

const double kUnset = std::numeric_limits<double>::quiet_NaN();

struct Spec {
    std::string key;
    Type type;
    ParamValue def;
    unsigned tiers;
    Check check = Check::None;
    std::vector<std::string> choices = {};
    std::string doc = {};
    bool required = false;
};

unsigned tier_bit(Tier t) {
    switch (t) {
        case Tier::Blob: return kBlob;
        case Tier::HardSphere: return kHard;
        case Tier::Pde: return kPde;
        case Tier::Stefan: return kStefan;
        case Tier::EnergyStudy: return kEnergy;
    }
    return 0;
}

const std::vector<Spec>& specs() {
    static const std::vector<Spec> table = {
        {"scenario.id", Type::Text, std::string(), kAll, Check::None, {}, "scenario name, used for output paths", true},
        {"scenario.tier", Type::Text, std::string(), kAll, Check::None, {"blob", "hard_sphere", "pde", "stefan", "energy"},
         "solver tier", true},
        {"scenario.seed", Type::Integer, 1.0, kAll, Check::NonNegative, {}, "seed of the mt19937_64 generator"},
        {"scenario.outputs", Type::Text, std::string(), kAll, Check::None, {},
         "comma list of artifacts; empty = all of the tier"},

        {"model.law", Type::Text, std::string("power"), kBlob | kPde | kStefan | kEnergy, Check::None,
         {"power", "hard_sphere", "singular_reciprocal", "singular_log"}, "pressure law"},
        {"model.m", Type::Real, 3.0, kBlob | kPde | kStefan | kEnergy, Check::Positive, {}, "power-law exponent"},
        {"model.alpha", Type::Real, 1.0, kBlob | kPde | kStefan | kEnergy, Check::Positive, {}, "singular-law strength"},
        {"model.sigma", Type::Real, 1.0, kAll, Check::Positive, {}, "kernel sigma"},
        {"model.eta", Type::Real, 1.0, kBlob | kHard | kPde | kEnergy, Check::Positive, {}, "kernel eta"},
        {"model.eps", Type::Real, 1.0, kBlob | kHard | kPde | kEnergy, Check::Positive, {}, "kernel length scale"},
        {"model.interaction_weight", Type::Real, 1.0, kBlob | kPde, Check::NonNegative, {}, "attraction weight"},
        {"model.eta_w", Type::Real, 0.0, kPde | kEnergy, Check::NonNegative, {}, "wall interaction weight"},

        {"initial.kind", Type::Text, std::string("bump"), kAll, Check::None,
         {"bump", "plateau", "two_bumps", "empirical", "sampled"}, "initial data"},
        {"initial.center", Type::Real, 0.0, kAll, Check::None, {}, "bump center"},
        {"initial.width", Type::Real, 1.0, kAll, Check::Positive, {}, "bump half-width"},
        {"initial.height", Type::Real, 1.0, kAll, Check::Positive, {}, "bump height"},
        {"initial.value", Type::Real, kUnset, kAll, Check::Positive, {}, "plateau level; default theta of the law"},
        {"initial.left", Type::Real, -1.0, kAll, Check::None, {}, "plateau left end"},
        {"initial.right", Type::Real, 1.0, kAll, Check::None, {}, "plateau right end"},
        {"initial.centers", Type::List, std::vector<double>{-1.0, 1.0}, kAll, Check::None, {}, "two_bumps centers"},
        {"initial.widths", Type::List, std::vector<double>{0.5, 0.5}, kAll, Check::Positive, {}, "two_bumps half-widths"},
        {"initial.heights", Type::List, std::vector<double>{1.0, 1.0}, kAll, Check::Positive, {}, "two_bumps heights"},
        {"initial.file", Type::Text, std::string(), kAll, Check::None, {}, "empirical CSV, relative to the config"},
        {"initial.density", Type::Text, std::string("bump"), kParticles, Check::None, {"bump", "plateau", "two_bumps"},
         "shape sampled by kind = sampled"},
        {"initial.seed", Type::Integer, kUnset, kParticles, Check::NonNegative, {}, "seed of kind = sampled; default scenario.seed"},

        {"grid.left", Type::Real, -2.0, kGrid, Check::None, {}, "left end"},
        {"grid.right", Type::Real, 2.0, kGrid, Check::None, {}, "right end"},
        {"grid.cells", Type::Integer, 400.0, kGrid, Check::AtLeastThree, {}, "number of cells"},
        {"grid.boundary", Type::Text, std::string("no_flux"), kGrid, Check::None, {"no_flux", "whole_line"},
         "no_flux walls or truncated whole line"},

        {"particles.n", Type::Integer, 200.0, kParticles, Check::AtLeastOne, {}, "particle count"},
        {"particles.delta", Type::Real, 0.1, kParticles, Check::Positive, {}, "particle radius / mollifier width"},
        {"particles.mollifier", Type::Text, std::string("smooth_bump"), kParticles, Check::None,
         {"smooth_bump", "indicator"}, "mollifier shape"},
        {"particles.sampling", Type::Text, std::string("quantile"), kParticles, Check::None, {"quantile", "iid"},
         "placement for bump/plateau/two_bumps"},

        {"blob.integrator", Type::Text, std::string("euler"), kBlob, Check::None, {"euler", "heun"}, "time integrator"},
        {"blob.eval_spacing", Type::Real, 0.0, kBlob, Check::NonNegative, {}, "pressure quadrature spacing; 0 = delta/8"},

        {"time.T", Type::Real, 1.0, kTimed, Check::Positive, {}, "final time"},
        {"time.dt", Type::Real, 0.0, kBlob | kHard | kStefan, Check::NonNegative, {},
         "step; 0 = tier rule (blob 0.2 delta^2/max(1, f''rho), hard_sphere 1e-3, stefan 0.1 dx)"},
        {"time.samples", Type::List, std::vector<double>{}, kTimed, Check::Positive, {}, "output times besides 0 and T"},
        {"time.energy_every", Type::Integer, 1.0, kBlob | kHard | kPde, Check::NonNegative, {},
         "energy series stride in steps (hard_sphere: on/off); 0 = off"},

        {"pde.time_scaling", Type::Text, std::string("micro"), kPde, Check::None, {"micro", "stefan", "hele_shaw"},
         "hele_shaw advances eps * dt"},
        {"pde.potential", Type::Text, std::string("free"), kPde, Check::None, {"free", "robin", "obstacle", "eta_wall"},
         "potential mode"},
        {"pde.robin_a", Type::Real, 0.0, kPde, Check::NonNegative, {}, "Robin coefficient a"},
        {"pde.robin_b", Type::Real, 1.0, kPde, Check::NonNegative, {}, "Robin coefficient b"},
        {"pde.diffusion", Type::Text, std::string("semi_implicit"), kPde, Check::None, {"semi_implicit", "explicit"},
         "diffusion treatment"},
        {"pde.drift", Type::Text, std::string("pressure_consistent"), kPde, Check::None,
         {"pressure_consistent", "upwind"}, "drift face density"},
        {"pde.dt_safety", Type::Real, 0.25, kPde, Check::Positive, {}, "factor on the stable step"},
        {"pde.dt_max", Type::Real, 0.0, kPde, Check::NonNegative, {}, "cap on the step; 0 = 0.1 dx"},
        {"pde.boundary_mass_tol", Type::Real, 1e-10, kPde, Check::Positive, {}, "abort threshold for whole_line end cells"},

        {"hardsphere.desired", Type::Text, std::string("self_consistent"), kHard, Check::None,
         {"self_consistent", "quadratic_well"}, "desired velocity"},
        {"hardsphere.strength", Type::Real, 1.0, kHard, Check::NonNegative, {}, "quadratic_well: v = -strength x"},
        {"hardsphere.gap_tol", Type::Real, 0.0, kHard, Check::NonNegative, {}, "contact detection slack; 0 = 1e-6 delta"},
        {"hardsphere.feas_tol", Type::Real, 0.0, kHard, Check::NonNegative, {}, "overlap tolerance; 0 = 1e-9 delta"},

        {"stefan.prepared_tol", Type::Real, 1e-9, kStefan, Check::Positive, {}, "well-prepared check, relative to theta"},

        {"energy.functional", Type::Text, std::string("G_eps"), kEnergy, Check::None, {"E_f", "J_eps", "G_eps", "G_eta_eps"},
         "functional to evaluate"},
    };
    return table;
}

const Spec* find_spec(const std::string& key) {
    for (const auto& s : specs())
        if (s.key == key) return &s;
    return nullptr;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::optional<double> parse_real(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = t.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::vector<std::string> split_list(std::string t) {
    t = trim(t);
    if (!t.empty() && t.front() == '[') {
        if (t.back() != ']') throw std::invalid_argument("unbalanced bracket");
        t = trim(t.substr(1, t.size() - 2));
    }
    std::vector<std::string> out;
    if (t.empty()) return out;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

void check_value(const Spec& spec, double v, const std::string& where, std::size_t line) {
    auto fail = [&](const std::string& what) {
        throw ParseError(where + "'" + spec.key + "' " + what + ", got " + format_number(v), line);
    };
    if (std::isnan(v)) return;
    switch (spec.check) {
        case Check::None: break;
        case Check::Positive: if (!(v > 0.0)) fail("must be positive"); break;
        case Check::NonNegative: if (!(v >= 0.0)) fail("must be nonnegative"); break;
        case Check::AtLeastOne: if (!(v >= 1.0)) fail("must be at least 1"); break;
        case Check::AtLeastThree: if (!(v >= 3.0)) fail("must be at least 3"); break;
    }
    if (spec.type == Type::Integer && v != std::floor(v)) fail("must be an integer");
}

ParamValue parse_value(const Spec& spec, const std::string& raw, std::size_t line, const std::string& line_text) {
    const std::string ctx = ": " + line_text;
    switch (spec.type) {
        case Type::Real:
        case Type::Integer: {
            const auto v = parse_real(raw);
            if (!v) throw ParseError("key '" + spec.key + "' expects a number" + ctx, line);
            check_value(spec, *v, "key ", line);
            return *v;
        }
        case Type::List: {
            std::vector<double> out;
            std::vector<std::string> items;
            try {
                items = split_list(raw);
            } catch (const std::invalid_argument&) {
                throw ParseError("key '" + spec.key + "' has an unbalanced list" + ctx, line);
            }
            for (const auto& it : items) {
                const auto v = parse_real(it);
                if (!v) throw ParseError("key '" + spec.key + "' expects a list of numbers" + ctx, line);
                check_value(spec, *v, "entry of ", line);
                out.push_back(*v);
            }
            return out;
        }
        case Type::Text: {
            const std::string t = trim(raw);
            if (!spec.choices.empty() && std::find(spec.choices.begin(), spec.choices.end(), t) == spec.choices.end()) {
                std::string opts;
                for (const auto& c : spec.choices) opts += (opts.empty() ? "" : ", ") + c;
                throw ParseError("key '" + spec.key + "' must be one of {" + opts + "}" + ctx, line);
            }
            return t;
        }
    }
    return raw;
}

struct RawEntry {
    std::string value;
    std::size_t line;
    std::string text;
};

Tier parse_tier(const std::string& t) {
    if (t == "blob") return Tier::Blob;
    if (t == "hard_sphere") return Tier::HardSphere;
    if (t == "pde") return Tier::Pde;
    if (t == "stefan") return Tier::Stefan;
    if (t == "energy") return Tier::EnergyStudy;
    throw ParseError("unknown tier '" + t + "'", 0);
}

const std::set<std::string> kSections = {"scenario", "model", "initial", "grid", "particles", "blob",
                                          "time", "pde", "hardsphere", "stefan", "energy", "sweep", "study"};

// Builds initial data and checks cross-key constraints on a resolved scenario.
void resolve(Scenario& s) {
    auto& p = s.params;
    const auto law = s.params.count("model.law") ? s.text("model.law") : std::string("hard_sphere");
    const bool particles = s.tier == Tier::Blob || s.tier == Tier::HardSphere;

    const double value = std::get<double>(p.at("initial.value"));
    if (std::isnan(value)) {
        double theta = kUnset;
        if (law == "hard_sphere") theta = 1.0;
        else if (law == "power" && s.real("model.m") > 2.0) theta = theta_star(s.real("model.m"), s.real("model.sigma"));
        if (s.text("initial.kind") == "plateau" ||
            (s.text("initial.kind") == "sampled" && p.count("initial.density") && s.text("initial.density") == "plateau")) {
            if (std::isnan(theta))
                throw ParseError("key 'initial.value' is required: the law has no well density theta", 0);
        }
        p["initial.value"] = std::isnan(theta) ? 1.0 : theta;
        s.derived_keys.push_back("initial.value");
    }
    if (particles && std::isnan(std::get<double>(p.at("initial.seed")))) {
        p["initial.seed"] = s.real("scenario.seed");
        s.derived_keys.push_back("initial.seed");
    }

    auto bump_at = [&](std::size_t k) {
        const auto& c = s.list("initial.centers");
        const auto& w = s.list("initial.widths");
        const auto& h = s.list("initial.heights");
        if (c.size() != 2 || w.size() != 2 || h.size() != 2)
            throw ParseError("keys 'initial.centers', 'initial.widths', 'initial.heights' need two entries each", 0);
        return Bump{c[k], w[k], h[k]};
    };
    auto shape = [&](const std::string& name) -> DensityShape {
        if (name == "bump") return Bump{s.real("initial.center"), s.real("initial.width"), s.real("initial.height")};
        if (name == "plateau") {
            if (!(s.real("initial.left") < s.real("initial.right")))
                throw ParseError("key 'initial.right' must exceed 'initial.left'", 0);
            return Plateau{s.real("initial.value"), s.real("initial.left"), s.real("initial.right")};
        }
        return TwoBumps{bump_at(0), bump_at(1)};
    };
    const auto& kind = s.text("initial.kind");
    if (kind == "empirical") {
        if (s.text("initial.file").empty()) throw ParseError("key 'initial.file' is required for empirical data", 0);
        s.initial = Empirical{s.base_dir / s.text("initial.file")};
    } else if (kind == "sampled") {
        if (!particles) throw ParseError("initial.kind 'sampled' needs a particle tier", 0);
        s.initial = Sampled{shape(s.text("initial.density")), s.count("particles.n"),
                            static_cast<std::uint64_t>(s.real("initial.seed"))};
    } else {
        std::visit([&](const auto& sh) { s.initial = sh; }, shape(kind));
    }

    if (s.tier == Tier::Stefan && law == "hard_sphere")
        throw ParseError("tier stefan needs a double well with a smooth well: model.law = hard_sphere is not supported", 0);
    if (s.tier == Tier::Stefan && law == "power" && !(s.real("model.m") > 2.0))
        throw ParseError("tier stefan with model.law = power needs model.m > 2", 0);
    if (p.count("grid.left") && !(s.real("grid.left") < s.real("grid.right")))
        throw ParseError("key 'grid.right' must exceed 'grid.left'", 0);
    if (p.count("time.samples")) {
        const auto& ts = s.list("time.samples");
        for (std::size_t k = 0; k < ts.size(); ++k) {
            if (ts[k] > s.real("time.T")) throw ParseError("key 'time.samples' has entries beyond time.T", 0);
            if (k > 0 && !(ts[k] > ts[k - 1])) throw ParseError("key 'time.samples' must be increasing", 0);
        }
    }
}

}  // namespace

ParseError::ParseError(const std::string& message, std::size_t line_number)
    : ConfigError(line_number > 0 ? "line " + std::to_string(line_number) + ": " + message : message),
      line(line_number) {}

std::string tier_name(Tier tier) {
    switch (tier) {
        case Tier::Blob: return "blob";
        case Tier::HardSphere: return "hard_sphere";
        case Tier::Pde: return "pde";
        case Tier::Stefan: return "stefan";
        case Tier::EnergyStudy: return "energy";
    }
    return "?";
}

std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double Bump::operator()(double x) const {
    const double r = std::abs(x - center);
    if (r >= width) return 0.0;
    const double c = std::cos(0.5 * std::numbers::pi * r / width);
    return height * c * c;
}

double Plateau::operator()(double x) const { return (x >= left && x <= right) ? value : 0.0; }

double shape_value(const DensityShape& shape, double x) {
    return std::visit([x](const auto& s) { return s(x); }, shape);
}

std::pair<double, double> shape_support(const DensityShape& shape) {
    struct V {
        std::pair<double, double> operator()(const Bump& b) const { return {b.center - b.width, b.center + b.width}; }
        std::pair<double, double> operator()(const Plateau& p) const { return {p.left, p.right}; }
        std::pair<double, double> operator()(const TwoBumps& t) const {
            return {std::min((*this)(t.first).first, (*this)(t.second).first),
                    std::max((*this)(t.first).second, (*this)(t.second).second)};
        }
    };
    return std::visit(V{}, shape);
}

double Scenario::real(const std::string& key) const {
    const auto it = params.find(key);
    if (it == params.end() || !std::holds_alternative<double>(it->second))
        throw ConfigError("scenario '" + id + "' has no numeric key '" + key + "'");
    return std::get<double>(it->second);
}

std::size_t Scenario::count(const std::string& key) const { return static_cast<std::size_t>(real(key)); }

const std::string& Scenario::text(const std::string& key) const {
    const auto it = params.find(key);
    if (it == params.end() || !std::holds_alternative<std::string>(it->second))
        throw ConfigError("scenario '" + id + "' has no text key '" + key + "'");
    return std::get<std::string>(it->second);
}

const std::vector<double>& Scenario::list(const std::string& key) const {
    const auto it = params.find(key);
    if (it == params.end() || !std::holds_alternative<std::vector<double>>(it->second))
        throw ConfigError("scenario '" + id + "' has no list key '" + key + "'");
    return std::get<std::vector<double>>(it->second);
}

bool Scenario::wants(const std::string& artifact) const {
    return artifact == "summary" || std::find(outputs.begin(), outputs.end(), artifact) != outputs.end();
}

const std::vector<std::string>& tier_artifacts(Tier tier) {
    static const std::vector<std::string> blob = {"trajectory", "diagnostics", "dt_history", "summary"};
    static const std::vector<std::string> hard = {"trajectory", "diagnostics", "contacts", "summary"};
    static const std::vector<std::string> pde = {"snapshots", "energy", "dt_history", "summary"};
    static const std::vector<std::string> stefan = {"snapshots", "interfaces", "summary"};
    static const std::vector<std::string> energy = {"energy", "summary"};
    switch (tier) {
        case Tier::Blob: return blob;
        case Tier::HardSphere: return hard;
        case Tier::Pde: return pde;
        case Tier::Stefan: return stefan;
        case Tier::EnergyStudy: return energy;
    }
    return energy;
}

Scenario parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    std::map<std::string, RawEntry> raw;
    std::string section;
    std::istringstream in(text);
    std::string line_text;
    std::size_t line = 0;
    while (std::getline(in, line_text)) {
        ++line;
        std::string body = line_text;
        if (const auto hash = body.find('#'); hash != std::string::npos) body.erase(hash);
        body = trim(body);
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') throw ParseError("malformed section header: " + trim(line_text), line);
            section = trim(body.substr(1, body.size() - 2));
            if (!kSections.count(section)) throw ParseError("unknown section [" + section + "]: " + trim(line_text), line);
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value': " + trim(line_text), line);
        if (section.empty()) throw ParseError("key outside of any section: " + trim(line_text), line);
        const std::string key = trim(body.substr(0, eq));
        const std::string full = section + "." + key;
        const bool known = find_spec(full) || full == "sweep.key" || full == "sweep.values" ||
                           full == "study.reference" || full == "study.oracle" || full == "study.metric" ||
                           full == "study.time";
        if (key.empty() || !known)
            throw ParseError("unknown key '" + key + "' in section [" + section + "]: " + trim(line_text), line);
        if (raw.count(full)) throw ParseError("duplicate key '" + full + "': " + trim(line_text), line);
        raw[full] = RawEntry{body.substr(eq + 1), line, trim(line_text)};
    }

    Scenario s;
    s.base_dir = base_dir;
    auto require = [&](const std::string& key) -> const RawEntry& {
        const auto it = raw.find(key);
        if (it == raw.end()) throw ParseError("missing required key '" + key + "'", 0);
        return it->second;
    };
    const auto& tier_entry = require("scenario.tier");
    const auto tier_val = parse_value(*find_spec("scenario.tier"), tier_entry.value, tier_entry.line, tier_entry.text);
    s.tier = parse_tier(std::get<std::string>(tier_val));
    const unsigned bit = tier_bit(s.tier);

    for (const auto& spec : specs()) {
        const auto it = raw.find(spec.key);
        if (!(spec.tiers & bit)) {
            if (it != raw.end())
                throw ParseError("key '" + spec.key + "' does not apply to tier " + tier_name(s.tier) + ": " + it->second.text,
                                 it->second.line);
            continue;
        }
        if (it == raw.end()) {
            if (spec.required) throw ParseError("missing required key '" + spec.key + "'", 0);
            s.params[spec.key] = spec.def;
        } else {
            s.params[spec.key] = parse_value(spec, it->second.value, it->second.line, it->second.text);
        }
    }
    s.id = s.text("scenario.id");
    if (s.id.empty() || s.id.find_first_of("/\\ ") != std::string::npos)
        throw ParseError("key 'scenario.id' must be a nonempty name without spaces or slashes", require("scenario.id").line);

    const auto& allowed = tier_artifacts(s.tier);
    for (const auto& name : split_list(s.text("scenario.outputs"))) {
        if (std::find(allowed.begin(), allowed.end(), name) == allowed.end())
            throw ParseError("unknown artifact '" + name + "' for tier " + tier_name(s.tier) + ": " +
                                 require("scenario.outputs").text,
                             require("scenario.outputs").line);
        s.outputs.push_back(name);
    }
    if (s.outputs.empty()) s.outputs = allowed;

    if (raw.count("sweep.key") || raw.count("sweep.values")) {
        const auto& k = require("sweep.key");
        const auto& v = require("sweep.values");
        Sweep sw;
        sw.key = trim(k.value);
        const Spec* target = find_spec(sw.key);
        if (!target || !(target->tiers & bit) || sw.key.rfind("scenario.", 0) == 0)
            throw ParseError("sweep key '" + sw.key + "' is not a parameter of tier " + tier_name(s.tier) + ": " + k.text, k.line);
        if (target->type != Type::Real && target->type != Type::Integer)
            throw ParseError("sweep key '" + sw.key + "' is not numeric: " + k.text, k.line);
        Spec list_spec = *target;
        list_spec.type = Type::List;
        sw.values = std::get<std::vector<double>>(parse_value(list_spec, v.value, v.line, v.text));
        if (sw.values.empty()) throw ParseError("sweep.values is empty: " + v.text, v.line);
        for (double x : sw.values) check_value(*target, x, "sweep value of ", v.line);
        bool up = true, down = true;
        for (std::size_t i = 1; i < sw.values.size(); ++i) {
            up = up && sw.values[i] > sw.values[i - 1];
            down = down && sw.values[i] < sw.values[i - 1];
        }
        if (!up && !down) throw ParseError("sweep.values must be sorted without repeats: " + v.text, v.line);
        s.sweep = sw;
    }
    if (raw.count("study.reference") || raw.count("study.oracle") || raw.count("study.metric") || raw.count("study.time")) {
        if (!s.sweep) throw ParseError("[study] needs a [sweep] section", 0);
        StudyConfig st;
        if (raw.count("study.reference")) st.reference = trim(raw["study.reference"].value);
        if (st.reference != "finest_self" && st.reference != "oracle")
            throw ParseError("study.reference must be finest_self or oracle: " + raw["study.reference"].text,
                             raw["study.reference"].line);
        if (raw.count("study.oracle")) st.oracle = base_dir / trim(raw["study.oracle"].value);
        if (st.reference == "oracle" && st.oracle.empty()) throw ParseError("missing required key 'study.oracle'", 0);
        if (raw.count("study.metric")) st.metric = trim(raw["study.metric"].value);
        if (st.metric != "auto" && st.metric != "w2" && st.metric != "l1")
            throw ParseError("study.metric must be auto, w2 or l1: " + raw["study.metric"].text, raw["study.metric"].line);
        if (raw.count("study.time")) {
            const auto t = parse_real(raw["study.time"].value);
            if (!t || *t < 0.0) throw ParseError("study.time must be a nonnegative number: " + raw["study.time"].text,
                                                  raw["study.time"].line);
            st.time = *t;
        }
        if (s.sweep->values.size() < 3) throw ParseError("a convergence study needs at least 3 sweep values", 0);
        s.study = st;
    }
    resolve(s);
    return s;
}

Scenario load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), file.has_parent_path() ? file.parent_path() : std::filesystem::path("."));
}

std::vector<Scenario> expand_sweep(const Scenario& s) {
    if (!s.sweep) return {s};
    std::vector<Scenario> out;
    const auto dot = s.sweep->key.find('.');
    const std::string short_key = s.sweep->key.substr(dot + 1);
    for (double v : s.sweep->values) {
        Scenario c = s;
        c.sweep.reset();
        c.study.reset();
        c.params[s.sweep->key] = v;
        c.id = s.id + "." + short_key + format_number(v);
        c.params["scenario.id"] = c.id;
        // Defaults derived from other keys are recomputed for the child.
        for (const auto& k : s.derived_keys)
            if (k != s.sweep->key) c.params[k] = kUnset;
        c.derived_keys.clear();
        resolve(c);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<KeyInfo> config_keys() {
    std::vector<KeyInfo> out;
    for (const auto& s : specs()) {
        KeyInfo k;
        k.key = s.key;
        switch (s.type) {
            case Type::Real: k.type = "real"; break;
            case Type::Integer: k.type = "integer"; break;
            case Type::Text: k.type = "text"; break;
            case Type::List: k.type = "list"; break;
        }
        if (!s.choices.empty()) {
            k.type = "";
            for (const auto& c : s.choices) k.type += (k.type.empty() ? "" : "|") + c;
        }
        if (s.required) k.default_value = "(required)";
        else if (const double* d = std::get_if<double>(&s.def)) k.default_value = std::isnan(*d) ? "(derived)" : format_number(*d);
        else if (const auto* t = std::get_if<std::string>(&s.def)) k.default_value = *t;
        else {
            for (double x : std::get<std::vector<double>>(s.def))
                k.default_value += (k.default_value.empty() ? "" : ", ") + format_number(x);
            k.default_value = "[" + k.default_value + "]";
        }
        const std::pair<unsigned, const char*> names[] = {
            {kBlob, "blob"}, {kHard, "hard_sphere"}, {kPde, "pde"}, {kStefan, "stefan"}, {kEnergy, "energy"}};
        if (s.tiers == kAll) k.tiers = "all";
        else
            for (const auto& [b, n] : names)
                if (s.tiers & b) k.tiers += (k.tiers.empty() ? "" : ",") + std::string(n);
        k.doc = s.doc;
        out.push_back(k);
    }
    return out;
}

}  // namespace aggdiff
