#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aggdiff/errors.hpp"

namespace aggdiff {

// Malformed config text. Carries the 1-based line (0 when the problem is
// not tied to one line, e.g. a missing key).
struct ParseError : ConfigError {
    ParseError(const std::string& message, std::size_t line_number);
    std::size_t line = 0;
};

enum class Tier { Blob, HardSphere, Pde, Stefan, EnergyStudy };
std::string tier_name(Tier tier);

using ParamValue = std::variant<double, std::string, std::vector<double>>;
using ParamMap = std::map<std::string, ParamValue>;  // keys are "section.key"

// height * cos^2(pi (x - center) / (2 width)) on |x - center| < width.
struct Bump {
    double center = 0.0;
    double width = 1.0;
    double height = 1.0;
    double operator()(double x) const;
};
// value on [left, right].
struct Plateau {
    double value = 1.0;
    double left = -1.0;
    double right = 1.0;
    double operator()(double x) const;
};
struct TwoBumps {
    Bump first, second;
    double operator()(double x) const { return first(x) + second(x); }
};
// Grid tiers: CSV with columns x_center, rho. Particle tiers: CSV with a
// column x (and optionally t, of which the last time is used).
struct Empirical {
    std::filesystem::path file;
};
using DensityShape = std::variant<Bump, Plateau, TwoBumps>;
// i.i.d. draws from a density shape (particle tiers only).
struct Sampled {
    DensityShape density;
    std::size_t n = 0;
    std::uint64_t seed = 0;
};
using InitialData = std::variant<Bump, Plateau, TwoBumps, Empirical, Sampled>;

double shape_value(const DensityShape& shape, double x);
// Interval outside of which the shape vanishes.
std::pair<double, double> shape_support(const DensityShape& shape);

struct Sweep {
    std::string key;
    std::vector<double> values;
};

// Convergence study attached to a sweep.
struct StudyConfig {
    std::string reference = "finest_self";  // or "oracle"
    std::filesystem::path oracle;           // config of the reference scenario
    std::string metric = "auto";            // auto, w2, l1
    double time = 0.0;                      // 0 = final time T
};

struct Scenario {
    std::string id;
    Tier tier = Tier::Pde;
    ParamMap params;  // fully resolved, defaults included
    InitialData initial;
    std::optional<Sweep> sweep;
    std::optional<StudyConfig> study;
    std::vector<std::string> outputs;
    std::filesystem::path base_dir = ".";  // for relative file names
    std::vector<std::string> derived_keys;  // defaults computed from other keys

    double real(const std::string& key) const;
    std::size_t count(const std::string& key) const;
    const std::string& text(const std::string& key) const;
    const std::vector<double>& list(const std::string& key) const;
    bool wants(const std::string& artifact) const;
};

// Sectioned key = value text. '#' starts a comment; lists are comma
// separated and may be wrapped in brackets. Unknown sections and keys,
// duplicates, type mismatches and out-of-range values raise ParseError
// naming the offending line or key.
Scenario parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
Scenario load_config(const std::filesystem::path& file);

// One child per sweep value with the swept key replaced and the id
// suffixed by the value. A scenario without sweep yields itself.
std::vector<Scenario> expand_sweep(const Scenario& s);

// Artifacts a tier can emit. "summary" is always written.
const std::vector<std::string>& tier_artifacts(Tier tier);

// Every accepted key with its default and the tiers it applies to, for
// the README and the "keys" CLI listing.
struct KeyInfo {
    std::string key;
    std::string type;
    std::string default_value;
    std::string tiers;
    std::string doc;
};
std::vector<KeyInfo> config_keys();

std::string format_number(double v);

}  // namespace aggdiff
