#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace aggdiff {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    double seconds = 0.0;
    double budget_seconds = 0.0;
    std::string detail;  // measured values
};

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<CriterionResult()> run;
};

// The twelve acceptance criteria in order.
const std::vector<Criterion>& acceptance_criteria();

// selector: "all", a criterion number, or a criterion name. Prints one
// PASS/FAIL line per criterion to out. Throws ConfigError for an unknown
// selector.
std::vector<CriterionResult> run_acceptance(const std::string& selector, std::ostream& out);

}  // namespace aggdiff
