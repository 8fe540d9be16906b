#pragma once

#include "cfx/milp/instance.hpp"

#include <string>
#include <vector>

namespace cfx::milp {

struct LpExport {
    std::string text;
    /// "original -> written" for every name that had to be suffixed to stay
    /// unique after sanitizing.
    std::vector<std::string> collisions;
};

/// CPLEX LP text: Minimize (with an objective constant and a `[ ... ] / 2`
/// quadratic block when needed), Subject To, Bounds, Binary, General, End.
/// Numbers use 17 significant digits, so the output is exact and byte-stable.
LpExport export_lp(const Instance& inst);

}  // namespace cfx::milp
