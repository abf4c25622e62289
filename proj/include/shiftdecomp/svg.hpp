#pragma once

#include <string>

#include "shiftdecomp/report.hpp"

namespace shiftdecomp {

enum class SvgPanel { aggregate, detailed_covariate, detailed_outcome };

// Deterministic bar chart with CI whiskers; estimates are embedded as text so
// outputs diff cleanly. Attribution bars sort by point estimate, descending.
std::string render_svg(const DecompositionReport& report, SvgPanel panel);

}  // namespace shiftdecomp
