#pragma once

#include <string>
#include <string_view>

#include "cw/session.hpp"

namespace cw {

std::string html_escape(std::string_view text);

// Self-contained HTML report of a session at stage ESTIMATED or later. The
// output depends only on the session artifacts (no clock, no ids), so equal
// sessions render to identical bytes.
std::string render_report(const SessionState& state);

// Inline SVG heat map of one sensitivity surface with observed confounders
// drawn as dots.
std::string sensitivity_svg(const SensitivityGrid& grid, bool pvalues);

}  // namespace cw
