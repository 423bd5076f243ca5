#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cw/design.hpp"

namespace cw {

// Drops rows whose value is strictly below lower_cut or strictly above
// upper_cut; boundary values are kept.
struct TrimRule {
  std::string confounder;
  std::optional<double> lower_cut;
  std::optional<double> upper_cut;

  friend bool operator==(const TrimRule&, const TrimRule&) = default;
};

void validate_trim_rule(const TrimRule& rule);

struct DensityCurve {
  std::string confounder;
  int group = 0;
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;

  // Linear interpolation on the grid; 0 outside it.
  double at(double x) const;
  double integral() const;  // trapezoid rule over the grid
};

// Gaussian kernel density with the Silverman bandwidth
// 0.9 * min(sd, IQR/1.34) * n^(-1/5). Needs at least two distinct values.
DensityCurve density(std::span<const double> values, std::size_t grid_size = 512);
double silverman_bandwidth(std::span<const double> values);

struct TrimResult {
  DesignMatrix design;
  std::vector<std::size_t> removed_row_ids;  // source Dataset rows, ascending
};

TrimResult apply_trims(const DesignMatrix& dm, const std::vector<TrimRule>& rules);

struct OverlapFlag {
  std::string confounder;
  double control_low = 0, control_high = 0;  // 1% and 99% quantiles
  double treated_low = 0, treated_high = 0;
  bool flagged = false;
};

// Advisory: flags a column when the groups' [1%, 99%] quantile ranges are
// disjoint.
std::vector<OverlapFlag> overlap_flags(const DesignMatrix& dm);

struct GroupDensities {
  std::string confounder;
  std::optional<DensityCurve> control;  // nullopt when the group is constant
  std::optional<DensityCurve> treated;
};

// Densities of every non-dummy design column for both groups.
std::vector<GroupDensities> group_densities(const DesignMatrix& dm, std::size_t grid_size = 512,
                                            std::size_t workers = 1);

}  // namespace cw
