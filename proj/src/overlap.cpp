#include "cw/overlap.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "cw/error.hpp"
#include "cw/parallel.hpp"

namespace cw {

void validate_trim_rule(const TrimRule& rule) {
  if (rule.confounder.empty()) throw Error(ErrorKind::Input, "trim rule needs a confounder");
  if (!rule.lower_cut && !rule.upper_cut)
    throw Error(ErrorKind::Input, "trim rule on '" + rule.confounder + "' has neither a lower nor an upper cut");
  if (rule.lower_cut && rule.upper_cut && *rule.lower_cut > *rule.upper_cut)
    throw Error(ErrorKind::Input, "trim rule on '" + rule.confounder + "' has lower_cut above upper_cut");
}

double DensityCurve::at(double x) const {
  if (grid.empty() || x < grid.front() || x > grid.back()) return 0.0;
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  if (it == grid.end()) return density.back();
  const auto hi = static_cast<std::size_t>(it - grid.begin());
  const auto lo = hi - 1;
  const double t = (x - grid[lo]) / (grid[hi] - grid[lo]);
  return density[lo] + t * (density[hi] - density[lo]);
}

double DensityCurve::integral() const {
  double total = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) total += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
  return total;
}

double silverman_bandwidth(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  // Heavily tied samples can have a zero IQR; fall back to the sd.
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

DensityCurve density(std::span<const double> values, std::size_t grid_size) {
  if (values.size() < 2 || std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); }))
    throw Error(ErrorKind::Degenerate, "density needs at least two distinct values");
  if (grid_size < 2) throw Error(ErrorKind::Input, "density grid needs at least two points");

  DensityCurve curve;
  curve.bandwidth = silverman_bandwidth(values);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it - 3.0 * curve.bandwidth;
  const double hi = *hi_it + 3.0 * curve.bandwidth;
  const double step = (hi - lo) / static_cast<double>(grid_size - 1);

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * curve.bandwidth * std::sqrt(2.0 * std::numbers::pi));
  const double reach = 8.0 * curve.bandwidth;

  curve.grid.resize(grid_size);
  curve.density.resize(grid_size);
  for (std::size_t g = 0; g < grid_size; ++g) {
    const double x = g + 1 == grid_size ? hi : lo + step * static_cast<double>(g);
    curve.grid[g] = x;
    // kernel contributions beyond 8 bandwidths are below 1e-14 and skipped
    auto first = std::lower_bound(sorted.begin(), sorted.end(), x - reach);
    auto last = std::upper_bound(sorted.begin(), sorted.end(), x + reach);
    double sum = 0.0;
    for (auto it = first; it != last; ++it) {
      const double u = (x - *it) / curve.bandwidth;
      sum += std::exp(-0.5 * u * u);
    }
    curve.density[g] = sum * norm;
  }
  return curve;
}

TrimResult apply_trims(const DesignMatrix& dm, const std::vector<TrimRule>& rules) {
  std::vector<bool> remove(dm.n(), false);
  for (const auto& rule : rules) {
    validate_trim_rule(rule);
    const auto j = dm.column_index(rule.confounder);
    if (dm.is_dummy[j])
      throw Error(ErrorKind::Input, "trim rules apply to numeric confounders; '" + rule.confounder + "' is a dummy");
    for (std::size_t i = 0; i < dm.n(); ++i) {
      const double v = dm.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if ((rule.lower_cut && v < *rule.lower_cut) || (rule.upper_cut && v > *rule.upper_cut)) remove[i] = true;
    }
  }
  std::vector<std::size_t> keep;
  TrimResult result;
  for (std::size_t i = 0; i < dm.n(); ++i) {
    if (remove[i])
      result.removed_row_ids.push_back(dm.row_ids[i]);
    else
      keep.push_back(i);
  }
  std::sort(result.removed_row_ids.begin(), result.removed_row_ids.end());
  result.design = result.removed_row_ids.empty() ? dm : dm.select_rows(keep);
  if (result.design.n_treated() == 0 || result.design.n_control() == 0)
    throw Error(ErrorKind::EmptyGroup, "trimming would leave a treatment group empty");
  return result;
}

namespace {

std::vector<double> group_column(const DesignMatrix& dm, std::size_t j, bool treated) {
  std::vector<double> out;
  for (std::size_t i = 0; i < dm.n(); ++i) {
    if ((dm.T[static_cast<Eigen::Index>(i)] > 0.5) == treated)
      out.push_back(dm.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  }
  return out;
}

}  // namespace

std::vector<OverlapFlag> overlap_flags(const DesignMatrix& dm) {
  if (dm.n_treated() == 0 || dm.n_control() == 0) throw Error(ErrorKind::EmptyGroup, "overlap needs both groups");
  std::vector<OverlapFlag> flags;
  for (std::size_t j = 0; j < dm.p(); ++j) {
    auto c = group_column(dm, j, false);
    auto t = group_column(dm, j, true);
    std::sort(c.begin(), c.end());
    std::sort(t.begin(), t.end());
    OverlapFlag f;
    f.confounder = dm.column_names[j];
    f.control_low = quantile_sorted(c, 0.01);
    f.control_high = quantile_sorted(c, 0.99);
    f.treated_low = quantile_sorted(t, 0.01);
    f.treated_high = quantile_sorted(t, 0.99);
    f.flagged = f.treated_low > f.control_high || f.control_low > f.treated_high;
    flags.push_back(std::move(f));
  }
  return flags;
}

std::vector<GroupDensities> group_densities(const DesignMatrix& dm, std::size_t grid_size, std::size_t workers) {
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < dm.p(); ++j)
    if (!dm.is_dummy[j]) cols.push_back(j);
  std::vector<GroupDensities> out(cols.size());
  parallel_for(cols.size(), workers, [&](std::size_t k) {
    const auto j = cols[k];
    GroupDensities g;
    g.confounder = dm.column_names[j];
    for (int group = 0; group < 2; ++group) {
      const auto values = group_column(dm, j, group == 1);
      std::optional<DensityCurve> curve;
      std::set<double> distinct(values.begin(), values.end());
      if (distinct.size() >= 2) {
        curve = density(values, grid_size);
        curve->confounder = g.confounder;
        curve->group = group;
      }
      (group == 1 ? g.treated : g.control) = std::move(curve);
    }
    out[k] = std::move(g);
  });
  return out;
}

}  // namespace cw
