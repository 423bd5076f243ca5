#include "cw/design.hpp"

#include <algorithm>

#include "cw/error.hpp"

namespace cw {

std::size_t DesignMatrix::n_treated() const {
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < T.size(); ++i)
    if (T[i] > 0.5) ++count;
  return count;
}

std::size_t DesignMatrix::column_index(std::string_view name) const {
  const auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end()) throw Error(ErrorKind::Name, "no design column named '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - column_names.begin());
}

DesignMatrix DesignMatrix::select_rows(const std::vector<std::size_t>& rows) const {
  DesignMatrix out = *this;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.T.resize(m);
  out.Y.resize(m);
  out.X.resize(m, X.cols());
  out.row_ids.clear();
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)]);
    out.T[k] = T[r];
    out.Y[k] = Y[r];
    out.X.row(k) = X.row(r);
    out.row_ids.push_back(row_ids.at(static_cast<std::size_t>(r)));
  }
  return out;
}

DesignMatrix DesignMatrix::with_column(std::string name, const Eigen::VectorXd& values) const {
  if (values.size() != T.size()) throw Error(ErrorKind::Input, "appended column has the wrong length");
  DesignMatrix out = *this;
  out.X.conservativeResize(Eigen::NoChange, X.cols() + 1);
  out.X.col(X.cols()) = values;
  out.column_sources.push_back(name);
  out.column_names.push_back(std::move(name));
  out.is_dummy.push_back(false);
  return out;
}

DesignMatrix encode_design(const Dataset& data, const AnalysisSpec& spec) {
  require_valid(spec, data);

  const Column& treat = data.column(spec.treatment_var);
  const auto groups = treat.distinct_values();
  if (groups.size() > 2)
    throw Error(ErrorKind::MultiGroup, "treatment variable '" + spec.treatment_var + "' has " +
                                           std::to_string(groups.size()) +
                                           " distinct values; only two treatment groups are supported");
  const Column& outcome = data.column(spec.outcome_var);

  std::vector<const Column*> involved{&treat, &outcome};
  for (const auto& name : spec.numeric_confounders) involved.push_back(&data.column(name));
  for (const auto& cc : spec.categorical_confounders) involved.push_back(&data.column(cc.name));

  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    const bool complete = std::none_of(involved.begin(), involved.end(), [r](const Column* c) { return c->is_missing(r); });
    if (complete) keep.push_back(r);
  }

  DesignMatrix dm;
  dm.treatment_name = spec.treatment_var;
  dm.outcome_name = spec.outcome_var;
  dm.requested = spec.estimand;
  dm.flipped = spec.estimand == Estimand::ATC;
  dm.estimand = spec.estimand == Estimand::ATE ? Estimand::ATE : Estimand::ATT;
  dm.dropped_count = data.n_rows() - keep.size();
  dm.row_ids = keep;

  // Dummy blocks use the levels still present after complete-case filtering.
  struct DummyBlock {
    const Column* column;
    std::vector<std::string> levels;
  };
  std::vector<DummyBlock> blocks;
  for (const auto& cc : spec.categorical_confounders) {
    const Column& c = data.column(cc.name);
    std::vector<std::string> present;
    for (auto r : keep) {
      auto v = c.text(r);
      if (std::find(present.begin(), present.end(), *v) == present.end()) present.push_back(*v);
    }
    sort_natural(present);
    if (present.size() < 2)
      throw Error(ErrorKind::Degenerate, "categorical confounder '" + cc.name + "' has " +
                                             std::to_string(present.size()) + " level(s) after removing missing rows");
    if (std::find(present.begin(), present.end(), cc.reference_level) == present.end())
      throw Error(ErrorKind::Degenerate, "reference level '" + cc.reference_level + "' of '" + cc.name +
                                             "' does not occur after removing missing rows");
    std::vector<std::string> levels;
    for (auto& l : present)
      if (l != cc.reference_level) levels.push_back(l);
    blocks.push_back({&c, std::move(levels)});
  }

  std::size_t p = spec.numeric_confounders.size();
  for (const auto& b : blocks) p += b.levels.size();
  const auto n = static_cast<Eigen::Index>(keep.size());
  dm.T.resize(n);
  dm.Y.resize(n);
  dm.X.resize(n, static_cast<Eigen::Index>(p));

  const std::string& one_label = dm.flipped ? spec.control_label : spec.treatment_label;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto r = keep[static_cast<std::size_t>(k)];
    dm.T[k] = treat.text(r) == one_label ? 1.0 : 0.0;
    dm.Y[k] = outcome.number(r);
  }

  Eigen::Index col = 0;
  for (const auto& name : spec.numeric_confounders) {
    const Column& c = data.column(name);
    for (Eigen::Index k = 0; k < n; ++k) dm.X(k, col) = c.number(keep[static_cast<std::size_t>(k)]);
    dm.column_names.push_back(name);
    dm.column_sources.push_back(name);
    dm.is_dummy.push_back(false);
    ++col;
  }
  for (const auto& b : blocks) {
    for (const auto& level : b.levels) {
      for (Eigen::Index k = 0; k < n; ++k)
        dm.X(k, col) = b.column->text(keep[static_cast<std::size_t>(k)]) == level ? 1.0 : 0.0;
      dm.column_names.push_back(b.column->name() + "." + level);
      dm.column_sources.push_back(b.column->name());
      dm.is_dummy.push_back(true);
      ++col;
    }
  }

  if (dm.n_treated() == 0 || dm.n_control() == 0)
    throw Error(ErrorKind::EmptyGroup, "a treatment group is empty after removing rows with missing values");
  return dm;
}

}  // namespace cw
