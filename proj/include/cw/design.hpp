#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cw/analysis_spec.hpp"
#include "cw/dataset.hpp"

namespace cw {

// Complete-case numeric design consumed by every estimation step.
//
// Categorical confounders contribute k-1 dummy columns named <var>.<level>;
// the reference level contributes none. When the requested estimand is ATC
// the treatment indicator is flipped and `estimand` is ATT, so downstream
// code only ever sees ATE or ATT.
struct DesignMatrix {
  Eigen::VectorXd T;  // 1 = treatment, 0 = control (after any flip)
  Eigen::MatrixXd X;
  Eigen::VectorXd Y;
  std::vector<std::string> column_names;
  std::vector<bool> is_dummy;
  std::vector<std::string> column_sources;  // originating dataset column
  std::vector<std::size_t> row_ids;         // rows of the source Dataset

  std::string treatment_name;
  std::string outcome_name;
  Estimand requested = Estimand::ATT;
  Estimand estimand = Estimand::ATT;  // ATE or ATT
  bool flipped = false;
  std::size_t dropped_count = 0;

  std::size_t n() const noexcept { return static_cast<std::size_t>(T.size()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(X.cols()); }
  std::size_t n_treated() const;
  std::size_t n_control() const { return n() - n_treated(); }
  // Index of a design column by name; throws a name error when absent.
  std::size_t column_index(std::string_view name) const;

  // Rows kept, in order; all fields re-sliced.
  DesignMatrix select_rows(const std::vector<std::size_t>& rows) const;
  // Appends a numeric column (used for hypothetical confounders).
  DesignMatrix with_column(std::string name, const Eigen::VectorXd& values) const;
};

DesignMatrix encode_design(const Dataset& data, const AnalysisSpec& spec);

}  // namespace cw
