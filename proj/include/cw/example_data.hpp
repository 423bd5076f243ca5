#pragma once

#include <cstdint>

#include "cw/analysis_spec.hpp"
#include "cw/dataset.hpp"

namespace cw {

// True treatment effect built into the example outcome (constant across units,
// so it is the ATE, ATT and ATC alike).
inline constexpr double kExampleTrueEffect = 3.0;

// Synthetic two-group treatment-outcome dataset: 15 columns, confounded
// assignment through a logit on a subset of covariates, exactly n_per_group
// rows per group, and ada_6 a linear function of the covariates plus
// kExampleTrueEffect * treat plus noise.
Dataset generate_example_dataset(std::uint64_t seed, std::size_t n_per_group = 2000);

// The model set-up that goes with the example data (ATT of treat on ada_6).
AnalysisSpec example_analysis_spec();

}  // namespace cw
