#include "cw/weights.hpp"

#include <algorithm>
#include <cmath>

#include "cw/error.hpp"

namespace cw {

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::LR: return "LR";
    case Algorithm::CBPS1: return "CBPS1";
    case Algorithm::CBPS2: return "CBPS2";
    case Algorithm::CBPS3: return "CBPS3";
    case Algorithm::GBM_ES: return "GBM_ES";
    case Algorithm::GBM_KS: return "GBM_KS";
    case Algorithm::EB1: return "EB1";
    case Algorithm::EB2: return "EB2";
    case Algorithm::EB3: return "EB3";
  }
  return "LR";
}

Algorithm parse_algorithm(std::string_view id) {
  for (auto a : kAllAlgorithms)
    if (id == to_string(a)) return a;
  throw Error(ErrorKind::Input, "unknown algorithm id '" + std::string(id) + "'");
}

int moment_order(Algorithm a) {
  switch (a) {
    case Algorithm::CBPS1:
    case Algorithm::EB1: return 1;
    case Algorithm::CBPS2:
    case Algorithm::EB2: return 2;
    case Algorithm::CBPS3:
    case Algorithm::EB3: return 3;
    default: return 0;
  }
}

double clip_propensity(double p) { return std::clamp(p, kPropensityFloor, 1.0 - kPropensityFloor); }

WeightSet ps_to_weights(const PropensityVector& ps, const Eigen::VectorXd& T, Estimand estimand) {
  if (ps.p.size() != T.size()) throw Error(ErrorKind::Input, "propensity and treatment lengths differ");
  if (estimand == Estimand::ATC) throw Error(ErrorKind::Input, "ATC is run as ATT on a flipped design");
  WeightSet ws;
  ws.algorithm = ps.source;
  ws.estimand = estimand;
  ws.w.resize(T.size());
  for (Eigen::Index i = 0; i < T.size(); ++i) {
    const double p = ps.p[i];
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::Input, "propensity outside (0, 1)");
    const bool treated = T[i] > 0.5;
    if (estimand == Estimand::ATE)
      ws.w[i] = treated ? 1.0 / p : 1.0 / (1.0 - p);
    else
      ws.w[i] = treated ? 1.0 : p / (1.0 - p);
  }
  return ws;
}

void check_weights(const WeightSet& ws, const Eigen::VectorXd& T) {
  if (ws.w.size() != T.size()) throw Error(ErrorKind::Input, "weight vector length differs from the design");
  double treated = 0.0, control = 0.0;
  for (Eigen::Index i = 0; i < T.size(); ++i) {
    const double w = ws.w[i];
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::Input, "weights must be finite and non-negative");
    if (T[i] > 0.5) {
      treated += w;
      if (ws.estimand == Estimand::ATT && w != 1.0) throw Error(ErrorKind::Input, "ATT weights must be 1 for treated rows");
    } else {
      control += w;
    }
  }
  if (!(treated > 0.0) || !(control > 0.0)) throw Error(ErrorKind::EmptyGroup, "a treatment group has zero total weight");
}

}  // namespace cw
