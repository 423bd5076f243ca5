#include "cw/example_data.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "cw/error.hpp"
#include "cw/linalg.hpp"
#include "cw/rng.hpp"

namespace cw {

namespace {

double round_to(double x, int digits) {
  const double scale = std::pow(10.0, digits);
  return std::round(x * scale) / scale;
}

struct Person {
  double tss, sfs8p, eps7p, ias5p, dss9, satl, sp_sm, gvs, ers21, ada0, recov;
  int mhtrt, subsgrps;
};

Person draw_person(Rng& rng) {
  Person p{};
  p.tss = rng.bernoulli(0.5) ? 0.0 : std::min(13.0, 1.0 + std::floor(rng.exponential(3.2)));
  p.sfs8p = round_to(std::min(77.5, rng.exponential(10.9)), 2);
  p.eps7p = round_to(logistic(rng.normal(-1.35, 0.95)), 2);
  p.ias5p = round_to(std::min(97.78, rng.exponential(9.3)), 2);
  p.dss9 = std::min(9.0, std::floor(rng.exponential(3.0)));
  const double u = rng.uniform();
  p.mhtrt = u < 0.75 ? 0 : (u < 0.98 ? 1 : 2);
  p.satl = rng.bernoulli(0.7) ? 0.0 : round_to(std::min(110.02, rng.exponential(17.0)), 2);
  p.sp_sm = std::min(16.0, std::floor(rng.exponential(3.2)));
  p.gvs = std::min(14.0, std::floor(rng.exponential(3.3)));
  p.ers21 = std::clamp(std::round(rng.normal(35.9, 8.6)), 0.0, 78.0);
  p.ada0 = std::clamp(std::round(rng.normal(52.0, 30.0)), 0.0, 90.0);
  p.recov = rng.bernoulli(0.24) ? 1.0 : 0.0;
  const double v = rng.uniform();
  p.subsgrps = v < 0.63 ? 1 : (v < 0.97 ? 2 : 3);
  return p;
}

// Treatment propensity on the logit scale; covariates enter roughly
// standardized so each coefficient is an effect per sd.
double assignment_logit(const Person& p) {
  return 0.30 * (p.tss - 2.1) / 3.3 + 0.25 * (p.sfs8p - 10.9) / 12.7 - 0.20 * (p.ers21 - 35.9) / 8.6 +
         0.30 * (p.ada0 - 52.0) / 30.0 + 0.20 * (p.mhtrt == 1 ? 1.0 : 0.0) - 0.25 * p.recov +
         0.15 * (p.subsgrps - 1.4) / 0.57;
}

double outcome_mean(const Person& p, double treat) {
  return 30.0 + 0.45 * p.ada0 - 0.8 * p.tss + 0.15 * p.sfs8p + 5.0 * p.eps7p - 0.05 * p.ias5p - 0.5 * p.dss9 +
         0.02 * p.satl - 0.3 * p.sp_sm - 0.5 * p.gvs + 0.2 * p.ers21 + 6.0 * p.recov - 5.0 * (p.mhtrt == 1) -
         4.0 * (p.mhtrt == 2) + 2.0 * (p.subsgrps == 2) + 1.0 * (p.subsgrps == 3) + kExampleTrueEffect * treat;
}

}  // namespace

Dataset generate_example_dataset(std::uint64_t seed, std::size_t n_per_group) {
  if (n_per_group < 50) throw Error(ErrorKind::Input, "n_per_group must be at least 50");
  Rng rng(seed);
  std::vector<Person> people;
  std::vector<double> treat;
  std::size_t n1 = 0, n0 = 0;
  while (n1 < n_per_group || n0 < n_per_group) {
    const Person p = draw_person(rng);
    const bool t = rng.bernoulli(logistic(assignment_logit(p)));
    if (t ? n1 >= n_per_group : n0 >= n_per_group) continue;
    (t ? n1 : n0) += 1;
    people.push_back(p);
    treat.push_back(t ? 1.0 : 0.0);
  }

  const std::size_t n = people.size();
  std::vector<std::vector<double>> num(13, std::vector<double>(n));
  std::vector<std::optional<std::string>> mhtrt(n), subsgrps(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Person& p = people[i];
    const double y = outcome_mean(p, treat[i]) + rng.normal(0.0, 15.0);
    const double row[13] = {treat[i], p.tss,  p.sfs8p, p.eps7p, p.ias5p, p.dss9,        p.satl,
                            p.sp_sm,  p.gvs,  p.ers21, p.ada0,  round_to(y, 2), p.recov};
    for (std::size_t c = 0; c < 13; ++c) num[c][i] = row[c];
    mhtrt[i] = std::to_string(p.mhtrt);
    subsgrps[i] = std::to_string(p.subsgrps);
  }

  std::vector<Column> cols;
  cols.push_back(Column::numeric("treat", num[0]));
  cols.push_back(Column::numeric("tss_0", num[1]));
  cols.push_back(Column::numeric("sfs8p_0", num[2]));
  cols.push_back(Column::numeric("eps7p_0", num[3]));
  cols.push_back(Column::numeric("ias5p_0", num[4]));
  cols.push_back(Column::numeric("dss9_0", num[5]));
  cols.push_back(Column::categorical("mhtrt_0_categorical", mhtrt));
  cols.push_back(Column::numeric("satl_0", num[6]));
  cols.push_back(Column::numeric("sp_sm_0", num[7]));
  cols.push_back(Column::numeric("gvs", num[8]));
  cols.push_back(Column::numeric("ers21_0", num[9]));
  cols.push_back(Column::numeric("ada_0", num[10]));
  cols.push_back(Column::numeric("ada_6", num[11]));
  cols.push_back(Column::numeric("recov_0", num[12]));
  cols.push_back(Column::categorical("subsgrps_n_categorical", subsgrps));
  return Dataset(std::move(cols));
}

AnalysisSpec example_analysis_spec() {
  AnalysisSpec spec;
  spec.treatment_var = "treat";
  spec.control_label = "0";
  spec.treatment_label = "1";
  spec.outcome_var = "ada_6";
  spec.numeric_confounders = {"tss_0", "sfs8p_0", "eps7p_0", "ias5p_0", "dss9_0", "satl_0",
                              "sp_sm_0", "gvs", "ers21_0", "ada_0", "recov_0"};
  spec.categorical_confounders = {{"mhtrt_0_categorical", "0"}, {"subsgrps_n_categorical", "1"}};
  spec.estimand = Estimand::ATT;
  return spec;
}

}  // namespace cw
