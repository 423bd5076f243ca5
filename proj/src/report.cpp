#include "cw/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cw/format.hpp"

namespace cw {

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

namespace {

std::string opt2(const std::optional<double>& v) { return v ? format_fixed(*v, 2) : "NA"; }

std::string cell(std::string_view text) { return "<td>" + html_escape(text) + "</td>"; }
std::string head(std::string_view text) { return "<th>" + html_escape(text) + "</th>"; }

std::string hex_color(double r, double g, double b) {
  char buf[8];
  const auto q = [](double x) { return static_cast<int>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); };
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", q(r), q(g), q(b));
  return buf;
}

// Blue (low) through white to red (high).
std::string diverging(double t) {
  t = std::clamp(t, 0.0, 1.0);
  if (t < 0.5) {
    const double s = t / 0.5;
    return hex_color(0.23 + 0.77 * s, 0.42 + 0.58 * s, 0.78 + 0.22 * s);
  }
  const double s = (t - 0.5) / 0.5;
  return hex_color(1.0 - 0.2 * s, 1.0 - 0.72 * s, 1.0 - 0.76 * s);
}

void data_section(std::string& out, const SessionState& s) {
  const Dataset& data = *s.dataset;
  out += "<h2>Data</h2>\n<p>Source: " + html_escape(s.data_source) + ". " + std::to_string(data.n_rows()) +
         " rows, " + std::to_string(data.n_cols()) + " columns.</p>\n";
  const SummaryTable table = summarize(data);
  if (!table.numeric.empty()) {
    out += "<table class=\"num\"><tr>" + head("Variable") + head("N") + head("Mean") + head("SD") + head("Median") +
           head("Min") + head("Max") + "</tr>\n";
    for (const auto& n : table.numeric)
      out += "<tr>" + cell(n.name) + cell(std::to_string(n.n)) + cell(opt2(n.mean)) + cell(opt2(n.sd)) +
             cell(opt2(n.median)) + cell(opt2(n.min)) + cell(opt2(n.max)) + "</tr>\n";
    out += "</table>\n";
  }
  for (const auto& c : table.categorical) {
    out += "<p>" + html_escape(c.name) + ": ";
    bool first = true;
    for (const auto& [level, count] : c.counts) {
      out += (first ? "" : ", ") + html_escape(level) + " (" + std::to_string(count) + ")";
      first = false;
    }
    if (c.missing > 0) out += ", missing (" + std::to_string(c.missing) + ")";
    out += "</p>\n";
  }
}

void spec_section(std::string& out, const SessionState& s) {
  const AnalysisSpec& spec = *s.spec;
  const ModelFormulas f = describe_models(spec, *s.dataset);
  out += "<h2>Model set-up</h2>\n<ul>\n";
  out += "<li>Treatment indicator: " + html_escape(spec.treatment_var) + " (control " +
         html_escape(spec.control_label) + ", treatment " + html_escape(spec.treatment_label) + ")</li>\n";
  out += "<li>Outcome: " + html_escape(spec.outcome_var) + "</li>\n";
  out += "<li>Estimand: " + html_escape(f.estimand_text) + "</li>\n";
  if (!f.reference_levels.empty()) {
    std::string refs;
    for (const auto& r : f.reference_levels) refs += (refs.empty() ? "" : ", ") + r;
    out += "<li>Reference levels: " + html_escape(refs) + "</li>\n";
  }
  out += "</ul>\n<p>Treatment allocation model:</p>\n<pre>" + html_escape(f.treatment_model) + "</pre>\n";
  out += "<p>Outcome model:</p>\n<pre>" + html_escape(f.outcome_model) + "</pre>\n";
}

void trim_section(std::string& out, const SessionState& s) {
  const TrimLog& t = s.trims;
  out += "<h2>Overlap and trimming</h2>\n";
  out += "<p>The analysis sample reflects the removal of outliers and observations with missing values: " +
         std::to_string(t.missing_dropped) + " row(s) with missing values were removed, and " +
         std::to_string(t.rows_before - t.rows_after) + " row(s) were removed by tail trimming, leaving " +
         std::to_string(t.rows_after) + " rows.</p>\n";
  if (t.rules.empty()) {
    out += "<p>No trimming rules were applied.</p>\n";
  } else {
    out += "<table><tr>" + head("Confounder") + head("Lower cut") + head("Upper cut") + "</tr>\n";
    for (const auto& r : t.rules)
      out += "<tr>" + cell(r.confounder) + cell(r.lower_cut ? format_number(*r.lower_cut) : "none") +
             cell(r.upper_cut ? format_number(*r.upper_cut) : "none") + "</tr>\n";
    out += "</table>\n";
  }
  const DesignMatrix& dm = *s.design;
  out += "<p>Final groups: " + std::to_string(dm.n_control()) + " " + (dm.flipped ? "treatment" : "control") +
         " and " + std::to_string(dm.n_treated()) + " " + (dm.flipped ? "control" : "treatment") + " rows.</p>\n";
}

void metric_table(std::string& out, const BalanceReport& b, const char* title, bool smd) {
  out += "<h3>" + std::string(title) + "</h3>\n<table class=\"num\"><tr>" + head("Confounder");
  for (const auto& c : b.columns) out += head(c.id);
  out += "</tr>\n";
  for (std::size_t j = 0; j < b.confounders.size(); ++j) {
    out += "<tr>" + cell(b.confounders[j]);
    for (const auto& c : b.columns) out += cell(format_fixed(smd ? c.smd[j] : c.ks[j], 2));
    out += "</tr>\n";
  }
  out += "<tr class=\"sum\">" + cell("Mean");
  for (const auto& c : b.columns) out += cell(format_fixed(smd ? c.mean_smd : c.mean_ks, 2));
  out += "</tr>\n<tr class=\"sum\">" + cell("Max");
  for (const auto& c : b.columns) out += cell(format_fixed(smd ? c.max_smd : c.max_ks, 2));
  out += "</tr>\n</table>\n";
}

void balance_section(std::string& out, const SessionState& s) {
  const BalanceReport& b = *s.balance;
  out += "<h2>Balance evaluation</h2>\n";
  metric_table(out, b, "Standardized mean differences", true);
  metric_table(out, b, "Kolmogorov-Smirnov statistics", false);
  out += "<h3>Effective sample size</h3>\n<table class=\"num\"><tr>" + head("");
  for (const auto& c : b.columns) out += head(c.id);
  out += "</tr>\n<tr>" + cell("ESS");
  for (const auto& c : b.columns) out += cell(format_fixed(c.ess.total, 0) + " / " + c.ess.percent_text());
  out += "</tr>\n<tr>" + cell("Control");
  for (const auto& c : b.columns) out += cell(format_fixed(c.ess.control, 0));
  out += "</tr>\n<tr>" + cell("Treatment");
  for (const auto& c : b.columns) out += cell(format_fixed(c.ess.treated, 0));
  out += "</tr>\n</table>\n";
  out += "<p class=\"rationale\">Recommended algorithm: <b>" + html_escape(b.recommended) + "</b>. " +
         html_escape(b.rationale) + "</p>\n";

  std::vector<std::string> notes = b.warnings;
  for (const auto& ws : s.weight_sets)
    for (const auto& w : ws.diagnostics.warnings) notes.push_back(std::string(to_string(ws.algorithm)) + ": " + w);
  for (const auto& f : s.engine_failures)
    notes.push_back(std::string(to_string(f.algorithm)) + " failed: " + f.message);
  if (!notes.empty()) {
    out += "<ul class=\"warn\">\n";
    for (const auto& n : notes) out += "<li>" + html_escape(n) + "</li>\n";
    out += "</ul>\n";
  }
}

void outcome_section(std::string& out, const SessionState& s) {
  const EffectEstimate& e = *s.effect;
  out += "<h2>Outcome analysis</h2>\n<p>Doubly robust estimate using " + html_escape(e.algorithm_used) +
         " weights (" + to_string(e.estimand) + ", n = " + std::to_string(e.n_used) + "): <b>effect = " +
         format_fixed(e.effect, 3) + "</b>.</p>\n";
  out += "<table class=\"num\"><tr>" + head("Term") + head("Estimate") + head("Std. Error") + head("t value") +
         head("Pr(>|t|)") + "</tr>\n";
  for (const auto& r : e.rows)
    out += "<tr>" + cell(r.term) + cell(format_fixed(r.estimate, 3)) + cell(format_fixed(r.se, 3)) +
           cell(format_fixed(r.t, 3)) + cell(format_fixed(r.p, 3)) + "</tr>\n";
  out += "</table>\n";
  if (s.design->flipped)
    out += "<p>The analysis ran as ATT with the group labels exchanged; the treatment row is reported as treatment "
           "minus control.</p>\n";
  out += "<p>Standard errors are heteroskedasticity-robust (HC1) sandwich estimates that treat the weights as "
         "fixed.</p>\n";
}

void sensitivity_section(std::string& out, const SensitivityGrid& g) {
  out += "<h2>Sensitivity to unobserved confounding</h2>\n";
  out += "<p>Algorithm " + html_escape(g.algorithm) + ", " + std::to_string(g.draws_per_cell) +
         " draws per cell, seed " + std::to_string(g.seed) + ". Baseline effect " + format_fixed(g.baseline_effect, 3) +
         " (p = " + format_fixed(g.baseline_p, 3) + ").</p>\n";
  out += "<div class=\"plots\">\n" + sensitivity_svg(g, false) + sensitivity_svg(g, true) + "</div>\n";
  out += "<table class=\"num\"><tr>" + head("rho \\ es");
  for (double es : g.es_axis) out += head(format_fixed(es, 2));
  out += "</tr>\n";
  for (std::size_t r = g.rho_axis.size(); r-- > 0;) {
    out += "<tr>" + cell(format_fixed(g.rho_axis[r], 2));
    for (std::size_t e = 0; e < g.es_axis.size(); ++e) {
      const std::size_t i = g.index(r, e);
      out += cell(g.missing[i] ? "NA" : format_fixed(g.effect[i], 2) + " (" + format_fixed(g.pvalue[i], 3) + ")");
    }
    out += "</tr>\n";
  }
  out += "</table>\n";
  if (!g.observed_points.empty()) {
    out += "<table class=\"num\"><tr>" + head("Observed confounder") + head("es") + head("rho") + "</tr>\n";
    for (const auto& p : g.observed_points)
      out += "<tr>" + cell(p.name) + cell(format_fixed(p.es, 3)) + cell(format_fixed(p.rho, 3)) + "</tr>\n";
    out += "</table>\n";
  }
}

}  // namespace

std::string sensitivity_svg(const SensitivityGrid& g, bool pvalues) {
  const int width = 460, height = 380, left = 60, top = 30, plot_w = 360, plot_h = 300;
  const std::size_t ne = g.es_axis.size(), nr = g.rho_axis.size();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < g.effect.size(); ++i)
    if (!g.missing[i]) {
      lo = std::min(lo, g.effect[i]);
      hi = std::max(hi, g.effect[i]);
    }
  const double es_lo = ne ? g.es_axis.front() : 0, es_hi = ne ? g.es_axis.back() : 1;
  const double rho_lo = nr ? g.rho_axis.front() : 0, rho_hi = nr ? g.rho_axis.back() : 1;
  const double es_span = es_hi > es_lo ? es_hi - es_lo : 1.0;
  const double rho_span = rho_hi > rho_lo ? rho_hi - rho_lo : 1.0;
  const double cw = static_cast<double>(plot_w) / static_cast<double>(std::max<std::size_t>(ne, 1));
  const double ch = static_cast<double>(plot_h) / static_cast<double>(std::max<std::size_t>(nr, 1));
  const auto fx = [&](double es) { return left + cw / 2 + (es - es_lo) / es_span * (plot_w - cw); };
  const auto fy = [&](double rho) { return top + plot_h - ch / 2 - (rho - rho_lo) / rho_span * (plot_h - ch); };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                    std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " +
                    std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<text x=\"" + std::to_string(left) + "\" y=\"18\" font-size=\"13\">" +
         std::string(pvalues ? "p-value of the treatment effect" : "Treatment effect estimate") + "</text>\n";
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t e = 0; e < ne; ++e) {
      const std::size_t i = g.index(r, e);
      std::string fill;
      std::string label;
      if (g.missing[i]) {
        fill = "#bbbbbb";
        label = "infeasible";
      } else if (pvalues) {
        const double p = g.pvalue[i];
        fill = p < 0.01 ? "#1b7837" : (p < 0.05 ? "#7fbf7b" : "#f7f7f7");
        label = format_fixed(p, 3);
      } else {
        fill = diverging(hi > lo ? (g.effect[i] - lo) / (hi - lo) : 0.5);
        label = format_fixed(g.effect[i], 2);
      }
      const double x = left + cw * static_cast<double>(e);
      const double y = top + plot_h - ch * static_cast<double>(r + 1);
      svg += "<rect x=\"" + format_fixed(x, 1) + "\" y=\"" + format_fixed(y, 1) + "\" width=\"" + format_fixed(cw, 1) +
             "\" height=\"" + format_fixed(ch, 1) + "\" fill=\"" + fill + "\"><title>es " +
             format_fixed(g.es_axis[e], 2) + ", rho " + format_fixed(g.rho_axis[r], 2) + ": " + label +
             "</title></rect>\n";
    }
  for (const auto& p : g.observed_points) {
    if (p.es < es_lo || p.es > es_hi || p.rho < rho_lo || p.rho > rho_hi) continue;
    svg += "<circle cx=\"" + format_fixed(fx(p.es), 1) + "\" cy=\"" + format_fixed(fy(p.rho), 1) +
           "\" r=\"4\" fill=\"#2166ac\" stroke=\"#ffffff\"><title>" + html_escape(p.name) + "</title></circle>\n";
  }
  svg += "<rect x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(top) + "\" width=\"" +
         std::to_string(plot_w) + "\" height=\"" + std::to_string(plot_h) + "\" fill=\"none\" stroke=\"#333333\"/>\n";
  svg += "<text x=\"" + std::to_string(left) + "\" y=\"" + std::to_string(top + plot_h + 16) + "\">" +
         format_fixed(es_lo, 2) + "</text>\n";
  svg += "<text x=\"" + std::to_string(left + plot_w) + "\" y=\"" + std::to_string(top + plot_h + 16) +
         "\" text-anchor=\"end\">" + format_fixed(es_hi, 2) + "</text>\n";
  svg += "<text x=\"" + std::to_string(left + plot_w / 2) + "\" y=\"" + std::to_string(top + plot_h + 32) +
         "\" text-anchor=\"middle\">Association with treatment indicator (es)</text>\n";
  svg += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" + std::to_string(top + plot_h) +
         "\" text-anchor=\"end\">" + format_fixed(rho_lo, 2) + "</text>\n";
  svg += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" + std::to_string(top + 10) + "\" text-anchor=\"end\">" +
         format_fixed(rho_hi, 2) + "</text>\n";
  svg += "<text transform=\"translate(16," + std::to_string(top + plot_h / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">Absolute association with outcome (rho)</text>\n";
  svg += "</svg>\n";
  return svg;
}

std::string render_report(const SessionState& s) {
  Session::require(s, Stage::Estimated);
  std::string out =
      "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
      "<title>Treatment effect analysis report</title>\n<style>\n"
      "body{font-family:sans-serif;max-width:1100px;margin:2em auto;color:#222}\n"
      "table{border-collapse:collapse;margin:0.5em 0 1em}\n"
      "td,th{border:1px solid #ccc;padding:2px 6px}\n"
      "table.num td{text-align:right}\ntable.num td:first-child{text-align:left}\n"
      "tr.sum td{font-weight:bold}\n.warn{color:#8a4b00}\npre{background:#f5f5f5;padding:6px;white-space:pre-wrap}\n"
      "</style>\n</head>\n<body>\n<h1>Treatment effect analysis report</h1>\n";
  data_section(out, s);
  spec_section(out, s);
  trim_section(out, s);
  balance_section(out, s);
  outcome_section(out, s);
  if (s.sensitivity) sensitivity_section(out, *s.sensitivity);
  out += "</body>\n</html>\n";
  return out;
}

}  // namespace cw
