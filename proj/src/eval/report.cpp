#include "meterguard/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "meterguard/detector.hpp"
#include "meterguard/usage_csv.hpp"

namespace meterguard::eval {

using nlohmann::json;

namespace {

json opt_date(const std::optional<Date>& d) { return d ? json(d->iso()) : json(nullptr); }

json summary_of(std::span<const double> fold_roc, std::span<const double> fold_pr) {
  const MeanStd roc = mean_std(fold_roc);
  const MeanStd pr = mean_std(fold_pr);
  return {{"roc_auc", format_mean_std(roc)}, {"roc_auc_mean", roc.mean}, {"roc_auc_std", roc.std},
          {"pr_auc", format_mean_std(pr)},   {"pr_auc_mean", pr.mean},   {"pr_auc_std", pr.std},
          {"fold_roc_auc", fold_roc},        {"fold_pr_auc", fold_pr}};
}

}  // namespace

ReportBundle experiment_report(const ReportInputs& in) {
  ReportBundle b;
  json& s = b.summary;

  // (a) window sweep
  {
    std::ostringstream csv;
    csv << "window,mse_mean,mse_std,runs\n";
    json rows = json::array();
    for (const auto& r : in.window_sweep) {
      csv << r.window << ',' << format_double(r.mse_mean) << ',' << format_double(r.mse_std) << ',' << r.runs << '\n';
      rows.push_back({{"window", r.window}, {"mse_mean", r.mse_mean}, {"mse_std", r.mse_std}, {"runs", r.runs}});
    }
    b.files["window_sweep.csv"] = csv.str();
    s["window_sweep"] = rows;
    if (in.window_sweep.empty()) b.missing.push_back("window_sweep");
  }

  // (b) detection traces with bound data
  {
    std::ostringstream trace, summary;
    trace << "area_id,date,observed_E,predicted_E,UB,LB,DPE,exceeds\n";
    summary << "area_id,flagged,predicted_start,actual_start,lag\n";
    json areas = json::array();
    std::vector<long> lags;
    std::size_t flagged = 0;
    for (const auto& d : in.detections) {
      if (d.observed.size() != d.dates.size() || d.predicted.size() != d.dates.size()) {
        throw std::invalid_argument("detection trace for '" + d.area_id + "' is misaligned");
      }
      for (std::size_t i = 0; i < d.dates.size(); ++i) {
        const Bounds bd = bounds(d.predicted[i], d.threshold);
        const double e = std::abs(d.observed[i] - d.predicted[i]);
        trace << d.area_id << ',' << d.dates[i].iso() << ',' << format_double(d.observed[i]) << ','
              << format_double(d.predicted[i]) << ',' << format_double(bd.upper) << ',' << format_double(bd.lower)
              << ',' << format_double(e) << ',' << (e > d.threshold ? 1 : 0) << '\n';
      }
      summary << d.area_id << ',' << (d.flagged ? 1 : 0) << ','
              << (d.predicted_start ? d.predicted_start->iso() : "") << ','
              << (d.actual_start ? d.actual_start->iso() : "") << ',' << (d.lag ? std::to_string(*d.lag) : "")
              << '\n';
      areas.push_back({{"area_id", d.area_id},
                       {"flagged", d.flagged},
                       {"predicted_start", opt_date(d.predicted_start)},
                       {"actual_start", opt_date(d.actual_start)},
                       {"lag", d.lag ? json(*d.lag) : json(nullptr)}});
      if (d.flagged) ++flagged;
      if (d.lag) lags.push_back(*d.lag);
    }
    const LagStats ls = lag_stats(lags);
    s["detection"] = {{"areas", areas},
                      {"n_areas", in.detections.size()},
                      {"n_flagged", flagged},
                      {"lag", {{"n", ls.flagged}, {"premature", ls.premature}, {"mean", ls.mean},
                               {"median", ls.median}, {"min", ls.min}, {"max", ls.max}}}};
    b.files["detection_traces.csv"] = trace.str();
    b.files["detection_summary.csv"] = summary.str();
    if (in.detections.empty()) b.missing.push_back("detections");
  }

  // (c) per-fold ROC/PR points and the architecture table
  {
    std::ostringstream roc, pr, table;
    roc << "model,fold,threshold,fpr,tpr\n";
    pr << "model,fold,threshold,recall,precision\n";
    table << "model,roc_auc,roc_auc_mean,roc_auc_std,pr_auc,pr_auc_mean,pr_auc_std\n";
    json rows = json::array();
    for (const auto& a : in.architectures) {
      if (a.fold.size() != a.scores.size() || a.labels.size() != a.scores.size()) {
        throw std::invalid_argument("architecture result '" + a.name + "' is misaligned");
      }
      int n_folds = 0;
      for (int f : a.fold) n_folds = std::max(n_folds, f + 1);
      for (int f = 0; f < n_folds; ++f) {
        std::vector<double> sc;
        std::vector<int> lb;
        for (std::size_t i = 0; i < a.scores.size(); ++i) {
          if (a.fold[i] == f) {
            sc.push_back(a.scores[i]);
            lb.push_back(a.labels[i]);
          }
        }
        const int pos = static_cast<int>(std::count(lb.begin(), lb.end(), 1));
        if (pos > 0 && pos < static_cast<int>(lb.size())) {
          for (const auto& p : roc_curve(sc, lb)) {
            roc << a.name << ',' << f << ',' << format_double(p.threshold) << ',' << format_double(p.x) << ','
                << format_double(p.y) << '\n';
          }
        }
        if (pos > 0) {
          for (const auto& p : pr_curve(sc, lb)) {
            pr << a.name << ',' << f << ',' << format_double(p.threshold) << ',' << format_double(p.x) << ','
               << format_double(p.y) << '\n';
          }
        }
      }
      json row = summary_of(a.fold_roc_auc, a.fold_pr_auc);
      row["model"] = a.name;
      table << a.name << ',' << row["roc_auc"].get<std::string>() << ',' << format_double(row["roc_auc_mean"])
            << ',' << format_double(row["roc_auc_std"]) << ',' << row["pr_auc"].get<std::string>() << ','
            << format_double(row["pr_auc_mean"]) << ',' << format_double(row["pr_auc_std"]) << '\n';
      rows.push_back(row);
    }
    b.files["roc_points.csv"] = roc.str();
    b.files["pr_points.csv"] = pr.str();
    b.files["architectures.csv"] = table.str();
    s["architectures"] = rows;
    if (in.architectures.empty()) b.missing.push_back("architectures");
  }

  // (d) target-rate table
  {
    b.files["target_rate.csv"] = baselines::target_rate_csv(in.target_rates);
    json rows = json::array();
    for (const auto& r : in.target_rates) {
      rows.push_back({{"threshold", r.threshold},
                      {"model", r.model},
                      {"days_outside", r.days_outside},
                      {"days_total", r.days_total},
                      {"target_rate_pct", r.target_rate_pct}});
    }
    s["malfunction_horizon_target_rate"] = rows;
    if (in.target_rates.empty()) b.missing.push_back("target_rates");
  }

  // (e) proportion sweep
  {
    std::ostringstream csv;
    csv << "accurate_proportion,roc_auc_mean,roc_auc_std,pr_auc_mean,pr_auc_std\n";
    json rows = json::array();
    for (const auto& p : in.proportion_sweep) {
      json row = summary_of(p.fold_roc_auc, p.fold_pr_auc);
      row["accurate_proportion"] = p.accurate_proportion;
      csv << format_double(p.accurate_proportion) << ',' << format_double(row["roc_auc_mean"]) << ','
          << format_double(row["roc_auc_std"]) << ',' << format_double(row["pr_auc_mean"]) << ','
          << format_double(row["pr_auc_std"]) << '\n';
      rows.push_back(row);
    }
    b.files["proportion_sweep.csv"] = csv.str();
    s["proportion_sweep"] = rows;
    if (in.proportion_sweep.empty()) b.missing.push_back("proportion_sweep");
  }

  s["missing"] = b.missing;
  b.files["report.json"] = s.dump(2) + "\n";
  return b;
}

void write_report(const ReportBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, contents] : bundle.files) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
    out << contents;
  }
}

}  // namespace meterguard::eval
