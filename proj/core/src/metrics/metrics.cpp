#include "safemon/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "safemon/conformal/conformal.hpp"
#include "safemon/error.hpp"
#include "safemon/io.hpp"

namespace safemon::metrics {

EpisodeOutcome EpisodeOutcome::from_records(long id, std::optional<std::size_t> violation_time,
                                            std::vector<monitor::StepRecord> records) {
  EpisodeOutcome o;
  o.episode_id = id;
  o.violation_time = violation_time;
  for (const auto& r : records) {
    if (r.alarm) o.alarm_times.push_back(r.t);
  }
  std::sort(o.alarm_times.begin(), o.alarm_times.end());
  o.records = std::move(records);
  return o;
}

Classification classify_episode(const EpisodeOutcome& o, std::size_t H, bool any_time) {
  Classification c;
  if (!o.violating()) {
    c.outcome = o.alarm_times.empty() ? Outcome::TN : Outcome::FP;
    return c;
  }
  const std::size_t v = *o.violation_time;
  const std::size_t window_start = any_time || v < H ? 0 : v - H;
  for (std::size_t a : o.alarm_times) {
    if (a >= window_start && a < v) {
      c.outcome = Outcome::TP;
      c.timeliness = std::min(v - a, H);
      return c;
    }
  }
  c.outcome = Outcome::FN;
  return c;
}

MetricsSummary aggregate(const std::vector<EpisodeOutcome>& outcomes, std::size_t H, double tau,
                         bool any_time) {
  if (outcomes.empty()) throw EmptyInputError("aggregate needs at least one episode");
  MetricsSummary s;
  double errors = 0.0;
  std::size_t error_steps = 0;
  std::size_t eligible = 0;
  std::size_t exceed = 0;
  double ade_sum = 0.0;
  std::size_t ade_n = 0;
  for (const auto& o : outcomes) {
    const auto c = classify_episode(o, H, any_time);
    switch (c.outcome) {
      case Outcome::TP: ++s.tp; s.timeliness_values.push_back(*c.timeliness); break;
      case Outcome::FP: ++s.fp; break;
      case Outcome::FN: ++s.fn; break;
      case Outcome::TN: ++s.tn; break;
    }
    for (const auto& r : o.records) {
      if (r.e_t) {
        errors += *r.e_t;
        ++error_steps;
      }
      if (r.threshold && r.ncs) {
        ++eligible;
        if (std::fabs(*r.ncs) > tau) ++exceed;
      }
      if (r.ade) {
        ade_sum += *r.ade;
        ++ade_n;
      }
    }
  }
  if (s.tp + s.fp > 0) s.precision = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
  if (s.tp + s.fn > 0) s.recall = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
  if (!s.timeliness_values.empty()) {
    double sum = 0.0;
    for (auto v : s.timeliness_values) sum += static_cast<double>(v);
    s.timeliness = sum / static_cast<double>(s.timeliness_values.size());
  }
  if (error_steps > 0) s.empirical_coverage = 1.0 - errors / static_cast<double>(error_steps);
  if (eligible > 0) s.p_exceed_tau = static_cast<double>(exceed) / static_cast<double>(eligible);
  if (ade_n > 0) s.ade = ade_sum / static_cast<double>(ade_n);
  return s;
}

namespace {

std::optional<MeanStd> mean_std(const std::vector<MetricsSummary>& trials,
                                std::optional<double> MetricsSummary::*field) {
  std::vector<double> xs;
  for (const auto& t : trials) {
    if (t.*field) xs.push_back(*(t.*field));
  }
  if (xs.empty()) return std::nullopt;
  MeanStd m;
  m.trials = xs.size();
  for (double x : xs) m.mean += x / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m.mean) * (x - m.mean) / static_cast<double>(xs.size());
  m.std = std::sqrt(var);
  return m;
}

}  // namespace

TrialSummary summarize_trials(std::vector<MetricsSummary> trials) {
  if (trials.empty()) throw EmptyInputError("summarize_trials needs at least one trial");
  TrialSummary s;
  s.precision = mean_std(trials, &MetricsSummary::precision);
  s.recall = mean_std(trials, &MetricsSummary::recall);
  s.timeliness = mean_std(trials, &MetricsSummary::timeliness);
  s.empirical_coverage = mean_std(trials, &MetricsSummary::empirical_coverage);
  s.p_exceed_tau = mean_std(trials, &MetricsSummary::p_exceed_tau);
  s.ade = mean_std(trials, &MetricsSummary::ade);
  s.tv_estimate = mean_std(trials, &MetricsSummary::tv_estimate);
  s.trials = std::move(trials);
  return s;
}

std::vector<EnvelopePoint> coverage_envelope_series(const std::vector<int>& errors, double delta,
                                                    double gamma, double delta_1) {
  return pooled_envelope_series({errors}, delta, gamma, delta_1);
}

std::vector<EnvelopePoint> coverage_envelope_series(const std::vector<monitor::StepRecord>& records,
                                                    double delta, double gamma, double delta_1) {
  std::vector<int> errors;
  for (const auto& r : records) {
    if (r.e_t) errors.push_back(*r.e_t);
  }
  return coverage_envelope_series(errors, delta, gamma, delta_1);
}

std::vector<EnvelopePoint> pooled_envelope_series(const std::vector<std::vector<int>>& errors,
                                                  double delta, double gamma, double delta_1) {
  std::size_t longest = 0;
  for (const auto& e : errors) longest = std::max(longest, e.size());
  std::vector<double> cumulative(errors.size(), 0.0);
  std::vector<EnvelopePoint> out;
  out.reserve(longest);
  for (std::size_t T = 1; T <= longest; ++T) {
    EnvelopePoint p;
    p.T = T;
    p.episodes = 0;
    double coverage_sum = 0.0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (errors[i].size() < T) continue;
      cumulative[i] += errors[i][T - 1];
      coverage_sum += 1.0 - cumulative[i] / static_cast<double>(T);
      ++p.episodes;
    }
    p.empirical = coverage_sum / static_cast<double>(p.episodes);
    const auto b = conformal::coverage_bounds(T, delta, gamma, delta_1);
    p.lower = 1.0 - delta - b.p1;
    p.upper = 1.0 - delta + b.p2;
    out.push_back(p);
  }
  return out;
}

SatisfactionCheck alarm_free_satisfaction(const std::vector<std::vector<monitor::StepRecord>>& runs,
                                          std::size_t t0, std::size_t H, double delta, double gamma) {
  SatisfactionCheck c;
  for (const auto& records : runs) {
    for (const auto& r : records) {
      if (r.t <= t0) continue;
      if (r.alarm) break;
      const std::size_t resolve = r.t + H;
      if (resolve >= records.size() || !records[resolve].rho_lagged) continue;
      ++c.steps;
      if (*records[resolve].rho_lagged > 0.0) ++c.satisfied;
    }
  }
  if (c.steps > 0) {
    c.frequency = static_cast<double>(c.satisfied) / static_cast<double>(c.steps);
    c.bound = 1.0 - delta - conformal::coverage_bounds(c.steps, delta, gamma, delta).p1;
  }
  return c;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json to_json(const MetricsSummary& s) {
  nlohmann::json j;
  j["tp"] = s.tp;
  j["fp"] = s.fp;
  j["fn"] = s.fn;
  j["tn"] = s.tn;
  j["precision"] = opt(s.precision);
  j["recall"] = opt(s.recall);
  j["timeliness"] = opt(s.timeliness);
  j["empirical_coverage"] = opt(s.empirical_coverage);
  j["p_exceed_tau"] = opt(s.p_exceed_tau);
  j["ade"] = opt(s.ade);
  j["tv_estimate"] = opt(s.tv_estimate);
  j["timeliness_values"] = s.timeliness_values;
  return j;
}

nlohmann::json to_json(const std::optional<MeanStd>& m) {
  if (!m) return nullptr;
  return {{"mean", m->mean}, {"std", m->std}, {"trials", m->trials}};
}

}  // namespace

std::string summary_json(const MetricsSummary& summary) { return to_json(summary).dump(2) + "\n"; }

std::string trial_summary_json(const TrialSummary& s) {
  nlohmann::json j;
  j["precision"] = to_json(s.precision);
  j["recall"] = to_json(s.recall);
  j["timeliness"] = to_json(s.timeliness);
  j["empirical_coverage"] = to_json(s.empirical_coverage);
  j["p_exceed_tau"] = to_json(s.p_exceed_tau);
  j["ade"] = to_json(s.ade);
  j["tv_estimate"] = to_json(s.tv_estimate);
  j["trials"] = nlohmann::json::array();
  for (const auto& t : s.trials) j["trials"].push_back(to_json(t));
  return j.dump(2) + "\n";
}

std::string envelope_csv(const std::vector<EnvelopePoint>& series) {
  std::string out = "T,empirical,lower,upper\n";
  for (const auto& p : series) {
    out += std::to_string(p.T) + ',' + format_double(p.empirical) + ',' + format_double(p.lower) +
           ',' + format_double(p.upper) + '\n';
  }
  return out;
}

}  // namespace safemon::metrics
