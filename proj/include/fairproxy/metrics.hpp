#pragma once

// Accuracy and group-fairness metrics against a held-out binary sensitive
// attribute. Every rate is derived from the (s, y, yhat) cell counts.

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairproxy {

struct MetricError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void check_binary(const std::vector<int>& v, const char* what) {
  for (int x : v) {
    if (x != 0 && x != 1) throw MetricError(std::string(what) + " must be binary");
  }
}

}  // namespace detail

// counts[s][y][yhat]
using CellCounts = std::array<std::array<std::array<long long, 2>, 2>, 2>;

inline CellCounts cell_counts(const std::vector<int>& yhat, const std::vector<int>& y, const std::vector<int>& s) {
  if (yhat.size() != y.size() || y.size() != s.size()) throw MetricError("metric inputs differ in length");
  detail::check_binary(yhat, "predictions");
  detail::check_binary(y, "labels");
  detail::check_binary(s, "sensitive attribute");
  CellCounts c{};
  for (std::size_t i = 0; i < y.size(); ++i) ++c[s[i]][y[i]][yhat[i]];
  return c;
}

// min(r1/r0, r0/r1) with r_g = P(yhat = 1 | s = g); 1 when both rates are 0.
inline double p_rule_from_rates(double r0, double r1) {
  if (r0 == 0.0 && r1 == 0.0) return 1.0;
  if (r0 == 0.0 || r1 == 0.0) return 0.0;
  return std::min(r1 / r0, r0 / r1);
}

inline double p_rule(const std::vector<int>& yhat, const std::vector<int>& s) {
  if (yhat.size() != s.size()) throw MetricError("p_rule: inputs differ in length");
  detail::check_binary(yhat, "predictions");
  detail::check_binary(s, "sensitive attribute");
  std::array<long long, 2> n{}, pos{};
  for (std::size_t i = 0; i < s.size(); ++i) {
    ++n[s[i]];
    pos[s[i]] += yhat[i];
  }
  if (n[0] == 0 || n[1] == 0) throw MetricError("p_rule: a sensitive group is absent");
  return p_rule_from_rates(static_cast<double>(pos[0]) / static_cast<double>(n[0]),
                           static_cast<double>(pos[1]) / static_cast<double>(n[1]));
}

struct Mistreatment {
  double delta_fpr = 0.0;
  double delta_fnr = 0.0;
  double dm() const { return delta_fpr + delta_fnr; }
};

inline Mistreatment mistreatment_from_counts(const CellCounts& c) {
  auto rate = [&](int s, int y, int yhat, const char* what) {
    const long long n = c[s][y][0] + c[s][y][1];
    if (n == 0) throw MetricError(std::string("empty conditioning cell for ") + what);
    return static_cast<double>(c[s][y][yhat]) / static_cast<double>(n);
  };
  Mistreatment m;
  m.delta_fpr = std::abs(rate(1, 0, 1, "FPR (s=1,y=0)") - rate(0, 0, 1, "FPR (s=0,y=0)"));
  m.delta_fnr = std::abs(rate(1, 1, 0, "FNR (s=1,y=1)") - rate(0, 1, 0, "FNR (s=0,y=1)"));
  return m;
}

inline Mistreatment disparate_mistreatment(const std::vector<int>& yhat, const std::vector<int>& y,
                                           const std::vector<int>& s) {
  return mistreatment_from_counts(cell_counts(yhat, y, s));
}

struct MetricsReport {
  long long n = 0;
  double accuracy = 0.0;
  double p_rule = 0.0;
  double delta_fpr = 0.0;
  double delta_fnr = 0.0;
  double dm = 0.0;
  double positive_rate_s0 = 0.0;
  double positive_rate_s1 = 0.0;
  double tpr_s0 = 0.0;
  double tpr_s1 = 0.0;
  double fpr_s0 = 0.0;
  double fpr_s1 = 0.0;
  CellCounts counts{};
  std::optional<double> hgr_pred_z;

  static MetricsReport from_counts(const CellCounts& c) {
    MetricsReport r;
    r.counts = c;
    long long correct = 0;
    std::array<long long, 2> ns{}, pos{};
    for (int s = 0; s < 2; ++s) {
      for (int y = 0; y < 2; ++y) {
        for (int h = 0; h < 2; ++h) {
          r.n += c[s][y][h];
          ns[s] += c[s][y][h];
          pos[s] += h * c[s][y][h];
          correct += (y == h) * c[s][y][h];
        }
      }
    }
    if (r.n == 0) throw MetricError("no rows to evaluate");
    if (ns[0] == 0 || ns[1] == 0) throw MetricError("a sensitive group is absent");
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
    r.positive_rate_s0 = static_cast<double>(pos[0]) / static_cast<double>(ns[0]);
    r.positive_rate_s1 = static_cast<double>(pos[1]) / static_cast<double>(ns[1]);
    r.p_rule = p_rule_from_rates(r.positive_rate_s0, r.positive_rate_s1);
    auto rate = [&](int s, int y) {
      const long long n = c[s][y][0] + c[s][y][1];
      return n == 0 ? std::nan("") : static_cast<double>(c[s][y][1]) / static_cast<double>(n);
    };
    r.tpr_s0 = rate(0, 1);
    r.tpr_s1 = rate(1, 1);
    r.fpr_s0 = rate(0, 0);
    r.fpr_s1 = rate(1, 0);
    const Mistreatment m = mistreatment_from_counts(c);
    r.delta_fpr = m.delta_fpr;
    r.delta_fnr = m.delta_fnr;
    r.dm = r.delta_fpr + r.delta_fnr;
    return r;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["n"] = n;
    j["accuracy"] = accuracy;
    j["p_rule"] = p_rule;
    j["delta_fpr"] = delta_fpr;
    j["delta_fnr"] = delta_fnr;
    j["dm"] = dm;
    j["positive_rate_s0"] = positive_rate_s0;
    j["positive_rate_s1"] = positive_rate_s1;
    j["tpr_s0"] = tpr_s0;
    j["tpr_s1"] = tpr_s1;
    j["fpr_s0"] = fpr_s0;
    j["fpr_s1"] = fpr_s1;
    auto& cj = j["counts"];
    for (int s = 0; s < 2; ++s) {
      for (int y = 0; y < 2; ++y) {
        for (int h = 0; h < 2; ++h) {
          cj["s" + std::to_string(s) + "_y" + std::to_string(y) + "_yhat" + std::to_string(h)] = c_at(s, y, h);
        }
      }
    }
    if (hgr_pred_z) j["hgr_pred_z"] = *hgr_pred_z;
    return j;
  }

 private:
  long long c_at(int s, int y, int h) const { return counts[s][y][h]; }
};

inline MetricsReport metrics_report(const std::vector<int>& yhat, const std::vector<int>& y, const std::vector<int>& s) {
  return MetricsReport::from_counts(cell_counts(yhat, y, s));
}

inline std::vector<int> threshold(const std::vector<double>& probs, double t = 0.5) {
  std::vector<int> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(p >= t ? 1 : 0);
  return out;
}

}  // namespace fairproxy
