#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fibm {

/// Fairness parameters: exposure shares n_c and weights r_c = n_c^(1-alpha).
struct FairnessConfig {
  double alpha = 0.5;
  std::vector<double> targets;
  std::vector<double> weights;

  /// Builds n_c = sigma_c / sum sigma from the per-community negative spread.
  static FairnessConfig from_exposure(std::span<const double> exposure, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie strictly inside (0,1)");
    double total = 0.0;
    for (double e : exposure) {
      if (!(e >= 0.0)) throw std::invalid_argument("negative exposure");
      total += e;
    }
    if (!(total > 0.0)) throw std::invalid_argument("zero total exposure");
    FairnessConfig config;
    config.alpha = alpha;
    config.targets.reserve(exposure.size());
    for (double e : exposure) config.targets.push_back(e / total);
    config.weights.reserve(exposure.size());
    for (double n : config.targets) config.weights.push_back(std::pow(n, 1.0 - alpha));
    return config;
  }

  std::size_t size() const noexcept { return targets.size(); }
};

struct FairnessValue {
  double W = 0.0;
  std::vector<double> shares;  ///< x_c, blocked share of each community
};

/// x^alpha with 0^alpha = 0.
inline double concave_power(double x, double alpha) { return x > 0.0 ? std::pow(x, alpha) : 0.0; }

/// W = sum_c r_c x_c^alpha over communities with n_c > 0, where x_c is the
/// community's share of all blocked spread. No blocking gives W = 0, x = 0.
inline FairnessValue fairness_W(std::span<const double> blocked, const FairnessConfig& config) {
  if (blocked.size() != config.size()) throw std::invalid_argument("community count differs from fairness config");
  FairnessValue out;
  out.shares.assign(blocked.size(), 0.0);
  double total = 0.0;
  for (double b : blocked) {
    if (!(b >= 0.0)) throw std::invalid_argument("blocked spread must be non-negative");
    total += b;
  }
  if (total <= 0.0) return out;
  for (std::size_t c = 0; c < blocked.size(); ++c) {
    out.shares[c] = blocked[c] / total;
    if (config.targets[c] > 0.0) out.W += config.weights[c] * concave_power(out.shares[c], config.alpha);
  }
  return out;
}

/// F = sigma^- / sigma(S_N, G), clamped to [0, 1].
inline double effectiveness_F(double blocked, double baseline) {
  if (!(baseline > 0.0)) throw std::invalid_argument("baseline negative spread must be positive");
  return std::clamp(blocked / baseline, 0.0, 1.0);
}

inline double combined_K(double W, double F, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0,1]");
  return beta * W + (1.0 - beta) * F;
}

/// Spread of per-community blocked ratios sigma^-_c / sigma_c; communities
/// without negative exposure are left out.
inline double dp_gap(std::span<const double> blocked, std::span<const double> baseline) {
  if (blocked.size() != baseline.size()) throw std::invalid_argument("community count mismatch");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t c = 0; c < blocked.size(); ++c) {
    if (!(baseline[c] > 0.0)) continue;
    const double ratio = blocked[c] / baseline[c];
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  if (hi < lo) throw std::invalid_argument("no community has positive negative exposure");
  return hi - lo;
}

/// Leading-order bound on |W_a1 - W_a2| when every |x_c/n_c - 1| < phi.
inline double alpha_sensitivity_bound(double phi, double alpha1, double alpha2) {
  if (!(phi >= 0.0)) throw std::invalid_argument("phi must be non-negative");
  for (double a : {alpha1, alpha2})
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("alpha must lie strictly inside (0,1)");
  return std::abs((alpha1 - alpha2) * (alpha1 + alpha2 - 1.0)) / 2.0 * phi * phi;
}

struct DeviationBound {
  double epsilon = 0.0;  ///< submodularity deviation
  double kappa = 0.0;    ///< monotonicity deviation
  double delta_max = 0.0;
  double delta_u_max = 0.0;
};

/// Closed-form deviation bounds for W at one state:
/// kappa = alpha(1-alpha) max|x_c - n_c| max|dx_c| sum 1/n_c and epsilon = 2 kappa.
/// Every entry of `targets` must be positive; drop unexposed communities first.
inline DeviationBound analytic_deviation_bounds(std::span<const double> shares, std::span<const double> targets,
                                                std::span<const double> share_increments, double alpha) {
  if (shares.size() != targets.size() || share_increments.size() != targets.size())
    throw std::invalid_argument("community count mismatch");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie strictly inside (0,1)");
  DeviationBound out;
  double inverse_sum = 0.0;
  for (std::size_t c = 0; c < targets.size(); ++c) {
    if (!(targets[c] > 0.0)) throw std::invalid_argument("community " + std::to_string(c) + " has n_c = 0");
    inverse_sum += 1.0 / targets[c];
    out.delta_max = std::max(out.delta_max, std::abs(shares[c] - targets[c]));
    out.delta_u_max = std::max(out.delta_u_max, std::abs(share_increments[c]));
  }
  out.kappa = alpha * (1.0 - alpha) * out.delta_max * out.delta_u_max * inverse_sum;
  out.epsilon = 2.0 * out.kappa;
  return out;
}

/// Fairness notions used as comparison objectives.
enum class BaselineKind {
  maxmin,         ///< min_c sigma^-_c / sigma_c
  welfare_power,  ///< sum_c sigma_c (ratio_c)^0.1
  welfare_log,    ///< sum_c sigma_c log2(ratio_c^0.01 + 1)
};

inline constexpr double kWelfarePowerExponent = 0.1;
inline constexpr double kWelfareLogExponent = 0.01;

/// sum_c sigma_c g(sigma^-_c / sigma_c) over exposed communities.
inline double concave_welfare(std::span<const double> blocked, std::span<const double> baseline,
                              const std::function<double(double)>& transform) {
  if (blocked.size() != baseline.size()) throw std::invalid_argument("community count mismatch");
  double value = 0.0;
  for (std::size_t c = 0; c < blocked.size(); ++c) {
    if (baseline[c] > 0.0) value += baseline[c] * transform(blocked[c] / baseline[c]);
  }
  return value;
}

inline double baseline_objective(BaselineKind kind, std::span<const double> blocked, std::span<const double> baseline) {
  switch (kind) {
    case BaselineKind::maxmin: {
      if (blocked.size() != baseline.size()) throw std::invalid_argument("community count mismatch");
      double lo = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < blocked.size(); ++c)
        if (baseline[c] > 0.0) lo = std::min(lo, blocked[c] / baseline[c]);
      if (std::isinf(lo)) throw std::invalid_argument("no community has positive negative exposure");
      return lo;
    }
    case BaselineKind::welfare_power:
      return concave_welfare(blocked, baseline, [](double x) { return concave_power(x, kWelfarePowerExponent); });
    case BaselineKind::welfare_log:
      return concave_welfare(blocked, baseline,
                             [](double x) { return std::log2(concave_power(x, kWelfareLogExponent) + 1.0); });
  }
  throw std::invalid_argument("unknown baseline objective");
}

/// Objective a selector maximizes: the scalarized fairness/effectiveness
/// objective K, or one of the comparison notions.
enum class ObjectiveKind { dp, maxmin, welfare_power, welfare_log };

inline std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::dp: return "dp";
    case ObjectiveKind::maxmin: return "maxmin";
    case ObjectiveKind::welfare_power: return "welfare-power";
    case ObjectiveKind::welfare_log: return "welfare-log";
  }
  return "?";
}

inline ObjectiveKind parse_objective(std::string_view text) {
  for (ObjectiveKind k : {ObjectiveKind::dp, ObjectiveKind::maxmin, ObjectiveKind::welfare_power,
                          ObjectiveKind::welfare_log})
    if (to_string(k) == text) return k;
  throw std::invalid_argument("unknown objective '" + std::string(text) + "'");
}

inline BaselineKind baseline_kind(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::maxmin: return BaselineKind::maxmin;
    case ObjectiveKind::welfare_power: return BaselineKind::welfare_power;
    case ObjectiveKind::welfare_log: return BaselineKind::welfare_log;
    case ObjectiveKind::dp: break;
  }
  throw std::invalid_argument("dp is not a baseline objective");
}

struct ObjectiveValue {
  double W = 0.0;
  double F = 0.0;
  double K = 0.0;
  std::vector<double> shares;
  double dp_gap = 0.0;
};

inline ObjectiveValue evaluate_objectives(std::span<const double> blocked, std::span<const double> baseline,
                                          const FairnessConfig& config, double beta) {
  ObjectiveValue out;
  auto fairness = fairness_W(blocked, config);
  out.W = fairness.W;
  out.shares = std::move(fairness.shares);
  double blocked_total = 0.0, baseline_total = 0.0;
  for (double b : blocked) blocked_total += b;
  for (double b : baseline) baseline_total += b;
  out.F = effectiveness_F(blocked_total, baseline_total);
  out.K = combined_K(out.W, out.F, beta);
  out.dp_gap = dp_gap(blocked, baseline);
  return out;
}

}  // namespace fibm
