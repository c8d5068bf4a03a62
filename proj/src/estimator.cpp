#include "bimatch/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "bimatch/error.hpp"
#include "bimatch/random.hpp"

namespace bimatch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int sign_or_coin(double diff, const CounterRng& rng, std::uint64_t index) {
  if (diff > 0.0) return 1;
  if (diff < 0.0) return -1;
  return rng.coin(make_stream(StreamTag::kLabelTieBreak), index) ? 1 : -1;
}

double instrument(const std::unordered_map<std::string, double>& z, const std::string& key, const char* side) {
  auto it = z.find(key);
  if (it == z.end()) {
    throw Error(ErrorCode::kInstrumentCoverage, std::string("no instrument value for ") + side + " `" + key + "`");
  }
  return it->second;
}

double eval_poly(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) acc = acc * x + c[k];
  return acc;
}

double eval_dpoly(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (std::size_t k = c.size(); k-- > 1;) acc = acc * x + static_cast<double>(k) * c[k];
  return acc;
}

}  // namespace

const char* to_string(LabelRule rule) noexcept {
  switch (rule) {
    case LabelRule::kRank: return "rank";
    case LabelRule::kRandom: return "random";
    case LabelRule::kOutcome: return "outcome";
    case LabelRule::kOracle: return "oracle";
  }
  return "unknown";
}

LabelRule parse_label_rule(std::string_view name) {
  if (name == "rank") return LabelRule::kRank;
  if (name == "random") return LabelRule::kRandom;
  if (name == "outcome") return LabelRule::kOutcome;
  if (name == "oracle") return LabelRule::kOracle;
  throw Error(ErrorCode::kInvalidArgument, "unknown labeling rule `" + std::string(name) + "`");
}

bool BetaEstimate::statistic_defined() const noexcept { return !std::isnan(t_stat); }

double normal_critical_value(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorCode::kInvalidArgument, "gamma must lie in (0, 1)");
  const boost::math::normal_distribution<double> n01;
  return boost::math::quantile(boost::math::complement(n01, gamma / 2.0));
}

double two_sided_p_value(double t) {
  if (std::isnan(t)) return kNaN;
  if (std::isinf(t)) return 0.0;
  const boost::math::normal_distribution<double> n01;
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(n01, std::fabs(t))));
}

CycleStats cycle_stats(const MatchingNetwork& net, const FourCycle& c, LabelSigns signs) {
  if ((signs.alpha != 1 && signs.alpha != -1) || (signs.psi != 1 && signs.psi != -1)) {
    throw Error(ErrorCode::kInvalidArgument, "label signs must be +1 or -1");
  }
  const double y11 = net.outcome(c.worker_a, c.firm_a);
  const double y12 = net.outcome(c.worker_a, c.firm_b);
  const double y21 = net.outcome(c.worker_b, c.firm_a);
  const double y22 = net.outcome(c.worker_b, c.firm_b);
  // Relabeling either side negates both statistics, so evaluate them once in
  // canonical orientation and apply the sign product.
  const double sign = signs.product();
  CycleStats s;
  s.cycle = c;
  s.signs = signs;
  s.delta1 = sign * ((y11 + y22) - (y12 + y21));
  s.delta2 = sign * (y11 * y22 - y12 * y21);
  return s;
}

Labeling assign_labels(const MatchingNetwork& net, std::span<const FourCycle> cycles, LabelRule rule,
                       std::uint64_t seed, const InstrumentSet* instruments, const ResolvedProductivity* truth) {
  Labeling lab;
  lab.rule = rule;
  lab.seed = seed;
  lab.signs.resize(cycles.size());
  const CounterRng rng(seed);

  if (rule == LabelRule::kRank && instruments == nullptr) {
    throw Error(ErrorCode::kInstrumentCoverage, "rank labeling requires worker and firm instruments");
  }
  if (rule == LabelRule::kOracle) {
    if (truth == nullptr) {
      throw Error(ErrorCode::kIncompleteAssignment, "oracle labeling requires a complete productivity assignment");
    }
    if (truth->alpha.size() != net.num_workers() || truth->psi.size() != net.num_firms()) {
      throw Error(ErrorCode::kIncompleteAssignment, "productivity vectors do not cover the network");
    }
  }

  for (std::size_t l = 0; l < cycles.size(); ++l) {
    const FourCycle& c = cycles[l];
    const std::uint64_t ia = 2 * static_cast<std::uint64_t>(l);
    const std::uint64_t ip = ia + 1;
    LabelSigns& s = lab.signs[l];
    switch (rule) {
      case LabelRule::kRank: {
        const double za = instrument(instruments->worker, net.worker_key(c.worker_a), "worker");
        const double zb = instrument(instruments->worker, net.worker_key(c.worker_b), "worker");
        const double qa = instrument(instruments->firm, net.firm_key(c.firm_a), "firm");
        const double qb = instrument(instruments->firm, net.firm_key(c.firm_b), "firm");
        s.alpha = sign_or_coin(za - zb, rng, ia);
        s.psi = sign_or_coin(qa - qb, rng, ip);
        break;
      }
      case LabelRule::kRandom:
        s.alpha = rng.coin(make_stream(StreamTag::kLabelRandom), ia) ? 1 : -1;
        s.psi = rng.coin(make_stream(StreamTag::kLabelRandom), ip) ? 1 : -1;
        break;
      case LabelRule::kOutcome: {
        const double y_aa = net.match(c.edges[0]).outcome;
        const double y_ba = net.match(c.edges[1]).outcome;
        const double y_ab = net.match(c.edges[2]).outcome;
        const double y_bb = net.match(c.edges[3]).outcome;
        s.alpha = sign_or_coin((y_aa + y_ab) - (y_ba + y_bb), rng, ia);
        s.psi = sign_or_coin((y_aa + y_ba) - (y_ab + y_bb), rng, ip);
        break;
      }
      case LabelRule::kOracle:
        s.alpha = sign_or_coin(truth->alpha[c.worker_a] - truth->alpha[c.worker_b], rng, ia);
        s.psi = sign_or_coin(truth->psi[c.firm_a] - truth->psi[c.firm_b], rng, ip);
        break;
    }
  }
  return lab;
}

BetaEstimate estimate_from_deltas(std::span<const double> delta1, std::span<const double> delta2, double gamma) {
  if (delta1.size() != delta2.size()) throw Error(ErrorCode::kInvalidArgument, "delta vectors differ in length");
  const std::size_t n = delta1.size();
  if (n == 0) throw Error(ErrorCode::kNoCycles, "no edge-disjoint 4-cycles available");
  const double z = normal_critical_value(gamma);

  double sum1 = 0.0, sum2 = 0.0, sum_abs2 = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    sum1 += delta1[l];
    sum2 += delta2[l];
    sum_abs2 += std::fabs(delta2[l]);
  }
  const double L = static_cast<double>(n);
  BetaEstimate est;
  est.n_cycles = n;
  est.gamma = gamma;
  est.mean_delta1 = sum1 / L;
  est.mean_delta2 = sum2 / L;
  if (std::fabs(est.mean_delta2) < 1e-12 * (1.0 + sum_abs2 / L)) {
    throw Error(ErrorCode::kUninformativeCycles,
                "mean of Delta2 is numerically zero over " + std::to_string(n) + " cycles (degenerate denominator)");
  }
  est.beta_hat = -est.mean_delta1 / est.mean_delta2;

  const double ratio = sum1 / sum2;
  double ss_u = 0.0, ss_t = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    const double u = delta1[l] + est.beta_hat * delta2[l];
    ss_u += u * u;
    const double r = delta1[l] - ratio * delta2[l];
    ss_t += r * r;
  }
  est.sigma_u_hat = std::sqrt(ss_u / L);
  est.scale = est.sigma_u_hat / (std::sqrt(L) * std::fabs(est.mean_delta2));
  est.ci_low = est.beta_hat - z * est.scale;
  est.ci_high = est.beta_hat + z * est.scale;

  const double denom = std::sqrt(ss_t);
  if (denom > 0.0) {
    est.t_stat = sum1 / denom;
  } else if (sum1 != 0.0) {
    est.t_stat = std::copysign(std::numeric_limits<double>::infinity(), sum1);
  } else {
    est.t_stat = kNaN;
  }
  est.p_value = two_sided_p_value(est.t_stat);
  return est;
}

BetaEstimate estimate_beta(std::span<const CycleStats> stats, double gamma) {
  std::vector<double> d1(stats.size()), d2(stats.size());
  for (std::size_t l = 0; l < stats.size(); ++l) {
    d1[l] = stats[l].delta1;
    d2[l] = stats[l].delta2;
  }
  return estimate_from_deltas(d1, d2, gamma);
}

NetworkEstimate estimate_beta(const MatchingNetwork& net, LabelRule rule, std::uint64_t seed, double gamma,
                              const InstrumentSet* instruments, const ResolvedProductivity* truth) {
  const auto cycles = enumerate_disjoint_four_cycles(net);
  if (cycles.empty()) throw Error(ErrorCode::kNoCycles, "the network contains no 4-cycle; beta is not identified");
  NetworkEstimate out;
  out.labeling = assign_labels(net, cycles, rule, seed, instruments, truth);
  out.cycles.reserve(cycles.size());
  for (std::size_t l = 0; l < cycles.size(); ++l) out.cycles.push_back(cycle_stats(net, cycles[l], out.labeling.signs[l]));
  out.estimate = estimate_beta(out.cycles, gamma);
  return out;
}

ModularityTest modularity_test(const BetaEstimate& est, double gamma) {
  if (!est.statistic_defined()) {
    throw Error(ErrorCode::kDegenerateStatistic,
                "test statistic is 0/0: the Delta1 sum and every residual are zero");
  }
  ModularityTest t;
  t.t_stat = est.t_stat;
  t.p_value = est.p_value;
  t.critical_value = normal_critical_value(gamma);
  t.reject = std::fabs(est.t_stat) >= t.critical_value;
  return t;
}

double closed_form_beta(double t11, double t12, double t21, double t22) {
  const double a = t11 * t22;
  const double b = t21 * t12;
  const double den = a - b;
  if (den == 0.0 || std::fabs(den) <= 1e-13 * (std::fabs(a) + std::fabs(b))) {
    throw Error(ErrorCode::kUninformativeCycles, "cycle is uninformative: t11*t22 - t12*t21 vanishes");
  }
  return -(t11 - t21 - t12 + t22) / den;
}

IdentificationSet identification_set(std::span<const double> traversal) {
  if (traversal.size() < 4 || traversal.size() % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "a cycle needs an even number (>= 4) of outcomes");
  }
  const std::size_t K = traversal.size() / 2;
  // Elementary symmetric sums of the odd and even positions, plus sums of
  // absolute values as a rounding scale.
  std::vector<double> odd(K + 1, 0.0), even(K + 1, 0.0), odd_abs(K + 1, 0.0), even_abs(K + 1, 0.0);
  odd[0] = even[0] = odd_abs[0] = even_abs[0] = 1.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double x = traversal[2 * k];
    const double y = traversal[2 * k + 1];
    for (std::size_t r = k + 1; r >= 1; --r) {
      odd[r] += x * odd[r - 1];
      even[r] += y * even[r - 1];
      odd_abs[r] += std::fabs(x) * odd_abs[r - 1];
      even_abs[r] += std::fabs(y) * even_abs[r - 1];
    }
  }
  IdentificationSet out;
  out.cycle_length = traversal.size();
  out.poly_coeffs.resize(K);
  std::vector<bool> negligible(K);
  for (std::size_t r = 1; r <= K; ++r) {
    out.poly_coeffs[r - 1] = odd[r] - even[r];
    negligible[r - 1] = std::fabs(out.poly_coeffs[r - 1]) <= 1e-12 * (odd_abs[r] + even_abs[r]);
  }
  std::size_t top = K;
  while (top > 0 && negligible[top - 1]) --top;
  if (top == 0) throw Error(ErrorCode::kFullyUninformative, "every cycle coefficient vanishes; beta is not identified");

  std::vector<double> c(out.poly_coeffs.begin(), out.poly_coeffs.begin() + static_cast<std::ptrdiff_t>(top));
  const std::size_t degree = top - 1;
  if (degree == 0) return out;

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(degree), static_cast<Eigen::Index>(degree));
  for (std::size_t k = 1; k < degree; ++k) companion(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = 1.0;
  for (std::size_t k = 0; k < degree; ++k) {
    companion(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(degree - 1)) = -c[k] / c[degree];
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::kNumeric, "companion eigenvalue solve failed");

  std::vector<double> roots;
  for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
    const std::complex<double> z = solver.eigenvalues()[k];
    if (std::fabs(z.imag()) > 1e-8 * (1.0 + std::abs(z))) continue;
    double x = z.real();
    // A few Newton steps, kept only while they reduce |p(x)|.
    for (int it = 0; it < 3; ++it) {
      const double d = eval_dpoly(c, x);
      if (d == 0.0) break;
      const double nx = x - eval_poly(c, x) / d;
      if (!std::isfinite(nx) || std::fabs(eval_poly(c, nx)) >= std::fabs(eval_poly(c, x))) break;
      x = nx;
    }
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  for (double x : roots) {
    if (out.roots.empty() || std::fabs(x - out.roots.back()) > 1e-8) out.roots.push_back(x);
  }
  return out;
}

}  // namespace bimatch
