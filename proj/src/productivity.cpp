#include "bimatch/productivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "bimatch/diagnostics.hpp"
#include "bimatch/error.hpp"

namespace bimatch {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

void require_connected(const MatchingNetwork& net) {
  const auto comps = connected_components(net);
  if (comps.size() != 1) {
    throw Error(ErrorCode::kNotIdentified,
                "network has " + std::to_string(comps.size()) +
                    " connected components; effects are identified only within a component "
                    "(restrict to one, e.g. --largest-component)");
  }
}

// Normal equations of the two-way effects design with one worker column
// dropped. Unknowns: workers other than the reference (index order), then firms.
class NormalSystem {
 public:
  NormalSystem(const MatchingNetwork& net, std::size_t reference) : net_(net), ref_(reference) {
    if (reference >= net.num_workers()) throw Error(ErrorCode::kInvalidArgument, "reference worker out of range");
    require_connected(net);
    wpos_.assign(net.num_workers(), kNone);
    std::size_t k = 0;
    for (std::size_t w = 0; w < net.num_workers(); ++w) {
      if (w != ref_) wpos_[w] = k++;
    }
    nw_free_ = k;
    n_ = nw_free_ + net.num_firms();

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * net.num_matches());
    for (const Match& m : net.matches()) {
      const auto f = static_cast<Eigen::Index>(fpos(m.firm));
      trip.emplace_back(f, f, 1.0);
      if (m.worker != ref_) {
        const auto w = static_cast<Eigen::Index>(wpos_[m.worker]);
        trip.emplace_back(w, w, 1.0);
        trip.emplace_back(w, f, 1.0);
        trip.emplace_back(f, w, 1.0);
      }
    }
    Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    m.setFromTriplets(trip.begin(), trip.end());
    const double density = n_ ? static_cast<double>(m.nonZeros()) / (static_cast<double>(n_) * static_cast<double>(n_)) : 1.0;
    sparse_ = density < 0.05;
    if (sparse_) {
      sparse_solver_.compute(m);
      if (sparse_solver_.info() != Eigen::Success) throw Error(ErrorCode::kNumeric, "sparse LDLT factorization failed");
    } else {
      dense_solver_.compute(Eigen::MatrixXd(m));
      if (dense_solver_.info() != Eigen::Success || !dense_solver_.isPositive()) {
        throw Error(ErrorCode::kNumeric, "normal-equation matrix is singular");
      }
    }
  }

  std::size_t size() const { return n_; }
  std::size_t wpos(std::size_t w) const { return wpos_[w]; }
  std::size_t fpos(std::size_t f) const { return nw_free_ + f; }
  bool sparse() const { return sparse_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = sparse_ ? Eigen::VectorXd(sparse_solver_.solve(rhs)) : Eigen::VectorXd(dense_solver_.solve(rhs));
    if (!x.allFinite()) throw Error(ErrorCode::kNumeric, "normal-equation solve produced non-finite values");
    return x;
  }

  // Splits a solution vector into per-worker and per-firm effects.
  void unpack(const Eigen::VectorXd& x, std::vector<double>& alpha, std::vector<double>& psi) const {
    alpha.assign(net_.num_workers(), 0.0);
    psi.assign(net_.num_firms(), 0.0);
    for (std::size_t w = 0; w < net_.num_workers(); ++w) {
      if (w != ref_) alpha[w] = x[static_cast<Eigen::Index>(wpos_[w])];
    }
    for (std::size_t f = 0; f < net_.num_firms(); ++f) psi[f] = x[static_cast<Eigen::Index>(fpos(f))];
  }

 private:
  const MatchingNetwork& net_;
  std::size_t ref_;
  std::vector<std::size_t> wpos_;
  std::size_t nw_free_ = 0;
  std::size_t n_ = 0;
  bool sparse_ = false;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> sparse_solver_;
  Eigen::LDLT<Eigen::MatrixXd> dense_solver_;
};

double objective(const MatchingNetwork& net, const std::vector<double>& yp, const std::vector<double>& a,
                 const std::vector<double>& p) {
  double s = 0.0;
  for (std::size_t e = 0; e < yp.size(); ++e) {
    const Match& m = net.match(e);
    const double r = yp[e] - a[m.worker] * p[m.firm];
    s += r * r;
  }
  return s;
}

double variance_guarded(std::span<const double> x, const char* what) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0, maxabs = 0.0;
  for (double v : x) {
    mean += v;
    maxabs = std::max(maxabs, std::fabs(v));
  }
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double var = ss / n;
  const double floor = 1e-12 * maxabs;
  if (!(var > floor * floor)) {
    throw Error(ErrorCode::kUndefinedCorrelation, std::string("sorting correlation undefined: no variation in ") + what);
  }
  return var;
}

Ranking rank_side(const MatchingNetwork& net, std::span<const double> targets, Side side, double tie_tol) {
  const bool workers = side == Side::kWorker;
  const std::size_t n = workers ? net.num_workers() : net.num_firms();
  const std::size_t n_other = workers ? net.num_firms() : net.num_workers();
  auto nbrs = [&](std::size_t v) { return workers ? net.worker_neighbors(v) : net.firm_neighbors(v); };
  auto key_rank = [&](std::size_t v) { return workers ? net.worker_rank(v) : net.firm_rank(v); };
  auto name = [&](std::size_t v) { return workers ? "worker `" + net.worker_key(v) + "`" : "firm `" + net.firm_key(v) + "`"; };

  // rel[a*n+b]: +1 if a above b, -1 below, 0 tie
  std::vector<signed char> rel(n * n, 0);
  std::vector<double> value(n_other, 0.0);
  std::vector<char> has(n_other, 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (const Incidence& inc : nbrs(a)) {
      value[inc.node] = targets[inc.match];
      has[inc.node] = 1;
    }
    for (std::size_t b = a + 1; b < n; ++b) {
      int verdict = 2;  // unset
      for (const Incidence& inc : nbrs(b)) {
        if (!has[inc.node]) continue;
        const double diff = value[inc.node] - targets[inc.match];
        const int s = std::fabs(diff) <= tie_tol ? 0 : (diff > 0 ? 1 : -1);
        if (verdict == 2) {
          verdict = s;
        } else if (verdict != s) {
          throw Error(ErrorCode::kMonotonicityViolation,
                      "comparison of " + name(a) + " and " + name(b) + " depends on the shared partner");
        }
      }
      if (verdict == 2) {
        throw Error(ErrorCode::kNotIdentified, name(a) + " and " + name(b) + " share no partner");
      }
      rel[a * n + b] = static_cast<signed char>(verdict);
      rel[b * n + a] = static_cast<signed char>(-verdict);
    }
    for (const Incidence& inc : nbrs(a)) has[inc.node] = 0;
  }

  std::vector<std::size_t> score(n, 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) score[a] += rel[a * n + b] > 0 ? 1 : 0;
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const int expect = score[a] > score[b] ? 1 : (score[a] < score[b] ? -1 : 0);
      if (expect != rel[a * n + b]) {
        throw Error(ErrorCode::kMonotonicityViolation,
                    "pairwise comparisons are not transitive (involving " + name(a) + " and " + name(b) + ")");
      }
    }
  }

  Ranking r;
  r.order.resize(n);
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    return score[a] != score[b] ? score[a] < score[b] : key_rank(a) < key_rank(b);
  });
  r.rank.assign(n, 0);
  std::size_t level = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && score[r.order[k]] != score[r.order[k - 1]]) ++level;
    r.rank[r.order[k]] = level;
  }
  return r;
}

}  // namespace

TwfeProjection twfe_project(const MatchingNetwork& net, std::span<const double> targets, std::size_t reference_worker) {
  if (targets.size() != net.num_matches()) {
    throw Error(ErrorCode::kInvalidArgument, "target vector length does not match the number of matches");
  }
  const NormalSystem sys(net, reference_worker);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.size()));
  for (std::size_t e = 0; e < targets.size(); ++e) {
    const Match& m = net.match(e);
    rhs[static_cast<Eigen::Index>(sys.fpos(m.firm))] += targets[e];
    if (m.worker != reference_worker) rhs[static_cast<Eigen::Index>(sys.wpos(m.worker))] += targets[e];
  }
  TwfeProjection out;
  out.reference_worker = reference_worker;
  out.sparse_solver = sys.sparse();
  sys.unpack(sys.solve(rhs), out.alpha, out.psi);
  double ss = 0.0;
  for (std::size_t e = 0; e < targets.size(); ++e) {
    const Match& m = net.match(e);
    const double r = targets[e] - (out.alpha[m.worker] + out.psi[m.firm]);
    ss += r * r;
  }
  out.residual_norm = std::sqrt(ss);
  return out;
}

std::vector<std::vector<double>> inverse_signless_laplacian(const MatchingNetwork& net, std::size_t reference_worker) {
  const NormalSystem sys(net, reference_worker);
  const auto n = static_cast<Eigen::Index>(sys.size());
  std::vector<std::vector<double>> inv(sys.size(), std::vector<double>(sys.size()));
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::VectorXd col = sys.solve(Eigen::VectorXd::Unit(n, k));
    for (Eigen::Index r = 0; r < n; ++r) inv[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] = col[r];
  }
  return inv;
}

BiasTerms misspecification_bias(const MatchingNetwork& net, const ResolvedProductivity& prod,
                                std::size_t reference_worker) {
  if (prod.alpha.size() != net.num_workers() || prod.psi.size() != net.num_firms()) {
    throw Error(ErrorCode::kIncompleteAssignment, "productivity vectors do not cover the network");
  }
  const NormalSystem sys(net, reference_worker);
  // C'h with h = alpha_i psi_j: n_i alpha_i mean(psi) for workers,
  // m_j psi_j mean(alpha) for firms.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.size()));
  for (std::size_t i = 0; i < net.num_workers(); ++i) {
    if (i == reference_worker) continue;
    double psi_sum = 0.0;
    for (const Incidence& inc : net.worker_neighbors(i)) psi_sum += prod.psi[inc.node];
    w[static_cast<Eigen::Index>(sys.wpos(i))] = prod.alpha[i] * psi_sum;
  }
  for (std::size_t j = 0; j < net.num_firms(); ++j) {
    double alpha_sum = 0.0;
    for (const Incidence& inc : net.firm_neighbors(j)) alpha_sum += prod.alpha[inc.node];
    w[static_cast<Eigen::Index>(sys.fpos(j))] = prod.psi[j] * alpha_sum;
  }
  const Eigen::VectorXd lambda_w = sys.solve(w);
  BiasTerms b;
  sys.unpack(lambda_w, b.alpha, b.psi);
  for (double& v : b.alpha) v *= prod.beta;
  for (double& v : b.psi) v *= prod.beta;
  return b;
}

AlsFit als_fit(const MatchingNetwork& net, double beta_hat, const AlsOptions& options) {
  if (beta_hat == 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "ALS requires a nonzero beta; with beta = 0 use the TWFE projection");
  }
  if (!std::isfinite(beta_hat)) throw Error(ErrorCode::kInvalidArgument, "beta must be finite");
  if (!(options.tol >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "tolerance must be nonnegative");
  require_connected(net);
  const std::size_t nw = net.num_workers();
  const std::size_t nf = net.num_firms();

  std::vector<double> yp(net.num_matches());
  for (std::size_t e = 0; e < yp.size(); ++e) yp[e] = 1.0 + beta_hat * net.match(e).outcome;

  std::vector<double> psi(nf, 1.0);
  if (!options.init_psi.empty()) {
    if (options.init_psi.size() != nf) throw Error(ErrorCode::kInvalidArgument, "init_psi has the wrong length");
    psi = options.init_psi;
  }
  double norm = 0.0;
  for (double v : psi) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::kInvalidArgument, "initial psi has zero norm; the unit-norm normalization is impossible");
  }
  for (double& v : psi) v /= norm;

  AlsFit fit;
  fit.beta_input = beta_hat;
  std::vector<double> alpha(nw, 0.0);
  std::vector<double> prev_alpha, prev_psi;
  for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
    prev_alpha = alpha;
    prev_psi = psi;
    for (std::size_t i = 0; i < nw; ++i) {
      double num = 0.0, den = 0.0;
      for (const Incidence& inc : net.worker_neighbors(i)) {
        num += psi[inc.node] * yp[inc.match];
        den += psi[inc.node] * psi[inc.node];
      }
      if (!(den > 0.0)) {
        throw Error(ErrorCode::kDegenerateUpdate, "worker `" + net.worker_key(i) + "` has all-zero partner values");
      }
      alpha[i] = num / den;
    }
    for (std::size_t j = 0; j < nf; ++j) {
      double num = 0.0, den = 0.0;
      for (const Incidence& inc : net.firm_neighbors(j)) {
        num += alpha[inc.node] * yp[inc.match];
        den += alpha[inc.node] * alpha[inc.node];
      }
      if (!(den > 0.0)) {
        throw Error(ErrorCode::kDegenerateUpdate, "firm `" + net.firm_key(j) + "` has all-zero partner values");
      }
      psi[j] = num / den;
    }
    double c = 0.0;
    for (double v : psi) c += v * v;
    c = std::sqrt(c);
    if (!(c > 0.0)) throw Error(ErrorCode::kDegenerateUpdate, "firm vector collapsed to zero");
    for (double& v : psi) v /= c;
    for (double& v : alpha) v *= c;

    const double obj = objective(net, yp, alpha, psi);
    if (!fit.objective_trace.empty()) {
      const double prev = fit.objective_trace.back();
      if (obj > prev) {
        // Rounding-level increase at the floor: keep the previous iterate.
        alpha = prev_alpha;
        psi = prev_psi;
        fit.converged = true;
        break;
      }
      fit.objective_trace.push_back(obj);
      fit.iterations = iter;
      if (prev - obj <= options.tol * prev) {
        fit.converged = true;
        break;
      }
    } else {
      fit.objective_trace.push_back(obj);
      fit.iterations = iter;
    }
    if (obj == 0.0) {
      fit.converged = true;
      break;
    }
  }

  double c = 1.0;
  if (options.pinned_worker) {
    const std::size_t ref = *options.pinned_worker;
    if (ref >= nw) throw Error(ErrorCode::kInvalidArgument, "pinned worker out of range");
    if (alpha[ref] == 0.0) throw Error(ErrorCode::kNumeric, "cannot pin the scale: fitted alpha' of the pinned worker is 0");
    c = (1.0 + beta_hat * options.pinned_alpha) / alpha[ref];
    fit.scale_pinned = true;
  } else {
    double sum = 0.0;
    for (double v : psi) sum += v;
    if (sum < 0.0) c = -1.0;
  }
  for (double& v : alpha) v *= c;
  for (double& v : psi) v /= c;
  fit.scale = c;
  fit.alpha_prime = alpha;
  fit.psi_prime = psi;
  fit.alpha.resize(nw);
  fit.psi.resize(nf);
  for (std::size_t i = 0; i < nw; ++i) fit.alpha[i] = (alpha[i] - 1.0) / beta_hat;
  for (std::size_t j = 0; j < nf; ++j) fit.psi[j] = (psi[j] - 1.0) / beta_hat;
  return fit;
}

SeriationResult seriation_ranks(const MatchingNetwork& net, std::span<const double> targets, double tie_tol) {
  if (targets.size() != net.num_matches()) {
    throw Error(ErrorCode::kInvalidArgument, "target vector length does not match the number of matches");
  }
  const SideDiameters d = within_side_diameters(net, DiameterMode::kCheckOnly);
  auto describe = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string("infinite"); };
  if (!d.workers || !d.firms || *d.workers > 2 || *d.firms > 2) {
    throw Error(ErrorCode::kNotIdentified, "rankings need within-side diameters of at most 2 (workers: " +
                                               describe(d.workers) + ", firms: " + describe(d.firms) + ")");
  }
  SeriationResult out;
  out.workers = rank_side(net, targets, Side::kWorker, tie_tol);
  out.firms = rank_side(net, targets, Side::kFirm, tie_tol);
  return out;
}

double sorting_correlation(const MatchingNetwork& net, std::span<const double> alpha, std::span<const double> psi) {
  if (alpha.size() != net.num_workers() || psi.size() != net.num_firms()) {
    throw Error(ErrorCode::kIncompleteAssignment, "productivity vectors do not cover the network");
  }
  if (net.num_matches() < 2) throw Error(ErrorCode::kUndefinedCorrelation, "need at least two matches");
  std::vector<double> a(net.num_matches()), p(net.num_matches());
  for (std::size_t e = 0; e < a.size(); ++e) {
    a[e] = alpha[net.match(e).worker];
    p[e] = psi[net.match(e).firm];
  }
  const double va = variance_guarded(a, "worker values");
  const double vp = variance_guarded(p, "firm values");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mp = std::accumulate(p.begin(), p.end(), 0.0) / n;
  double cov = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e) cov += (a[e] - ma) * (p[e] - mp);
  cov /= n;
  return std::clamp(cov / std::sqrt(va * vp), -1.0, 1.0);
}

SortingReport sorting_report(const MatchingNetwork& net, const ResolvedProductivity& prod,
                             std::size_t reference_worker) {
  const MatchingNetwork theta = synthesize_outcomes(net, prod);
  SortingReport r;
  r.rho_true = sorting_correlation(net, prod.alpha, prod.psi);
  r.projection = twfe_project(net, theta.outcomes(), reference_worker);
  r.rho_projected = sorting_correlation(net, r.projection.alpha, r.projection.psi);
  r.bias = misspecification_bias(net, prod, reference_worker);
  return r;
}

}  // namespace bimatch
