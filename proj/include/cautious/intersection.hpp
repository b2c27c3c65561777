#pragma once

// Support function of an intersection of consistent-parameter ellipsoids,
//   h(v) = sup { gamma^T v : gamma in Gamma_0 cap ... cap Gamma_m },
// computed by an active-set log-barrier interior-point method with a
// KKT Newton polish. Every returned upper value carries a Lagrangian dual
// certificate, so it never under-reports the supremum by more than `gap`.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "cautious/basis.hpp"
#include "cautious/bounds.hpp"
#include "cautious/regression.hpp"

namespace cautious {

struct SupportResult {
  double value = 0.0;
  Vector maximizer;
  double gap = 0.0;
  std::vector<Eigen::Index> active;
  bool certified = true;
};

struct NonemptyResult {
  bool nonempty = false;
  Vector witness;
  /// True when the witness is strictly inside every member.
  bool interior = false;
  /// Human-readable reason for an emptiness verdict.
  std::string certificate;
};

namespace detail {

/// Member i as g(x) = (x - c)^T Q (x - c) - 1 <= 0 with Q = shape / level.
struct Constraint {
  Vector center;
  Matrix q;
  Eigen::Index member = 0;

  [[nodiscard]] double value(const Vector& x) const {
    const Vector d = x - center;
    return d.dot(q * d) - 1.0;
  }
  [[nodiscard]] Vector grad(const Vector& x) const { return 2.0 * q * (x - center); }
  /// sup of x^T v over the member.
  [[nodiscard]] double support(const Vector& v, const Eigen::LLT<Matrix>& qf) const {
    return center.dot(v) + std::sqrt(std::max(0.0, v.dot(qf.solve(v))));
  }
};

}  // namespace detail

/// Gamma_0 cap ... cap Gamma_m. Copies share the lazily computed nonemptiness result.
class IntersectionSet {
 public:
  explicit IntersectionSet(std::vector<ParameterSet> members,
                           std::optional<Vector> witness_hint = std::nullopt)
      : members_(std::move(members)),
        hint_(std::move(witness_hint)),
        cache_(std::make_shared<Cache>()) {
    if (members_.empty()) throw ShapeError("intersection needs at least one member");
    for (std::size_t i = 0; i < members_.size(); ++i) {
      const auto& m = members_[i];
      if (m.dim() != members_.front().dim()) {
        throw ShapeError("intersection members have different parameter dimensions");
      }
      if (m.is_singleton()) {
        if (!singleton_) singleton_ = static_cast<Eigen::Index>(i);
        continue;
      }
      detail::Constraint c{m.lse(), m.ellipsoid().shape / m.schur(),
                           static_cast<Eigen::Index>(i)};
      factors_.emplace_back(c.q);
      constraints_.push_back(std::move(c));
    }
  }

  explicit IntersectionSet(ParameterSet member)
      : IntersectionSet(std::vector<ParameterSet>{std::move(member)}) {}

  [[nodiscard]] const std::vector<ParameterSet>& members() const { return members_; }
  [[nodiscard]] Eigen::Index dim() const { return members_.front().dim(); }
  [[nodiscard]] std::size_t size() const { return members_.size(); }

  /// New set with one more member; the current witness seeds its feasibility search.
  [[nodiscard]] IntersectionSet with_member(ParameterSet member) const {
    std::vector<ParameterSet> next = members_;
    next.push_back(std::move(member));
    std::optional<Vector> hint = hint_;
    if (cache_->result && cache_->result->nonempty) hint = cache_->result->witness;
    return IntersectionSet(std::move(next), std::move(hint));
  }

  /// Members 0 and the last `keep` others.
  [[nodiscard]] IntersectionSet pruned(std::size_t keep) const {
    if (members_.size() <= keep + 1) return *this;
    std::vector<ParameterSet> next{members_.front()};
    next.insert(next.end(), members_.end() - static_cast<std::ptrdiff_t>(keep), members_.end());
    return IntersectionSet(std::move(next), hint_);
  }

  [[nodiscard]] const NonemptyResult& nonempty() const {
    std::call_once(cache_->once, [this] { cache_->result = compute_nonempty(); });
    return *cache_->result;
  }

  [[nodiscard]] const std::vector<detail::Constraint>& constraints() const {
    return constraints_;
  }
  [[nodiscard]] const std::vector<Eigen::LLT<Matrix>>& factors() const { return factors_; }
  [[nodiscard]] std::optional<Eigen::Index> singleton_member() const { return singleton_; }

 private:
  struct Cache {
    std::once_flag once;
    std::optional<NonemptyResult> result;
  };

  [[nodiscard]] NonemptyResult compute_nonempty() const;

  std::vector<ParameterSet> members_;
  std::vector<detail::Constraint> constraints_;
  std::vector<Eigen::LLT<Matrix>> factors_;
  std::optional<Eigen::Index> singleton_;
  std::optional<Vector> hint_;
  std::shared_ptr<Cache> cache_;
};

namespace detail {

struct BarrierLimits {
  int max_outer = 50;
  int max_inner = 50;
};

/// Phase I: minimize s subject to g_i(x) <= s. Certifies emptiness by a
/// convex combination of constraints that is positive everywhere.
inline NonemptyResult phase_one(const std::vector<Constraint>& cs, Vector x,
                                const BarrierLimits& limits = {}) {
  const Eigen::Index k = x.size();
  auto max_violation = [&](const Vector& p) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& c : cs) worst = std::max(worst, c.value(p));
    return worst;
  };
  double s = max_violation(x) + 1.0;
  double t = 1.0;
  NonemptyResult result;
  auto objective = [&](const Vector& p, double sp) {
    double f = t * sp;
    for (const auto& c : cs) {
      const double u = sp - c.value(p);
      if (u <= 0.0) return std::numeric_limits<double>::infinity();
      f -= std::log(u);
    }
    return f;
  };

  for (int outer = 0; outer < limits.max_outer; ++outer) {
    for (int inner = 0; inner < limits.max_inner; ++inner) {
      Vector grad = Vector::Zero(k + 1);
      Matrix hess = Matrix::Zero(k + 1, k + 1);
      grad(k) = t;
      for (const auto& c : cs) {
        const double u = s - c.value(x);
        const Vector gi = c.grad(x);
        grad.head(k) += gi / u;
        grad(k) -= 1.0 / u;
        hess.topLeftCorner(k, k) += 2.0 * c.q / u + gi * gi.transpose() / (u * u);
        hess.block(0, k, k, 1) -= gi / (u * u);
        hess(k, k) += 1.0 / (u * u);
      }
      hess.block(k, 0, 1, k) = hess.block(0, k, k, 1).transpose();
      const Vector step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      if (!(decrement > 2e-12)) break;
      const double f0 = objective(x, s);
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        const Vector xn = x + alpha * step.head(k);
        const double sn = s + alpha * step(k);
        if (objective(xn, sn) <= f0 - 0.25 * alpha * decrement) {
          x = xn;
          s = sn;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }

    // Dual weights lambda_i = 1 / (t u_i), normalized onto the simplex.
    Vector lambda(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) lambda(static_cast<Eigen::Index>(i)) = 1.0 / (t * (s - cs[i].value(x)));
    lambda /= lambda.sum();
    Matrix h = Matrix::Zero(k, k);
    Vector w = Vector::Zero(k);
    double weighted = 0.0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const double li = lambda(static_cast<Eigen::Index>(i));
      h += li * cs[i].q;
      w += li * cs[i].grad(x);
      weighted += li * cs[i].value(x);
    }
    const double dual = weighted - 0.25 * w.dot(h.ldlt().solve(w));
    const double worst = max_violation(x);
    if (dual > 0.0) {
      result.nonempty = false;
      result.witness = x;
      result.certificate =
          "convex combination of member constraints is positive everywhere (bound " +
          std::to_string(dual) + ")";
      return result;
    }
    const bool near_optimal = worst - dual <= std::max(1e-9, 1e-2 * std::abs(dual));
    if (worst < 0.0 && near_optimal) {
      result.nonempty = true;
      result.interior = true;
      result.witness = x;
      return result;
    }
    if (worst - dual <= 1e-10) {
      // Optimal value is ~0: the members touch without a common interior.
      result.nonempty = true;
      result.interior = false;
      result.witness = x;
      return result;
    }
    t *= 10.0;
  }
  const double worst = max_violation(x);
  result.nonempty = worst <= 0.0;
  result.interior = worst < 0.0;
  result.witness = x;
  if (!result.nonempty) result.certificate = "phase I did not converge";
  return result;
}

}  // namespace detail

inline NonemptyResult IntersectionSet::compute_nonempty() const {
  if (singleton_) {
    const ParameterSet& point_set = members_[static_cast<std::size_t>(*singleton_)];
    const Vector& p = point_set.lse();
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (!members_[i].N().contains(p)) {
        return {false, p, false,
                "singleton member " + std::to_string(*singleton_) + " lies outside member " +
                    std::to_string(i)};
      }
    }
    return {true, p, false, {}};
  }
  if (constraints_.size() == 1) return {true, constraints_.front().center, true, {}};
  Vector start = constraints_.front().center;
  auto worst = [&](const Vector& p) {
    double w = -std::numeric_limits<double>::infinity();
    for (const auto& c : constraints_) w = std::max(w, c.value(p));
    return w;
  };
  if (hint_ && hint_->size() == dim() && worst(*hint_) < worst(start)) start = *hint_;
  for (const auto& c : constraints_) {
    if (worst(c.center) < worst(start)) start = c.center;
  }
  return detail::phase_one(constraints_, start);
}

inline NonemptyResult check_nonempty(const IntersectionSet& inter) { return inter.nonempty(); }

struct SupportOptions {
  /// Use the closed form for single-member sets.
  bool closed_form_single = true;
  double solver_tol = tol::kSolver;
  double feas_tol = tol::kFeasibility;
  int max_outer = 50;
  int max_inner = 50;
};

/// Warm-start state reused across nearby support queries on the same set.
struct SupportWorkspace {
  std::vector<Eigen::Index> working;  // constraint indices
  std::vector<Eigen::Index> active;
  Vector gamma;
  Vector multipliers;  // aligned with `active`
};

namespace detail {

struct SubproblemSolution {
  Vector gamma;
  std::vector<Eigen::Index> indices;
  Vector multipliers;
  double upper = std::numeric_limits<double>::infinity();
  bool certified = false;
};

/// sup_x v^T x - sum lambda_i g_i(x): an upper bound on the support of the
/// subset whenever lambda >= 0.
inline double dual_bound(const std::vector<Constraint>& cs,
                         const std::vector<Eigen::Index>& idx, const Vector& lambda,
                         const Vector& x, const Vector& v) {
  const Eigen::Index k = x.size();
  Matrix h = Matrix::Zero(k, k);
  Vector w = v;
  double value = v.dot(x);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const double lj = lambda(static_cast<Eigen::Index>(j));
    if (lj < 0.0) return std::numeric_limits<double>::infinity();
    if (lj == 0.0) continue;
    const auto& c = cs[static_cast<std::size_t>(idx[j])];
    h += lj * c.q;
    w -= lj * c.grad(x);
    value -= lj * c.value(x);
  }
  if (w.squaredNorm() == 0.0) return value;
  const Eigen::LLT<Matrix> hf(h);
  if (hf.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const Vector sol = hf.solve(w);
  if (!sol.allFinite()) return std::numeric_limits<double>::infinity();
  return value + 0.25 * w.dot(sol);
}

/// Newton on the KKT system of max v^T x s.t. g_i(x) = 0 for i in `active`.
inline std::optional<SubproblemSolution> kkt_polish(const std::vector<Constraint>& cs,
                                                    const std::vector<Eigen::Index>& active,
                                                    const Vector& v, Vector x, Vector mu) {
  const Eigen::Index k = x.size();
  const auto a = static_cast<Eigen::Index>(active.size());
  if (a == 0 || a > k || mu.size() != a) return std::nullopt;
  const double scale = 1.0 + v.norm();
  for (int it = 0; it < 30; ++it) {
    Vector residual(k + a);
    Matrix jac = Matrix::Zero(k + a, k + a);
    residual.head(k) = v;
    for (Eigen::Index j = 0; j < a; ++j) {
      const auto& c = cs[static_cast<std::size_t>(active[static_cast<std::size_t>(j)])];
      const Vector gj = c.grad(x);
      residual.head(k) -= mu(j) * gj;
      residual(k + j) = c.value(x);
      jac.topLeftCorner(k, k) -= 2.0 * mu(j) * c.q;
      jac.block(0, k + j, k, 1) = -gj;
      jac.block(k + j, 0, 1, k) = gj.transpose();
    }
    const double norm = residual.head(k).norm() / scale + residual.tail(a).norm();
    if (!std::isfinite(norm)) return std::nullopt;
    if (norm <= 1e-14) break;
    const Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible()) return std::nullopt;
    const Vector step = -lu.solve(residual);
    x += step.head(k);
    mu += step.tail(a);
    if (it == 29 && norm > 1e-10) return std::nullopt;
  }
  if ((mu.array() < 0.0).any()) return std::nullopt;
  SubproblemSolution sol;
  sol.gamma = std::move(x);
  sol.indices = active;
  sol.multipliers = std::move(mu);
  return sol;
}

/// Log-barrier maximization of v^T x over the constraints in `idx`, started
/// from a point strictly inside all of them.
inline SubproblemSolution barrier_support(const std::vector<Constraint>& cs,
                                          const std::vector<Eigen::Index>& idx,
                                          const std::vector<Eigen::LLT<Matrix>>& factors,
                                          const Vector& v, Vector x,
                                          const SupportOptions& opts) {
  const Eigen::Index k = x.size();
  const auto m = static_cast<double>(idx.size());
  auto con = [&](std::size_t j) -> const Constraint& {
    return cs[static_cast<std::size_t>(idx[j])];
  };
  double relaxed = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < idx.size(); ++j) {
    relaxed = std::min(relaxed, con(j).support(v, factors[static_cast<std::size_t>(idx[j])]));
  }
  const double gap_estimate = std::max(relaxed - v.dot(x), 1e-12 * (1.0 + std::abs(relaxed)));
  double t = m / gap_estimate;

  // f(p) - f(x) for f = -t v^T p - sum log(-g_j(p)), formed as a difference so
  // that it stays accurate when t v^T x dwarfs the decrease.
  auto change = [&](const Vector& from, const Vector& to) {
    double df = -t * v.dot(to - from);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const double g = con(j).value(to);
      if (g >= 0.0) return std::numeric_limits<double>::infinity();
      df -= std::log(g / con(j).value(from));
    }
    return df;
  };

  SubproblemSolution best;
  int extra = 0;
  best.indices = idx;
  best.gamma = x;
  best.multipliers = Vector::Zero(static_cast<Eigen::Index>(idx.size()));
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    bool stalled = false;
    for (int inner = 0; inner < opts.max_inner; ++inner) {
      Vector grad = -t * v;
      Matrix hess = Matrix::Zero(k, k);
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const double g = con(j).value(x);
        const Vector gi = con(j).grad(x);
        grad += gi / (-g);
        hess += 2.0 * con(j).q / (-g) + gi * gi.transpose() / (g * g);
      }
      const Vector step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      if (!(decrement > 1e-14)) break;
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        const Vector xn = x + alpha * step;
        if (change(x, xn) <= -0.25 * alpha * decrement) {
          x = xn;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) {
        // A tiny decrement that cannot be realized is just rounding at the center.
        stalled = decrement > 1e-6;
        break;
      }
    }
    Vector lambda(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      lambda(static_cast<Eigen::Index>(j)) = 1.0 / (t * -con(j).value(x));
    }
    const double upper = dual_bound(cs, idx, lambda, x, v);
    if (std::isfinite(upper) && upper <= best.upper) {
      best.gamma = x;
      best.multipliers = lambda;
      best.upper = upper;
    }
    const double scale = 1.0 + std::abs(best.upper);
    const double gap = best.upper - v.dot(best.gamma);
    if (gap <= opts.solver_tol * scale) {
      best.certified = true;
      ++extra;
    }
    // Near the boundary g_j loses digits, so centering is only trusted a
    // little past the reporting tolerance; the KKT polish supplies the rest.
    if (gap <= 1e-3 * opts.solver_tol * scale || extra > 2 || stalled) break;
    t *= 10.0;
  }
  if (!std::isfinite(best.upper)) return best;

  // Polish on the constraints that carry the multiplier mass: a few relative
  // cut-offs, then the j largest multipliers for j = k..1.
  const Vector lambda0 = best.multipliers;
  const Vector gamma0 = best.gamma;
  const double lmax = lambda0.maxCoeff();
  std::vector<std::size_t> order(idx.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lambda0(static_cast<Eigen::Index>(a)) >
           lambda0(static_cast<Eigen::Index>(b));
  });
  std::vector<std::vector<std::size_t>> candidates;
  for (const double cutoff : {1e-6, 1e-3, 1e-9}) {
    std::vector<std::size_t> c;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (lambda0(static_cast<Eigen::Index>(j)) >= cutoff * lmax) c.push_back(j);
    }
    candidates.push_back(std::move(c));
  }
  for (auto j = std::min<std::size_t>(static_cast<std::size_t>(k), idx.size()); j >= 1; --j) {
    std::vector<std::size_t> c(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(j));
    std::sort(c.begin(), c.end());
    candidates.push_back(std::move(c));
  }
  std::vector<std::vector<Eigen::Index>> tried;
  for (const auto& candidate : candidates) {
    std::vector<Eigen::Index> active;
    std::vector<double> mu0;
    for (const std::size_t j : candidate) {
      active.push_back(idx[j]);
      mu0.push_back(lambda0(static_cast<Eigen::Index>(j)));
    }
    if (std::find(tried.begin(), tried.end(), active) != tried.end()) continue;
    tried.push_back(active);
    auto polished =
        kkt_polish(cs, active, v, gamma0,
                   Eigen::Map<const Vector>(mu0.data(), static_cast<Eigen::Index>(mu0.size())));
    if (!polished) continue;
    bool feasible = true;
    for (const auto j : idx) {
      if (cs[static_cast<std::size_t>(j)].value(polished->gamma) > opts.feas_tol) feasible = false;
    }
    // Either dual value bounds the support; keep the smaller one.
    const double upper = std::min(
        best.upper, dual_bound(cs, polished->indices, polished->multipliers, polished->gamma, v));
    const double gap = upper - v.dot(polished->gamma);
    if (feasible && gap <= best.upper - v.dot(best.gamma)) {
      polished->upper = upper;
      polished->certified = gap <= opts.solver_tol * (1.0 + std::abs(upper));
      best = std::move(*polished);
      if (best.certified) break;
    }
  }
  return best;
}

inline double max_violation(const std::vector<Constraint>& cs, const Vector& x,
                            Eigen::Index* argmax = nullptr) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const double g = cs[i].value(x);
    if (g > worst) {
      worst = g;
      if (argmax) *argmax = static_cast<Eigen::Index>(i);
    }
  }
  return worst;
}

inline SupportResult to_result(const IntersectionSet& inter, const SubproblemSolution& s,
                               const Vector& v) {
  SupportResult r;
  r.maximizer = s.gamma;
  const double lower = v.dot(s.gamma);
  if (s.certified) {
    r.value = s.upper;
    r.gap = std::max(0.0, s.upper - lower);
  } else {
    r.value = lower;
    r.gap = std::isfinite(s.upper) ? std::max(0.0, s.upper - lower)
                                   : std::numeric_limits<double>::infinity();
  }
  r.certified = s.certified;
  for (std::size_t j = 0; j < s.indices.size(); ++j) {
    if (s.multipliers.size() > static_cast<Eigen::Index>(j) &&
        s.multipliers(static_cast<Eigen::Index>(j)) > 0.0) {
      r.active.push_back(inter.constraints()[static_cast<std::size_t>(s.indices[j])].member);
    }
  }
  return r;
}

}  // namespace detail

/// sup { gamma^T v : gamma in every member }.
inline SupportResult support_intersection(const IntersectionSet& inter, const Vector& v,
                                          const SupportOptions& opts = {},
                                          SupportWorkspace* workspace = nullptr) {
  if (v.size() != inter.dim()) throw ShapeError("support_intersection: direction has wrong size");
  const auto& members = inter.members();

  if (members.size() == 1 && opts.closed_form_single) {
    const ParameterSet& g = members.front();
    SupportResult r;
    const Vector pv = g.solve(v);
    const double q = v.dot(pv);
    const double radius = std::sqrt(std::max(0.0, g.schur() * q));
    r.value = g.lse().dot(v) + radius;
    r.maximizer = q > 0.0 ? Vector(g.lse() + std::sqrt(g.schur() / q) * pv) : g.lse();
    r.active = {0};
    return r;
  }

  const NonemptyResult& ne = inter.nonempty();
  if (!ne.nonempty) throw InfeasibleError("empty intersection: " + ne.certificate);
  if (v.squaredNorm() == 0.0) return SupportResult{0.0, ne.witness, 0.0, {}, true};
  if (inter.singleton_member()) {
    return SupportResult{ne.witness.dot(v), ne.witness, 0.0, {*inter.singleton_member()}, true};
  }
  if (!ne.interior) {
    return SupportResult{ne.witness.dot(v), ne.witness,
                         std::numeric_limits<double>::infinity(), {}, false};
  }

  const auto& cs = inter.constraints();
  SupportWorkspace local;
  SupportWorkspace& ws = workspace ? *workspace : local;

  auto accept = [&](const detail::SubproblemSolution& s) {
    if (!s.certified) return false;
    if (detail::max_violation(cs, s.gamma) > opts.feas_tol) return false;
    return s.upper - v.dot(s.gamma) <= opts.solver_tol * (1.0 + std::abs(s.upper));
  };

  // Warm start from the previous active set.
  if (!ws.active.empty() && ws.gamma.size() == v.size()) {
    if (auto s = detail::kkt_polish(cs, ws.active, v, ws.gamma, ws.multipliers)) {
      s->upper = detail::dual_bound(cs, s->indices, s->multipliers, s->gamma, v);
      s->certified = true;
      if (accept(*s)) {
        ws.gamma = s->gamma;
        ws.multipliers = s->multipliers;
        return detail::to_result(inter, *s, v);
      }
    }
  }

  std::vector<Eigen::Index> working = ws.working;
  {
    Eigen::Index tightest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const double h = cs[i].support(v, inter.factors()[i]);
      if (h < best) {
        best = h;
        tightest = static_cast<Eigen::Index>(i);
      }
    }
    if (std::find(working.begin(), working.end(), tightest) == working.end()) {
      working.push_back(tightest);
    }
  }

  detail::SubproblemSolution sol;
  for (std::size_t round = 0; round <= cs.size(); ++round) {
    std::sort(working.begin(), working.end());
    sol = detail::barrier_support(cs, working, inter.factors(), v, ne.witness, opts);
    std::vector<Eigen::Index> violated;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      if (std::binary_search(working.begin(), working.end(), idx)) continue;
      if (cs[i].value(sol.gamma) > opts.feas_tol) violated.push_back(idx);
    }
    if (violated.empty()) break;
    working.insert(working.end(), violated.begin(), violated.end());
  }
  if (sol.certified && detail::max_violation(cs, sol.gamma) > opts.feas_tol) {
    sol.certified = false;
  }

  ws.working = working;
  ws.active.clear();
  std::vector<double> mu;
  for (std::size_t j = 0; j < sol.indices.size(); ++j) {
    const double lj = sol.multipliers(static_cast<Eigen::Index>(j));
    if (lj > 1e-6 * sol.multipliers.maxCoeff()) {
      ws.active.push_back(sol.indices[j]);
      mu.push_back(lj);
    }
  }
  ws.gamma = sol.gamma;
  ws.multipliers = Eigen::Map<const Vector>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  return detail::to_result(inter, sol, v);
}

struct UpperEvaluation {
  double value = 0.0;
  Vector gradient;
  Vector maximizer;
  double gap = 0.0;
  bool certified = true;
};

/// phi^+(z) over the intersection with a Danskin gradient J_b(z) gamma*.
inline UpperEvaluation eval_upper_intersection(const IntersectionSet& inter,
                                               const BasisSet& basis, const Vector& z,
                                               const SupportOptions& opts = {},
                                               SupportWorkspace* workspace = nullptr) {
  const Vector b = basis.eval(z);
  if (b.norm() <= tol::kBasisNorm) {
    throw NonsmoothPointError("eval_upper_intersection: b(z) vanishes at this point");
  }
  const SupportResult s = support_intersection(inter, b, opts, workspace);
  return {s.value, basis.jacobian(z) * s.maximizer, s.maximizer, s.gap, s.certified};
}

/// phi^+(z) over the intersection, value only; defined also where b(z) = 0.
inline double upper_intersection(const IntersectionSet& inter, const BasisSet& basis,
                                 const Vector& z, const SupportOptions& opts = {}) {
  return support_intersection(inter, basis.eval(z), opts).value;
}

/// sup - inf of gamma^T b(z) over the intersection.
inline double uncertainty_intersection(const IntersectionSet& inter, const BasisSet& basis,
                                       const Vector& z, const SupportOptions& opts = {}) {
  const Vector b = basis.eval(z);
  const SupportResult hi = support_intersection(inter, b, opts);
  const SupportResult lo = support_intersection(inter, -b, opts);
  return std::max(0.0, hi.value + lo.value);
}

}  // namespace cautious
