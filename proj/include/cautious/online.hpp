#pragma once

// One-shot cautious suboptimization over polytopes and the online loop that
// alternates local measurement with minimization of the worst-case bound.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SVD>

#include "cautious/analysis.hpp"
#include "cautious/basis.hpp"
#include "cautious/bounds.hpp"
#include "cautious/frank_wolfe.hpp"
#include "cautious/intersection.hpp"
#include "cautious/regression.hpp"

namespace cautious {

/// Offsets F around a point; S(z) = z + conv F.
class SampleStencil {
 public:
  static constexpr double kInteriorRadius = 1e-6;

  explicit SampleStencil(std::vector<Vector> offsets) : offsets_(std::move(offsets)) {
    if (offsets_.empty()) throw ConfigError("stencil needs at least one offset");
    const Eigen::Index n = offsets_.front().size();
    for (const auto& f : offsets_) {
      if (f.size() != n) throw ConfigError("stencil offsets differ in dimension");
    }
    if (static_cast<Eigen::Index>(offsets_.size()) < n + 1) {
      throw ConfigError("stencil needs at least n+1 offsets");
    }
    // The cross-polytope with vertices +-r sqrt(n) e_j contains the ball of radius r.
    const double reach = kInteriorRadius * std::sqrt(static_cast<double>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
      for (const double sign : {1.0, -1.0}) {
        if (!in_hull(offsets_, sign * reach * Vector::Unit(n, j), 1e-12)) {
          throw ConfigError("stencil: 0 is not in the interior of conv(F)");
        }
      }
    }
  }

  [[nodiscard]] const std::vector<Vector>& offsets() const { return offsets_; }
  [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(offsets_.size()); }
  [[nodiscard]] Eigen::Index dim() const { return offsets_.front().size(); }

  [[nodiscard]] std::vector<Vector> points_at(const Vector& z) const {
    std::vector<Vector> points;
    points.reserve(offsets_.size());
    for (const auto& f : offsets_) points.push_back(z + f);
    return points;
  }

  [[nodiscard]] VertexList polytope_at(const Vector& z) const { return points_at(z); }

 private:
  std::vector<Vector> offsets_;
};

class MeasurementOracle {
 public:
  virtual ~MeasurementOracle() = default;
  /// One scalar measurement per query point.
  virtual RowVector measure(const std::vector<Vector>& points) = 0;
  /// True function value, when the oracle knows it.
  [[nodiscard]] virtual std::optional<double> truth(const Vector&) const { return std::nullopt; }
};

enum class NoiseMode { uniform, constant, zero };

/// w = alpha * 1 with alpha > 0 on the boundary of Z(Pi).
inline Vector boundary_ones(const SymQuadSet& noise) {
  const Eigen::Index t = noise.dim();
  const Vector ones = Vector::Ones(t);
  const double a = ones.dot(noise.m22() * ones);
  const double b = ones.dot(noise.m21());
  const double c = noise.m11();
  const double disc = b * b - a * c;
  if (!(a < 0.0) || disc < 0.0) {
    throw PreconditionError("boundary_ones: the ray along 1 does not meet the noise boundary");
  }
  return ((-b - std::sqrt(disc)) / a) * ones;
}

/// Y = gamma_hat^T Phi + W with W drawn per `mode`.
class SyntheticOracle : public MeasurementOracle {
 public:
  SyntheticOracle(Vector gamma_hat, BasisSet basis, SymQuadSet noise, NoiseMode mode,
                  std::uint64_t seed, std::optional<Vector> w_bar = std::nullopt)
      : gamma_hat_(std::move(gamma_hat)),
        basis_(std::move(basis)),
        noise_(std::move(noise)),
        mode_(mode),
        rng_(seed) {
    if (gamma_hat_.size() != basis_.size()) {
      throw ConfigError("gamma_hat has length " + std::to_string(gamma_hat_.size()) +
                        ", basis has " + std::to_string(basis_.size()) + " functions");
    }
    if (mode_ == NoiseMode::constant) {
      w_bar_ = w_bar ? *w_bar : boundary_ones(noise_);
      if (w_bar_.size() != noise_.dim()) throw ConfigError("w_bar has wrong length");
      if (!noise_.contains(w_bar_)) throw ConfigError("w_bar lies outside the noise set");
    } else if (mode_ == NoiseMode::zero) {
      w_bar_ = Vector::Zero(noise_.dim());
      if (!noise_.contains(w_bar_)) throw ConfigError("zero noise lies outside the noise set");
    }
  }

  RowVector measure(const std::vector<Vector>& points) override {
    if (static_cast<Eigen::Index>(points.size()) != noise_.dim()) {
      throw ShapeError("synthetic oracle: noise model is for " + std::to_string(noise_.dim()) +
                       " samples");
    }
    const Vector w = mode_ == NoiseMode::uniform ? sample_uniform(noise_, rng_) : w_bar_;
    RowVector y(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      y(idx) = gamma_hat_.dot(basis_.eval(points[i])) + w(idx);
    }
    return y;
  }

  [[nodiscard]] std::optional<double> truth(const Vector& z) const override {
    return gamma_hat_.dot(basis_.eval(z));
  }

  [[nodiscard]] const Vector& gamma_hat() const { return gamma_hat_; }

 private:
  Vector gamma_hat_;
  BasisSet basis_;
  SymQuadSet noise_;
  NoiseMode mode_;
  std::mt19937_64 rng_;
  Vector w_bar_;
};

/// Serves recorded (z, y) rows in file order; query points must match the record.
class ReplayOracle : public MeasurementOracle {
 public:
  struct Row {
    Vector z;
    double y = 0.0;
  };

  explicit ReplayOracle(std::vector<Row> rows) : rows_(std::move(rows)) {}

  RowVector measure(const std::vector<Vector>& points) override {
    if (cursor_ + points.size() > rows_.size()) {
      throw ConfigError("replay oracle: measurement table exhausted");
    }
    RowVector y(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Row& row = rows_[cursor_ + i];
      if (row.z.size() != points[i].size() ||
          (row.z - points[i]).norm() > 1e-9 * (1.0 + points[i].norm())) {
        throw ConfigError("replay oracle: recorded point " + std::to_string(cursor_ + i) +
                          " does not match the queried point");
      }
      y(static_cast<Eigen::Index>(i)) = row.y;
    }
    cursor_ += points.size();
    return y;
  }

  [[nodiscard]] const std::vector<Row>& rows() const { return rows_; }

 private:
  std::vector<Row> rows_;
  std::size_t cursor_ = 0;
};

struct Measurement {
  MeasurementBatch batch;
  ParameterSet gamma;
  double sigma_min = 0.0;
};

inline double smallest_singular_value(const Matrix& m) {
  const Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().size() ? svd.singularValues().minCoeff() : 0.0;
}

/// Queries the oracle on z + F and builds Gamma from the batch.
inline Measurement measure_at(MeasurementOracle& oracle, const BasisSet& basis,
                              const SampleStencil& stencil, const SymQuadSet& noise,
                              const Vector& z) {
  const auto points = stencil.points_at(z);
  MeasurementBatch batch = assemble_batch(basis, points, oracle.measure(points));
  const double sigma = smallest_singular_value(batch.phi);
  try {
    ParameterSet gamma = regress(batch, noise);
    return {std::move(batch), std::move(gamma), sigma};
  } catch (const UnboundedSetError&) {
    throw UnboundedSetError("stencil not exciting at z: Phi^F(z) lacks full row rank");
  }
}

struct MinimizeOptions {
  FrankWolfeOptions fw;
  SupportOptions support;
};

struct MinimizeResult {
  Vector z;
  double value = 0.0;
  double fw_gap = 0.0;
  double solver_gap = 0.0;
  int iterations = 0;
  bool converged = false;
  bool certified = true;
};

/// argmin of phi^+(.; inter) over conv(vertices), by Frank-Wolfe from z_init.
inline MinimizeResult minimize_upper(const IntersectionSet& inter, const BasisSet& basis,
                                     const VertexList& vertices, const Vector& z_init,
                                     const MinimizeOptions& opts = {}) {
  if (vertices.empty()) throw PreconditionError("minimize_upper: polytope has no vertices");
  Vector weights = Vector::Zero(static_cast<Eigen::Index>(vertices.size()));
  bool exact_vertex = false;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (vertices[i].size() == z_init.size() && vertices[i] == z_init) {
      weights(static_cast<Eigen::Index>(i)) = 1.0;
      exact_vertex = true;
      break;
    }
  }
  if (!exact_vertex) {
    const HullProjection proj = project_to_hull(vertices, z_init);
    if (proj.distance > 1e-8 * (1.0 + z_init.norm())) {
      throw PreconditionError("minimize_upper: initial point lies outside the polytope");
    }
    weights = proj.weights;
  }

  Vector barycenter = Vector::Zero(z_init.size());
  for (const auto& v : vertices) barycenter += v;
  barycenter /= static_cast<double>(vertices.size());

  SupportWorkspace workspace;
  bool certified = true;
  double worst_gap = 0.0;
  auto objective = [&](const Vector& z) -> ValueAndGradient {
    UpperEvaluation e;
    try {
      e = eval_upper_intersection(inter, basis, z, opts.support, &workspace);
    } catch (const NonsmoothPointError&) {
      // b(z) = 0: the value is still defined; borrow the gradient from a nearby
      // point inside the polytope, toward the barycenter or else a vertex.
      const double value = upper_intersection(inter, basis, z, opts.support);
      bool found = false;
      for (std::size_t i = 0; i <= vertices.size() && !found; ++i) {
        const Vector& target = i == 0 ? barycenter : vertices[i - 1];
        const Vector nudged = z + 1e-7 * (target - z);
        if (basis.eval(nudged).norm() <= tol::kBasisNorm) continue;
        e = eval_upper_intersection(inter, basis, nudged, opts.support, &workspace);
        found = true;
      }
      if (!found) throw;
      e.value = value;
    }
    certified = certified && e.certified;
    worst_gap = std::max(worst_gap, e.gap);
    return {e.value, e.gradient};
  };

  const FrankWolfeResult fw = frank_wolfe(objective, vertices, weights, opts.fw);
  MinimizeResult r;
  r.z = fw.point;
  r.value = fw.value;
  r.fw_gap = fw.gap;
  r.iterations = fw.iterations;
  r.converged = fw.converged;
  r.certified = certified;
  r.solver_gap = worst_gap;
  return r;
}

/// argmin over the polytope of phi^+ + lambda U, through the inflated set Gamma_lambda.
inline MinimizeResult weighted_minimize(const ParameterSet& gamma, const BasisSet& basis,
                                        const VertexList& vertices, const Vector& z_init,
                                        double lambda, const MinimizeOptions& opts = {}) {
  return minimize_upper(IntersectionSet(inflate_lambda(gamma, lambda)), basis, vertices, z_init,
                        opts);
}

struct OnlineOptions {
  int iterations = 100;
  /// Accept an initial set that is not certified strictly convex.
  bool force = false;
  /// Keep Gamma_0 plus the most recent members only (weakens the guarantees).
  std::optional<std::size_t> max_members;
  MinimizeOptions minimize;
  /// Points at which U(.; Gamma_0 cap ... cap Gamma_k) is tracked for every k.
  std::vector<Vector> probes;
  /// Record per-coordinate parameter intervals over the intersection.
  bool record_intervals = false;
};

struct OnlineStep {
  int k = 0;
  Vector z;
  /// phi^+(z_k; Gamma_0 cap ... cap Gamma_{k-1})
  double bound = 0.0;
  double uncertainty = 0.0;
  std::optional<double> phi_hat;
  RowVector y;
  double sigma_min = 0.0;
  double fw_gap = 0.0;
  double solver_gap = 0.0;
  bool certified = true;
  /// U(probe; Gamma_0 cap ... cap Gamma_k), aligned with OnlineOptions::probes.
  std::vector<double> probe_uncertainty;
  std::vector<Interval> intervals;
};

struct OnlineRunLog {
  Vector z0;
  RowVector y0;
  double sigma0 = 0.0;
  ConvexityCertificate initial_certificate;
  std::vector<double> probe_uncertainty0;
  std::vector<Interval> intervals0;
  std::vector<OnlineStep> steps;
  std::vector<std::string> warnings;
  /// bound[k+1] <= bound[k] + 2 solver_tol for all k.
  bool monotone = true;
  /// Strict decrease observed whenever the iterate moved.
  bool strictly_decreasing_when_moving = true;
};

/// Mutable state of an online run: iterate, members Gamma_0..Gamma_k, and the
/// data needed to report the optimality gap of the last update.
class OnlineState {
 public:
  OnlineState(MeasurementOracle& oracle, BasisSet basis, SampleStencil stencil, SymQuadSet noise,
              Vector z0, OnlineOptions opts)
      : oracle_(&oracle),
        basis_(std::move(basis)),
        stencil_(std::move(stencil)),
        noise_(std::move(noise)),
        opts_(std::move(opts)) {
    if (z0.size() != basis_.input_dim() || stencil_.dim() != basis_.input_dim()) {
      throw ConfigError("z0, stencil and basis dimensions disagree");
    }
    Measurement m0 = measure_at(*oracle_, basis_, stencil_, noise_, z0);
    log_.z0 = z0;
    log_.y0 = m0.batch.y;
    log_.sigma0 = m0.sigma_min;
    log_.initial_certificate = certify_convexity(m0.gamma, basis_);
    if (log_.initial_certificate.verdict != ConvexityVerdict::strictly_convex) {
      const std::string msg = std::string("initial consistent set is only certified ") +
                              to_string(log_.initial_certificate.verdict) +
                              ", strict convexity is required";
      if (!opts_.force) throw ConvexityError(msg);
      log_.warnings.push_back(msg + " (continuing under force)");
    }
    z_ = std::move(z0);
    inter_ = IntersectionSet(std::move(m0.gamma));
    log_.probe_uncertainty0 = probe_uncertainties();
    if (opts_.record_intervals) log_.intervals0 = parameter_intervals();
  }

  /// Update the candidate on S(z_{k-1}), then measure at the new candidate.
  const OnlineStep& step() {
    const VertexList polytope = stencil_.polytope_at(z_);
    const MinimizeResult mr = minimize_upper(*inter_, basis_, polytope, z_, opts_.minimize);
    const UpperEvaluation at_new = eval_or_value(mr.z);

    OnlineStep s;
    s.k = static_cast<int>(log_.steps.size()) + 1;
    s.z = mr.z;
    s.bound = at_new.value;
    s.uncertainty = uncertainty_intersection(*inter_, basis_, mr.z, opts_.minimize.support);
    s.phi_hat = oracle_->truth(mr.z);
    s.fw_gap = mr.fw_gap;
    s.solver_gap = std::max(mr.solver_gap, at_new.gap);
    s.certified = mr.certified && at_new.certified;
    if (!s.certified) {
      log_.warnings.push_back("step " + std::to_string(s.k) + ": bound not certified");
    }

    previous_inter_ = inter_;
    previous_polytope_ = polytope;

    Measurement m = measure_at(*oracle_, basis_, stencil_, noise_, mr.z);
    s.y = m.batch.y;
    s.sigma_min = m.sigma_min;
    IntersectionSet next = inter_->with_member(std::move(m.gamma));
    if (opts_.max_members) next = next.pruned(*opts_.max_members);
    inter_ = std::move(next);
    if (!inter_->nonempty().nonempty) {
      throw InfeasibleError("empty intersection after step " + std::to_string(s.k) +
                            ": the oracle contradicts the noise model");
    }
    s.probe_uncertainty = probe_uncertainties();
    if (opts_.record_intervals) s.intervals = parameter_intervals();

    if (!log_.steps.empty()) {
      const OnlineStep& prev = log_.steps.back();
      if (s.bound > prev.bound + 2.0 * opts_.minimize.support.solver_tol) {
        log_.monotone = false;
        log_.warnings.push_back("step " + std::to_string(s.k) + ": bound increased");
      }
      const bool moved = (mr.z - z_).norm() > 1e-6 * (1.0 + z_.norm());
      if (moved && !(s.bound < prev.bound)) log_.strictly_decreasing_when_moving = false;
    }
    z_ = mr.z;
    log_.steps.push_back(std::move(s));
    return log_.steps.back();
  }

  [[nodiscard]] const OnlineRunLog& log() const { return log_; }
  [[nodiscard]] OnlineRunLog take_log() { return std::move(log_); }
  [[nodiscard]] const Vector& z() const { return z_; }
  [[nodiscard]] const IntersectionSet& intersection() const { return *inter_; }
  [[nodiscard]] const BasisSet& basis() const { return basis_; }
  [[nodiscard]] int iteration() const { return static_cast<int>(log_.steps.size()); }

  /// Intersection and polytope used to compute the current iterate.
  [[nodiscard]] const std::optional<IntersectionSet>& previous_intersection() const {
    return previous_inter_;
  }
  [[nodiscard]] const VertexList& previous_polytope() const { return previous_polytope_; }

 private:
  UpperEvaluation eval_or_value(const Vector& z) const {
    try {
      return eval_upper_intersection(*inter_, basis_, z, opts_.minimize.support);
    } catch (const NonsmoothPointError&) {
      const SupportResult s = support_intersection(*inter_, basis_.eval(z), opts_.minimize.support);
      return {s.value, Vector::Zero(z.size()), s.maximizer, s.gap, s.certified};
    }
  }

  std::vector<double> probe_uncertainties() const {
    std::vector<double> out;
    for (const auto& p : opts_.probes) {
      out.push_back(uncertainty_intersection(*inter_, basis_, p, opts_.minimize.support));
    }
    return out;
  }

  std::vector<Interval> parameter_intervals() const {
    std::vector<Interval> out;
    for (Eigen::Index i = 0; i < inter_->dim(); ++i) {
      const Vector e = Vector::Unit(inter_->dim(), i);
      const double hi = support_intersection(*inter_, e, opts_.minimize.support).value;
      const double lo = -support_intersection(*inter_, -e, opts_.minimize.support).value;
      out.push_back({lo, hi});
    }
    return out;
  }

  MeasurementOracle* oracle_;
  BasisSet basis_;
  SampleStencil stencil_;
  SymQuadSet noise_;
  OnlineOptions opts_;
  Vector z_;
  std::optional<IntersectionSet> inter_;
  std::optional<IntersectionSet> previous_inter_;
  VertexList previous_polytope_;
  OnlineRunLog log_;
};

/// Optimality-gap bracket for the current iterate on its own polytope.
inline GapReport stopping_report(const OnlineState& state, const GapOptions& opts = {}) {
  if (!state.previous_intersection()) {
    throw PreconditionError("stopping_report: no update step has been taken yet");
  }
  return optimality_gap(*state.previous_intersection(), state.basis(), state.previous_polytope(),
                        state.z(), opts);
}

struct OnlineResult {
  OnlineRunLog log;
  GapReport final_gap;
};

inline OnlineResult run_online(MeasurementOracle& oracle, const BasisSet& basis,
                               const SampleStencil& stencil, const SymQuadSet& noise,
                               const Vector& z0, const OnlineOptions& opts,
                               const GapOptions& gap_opts = {}) {
  OnlineState state(oracle, basis, stencil, noise, z0, opts);
  for (int k = 0; k < opts.iterations; ++k) state.step();
  OnlineResult result;
  if (opts.iterations > 0) result.final_gap = stopping_report(state, gap_opts);
  result.log = state.take_log();
  return result;
}

}  // namespace cautious
