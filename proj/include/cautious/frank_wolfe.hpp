#pragma once

// Away-step Frank-Wolfe over polytopes given by their vertex lists.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cautious/qmi.hpp"

namespace cautious {

using VertexList = std::vector<Vector>;

struct HullProjection {
  Vector weights;
  Vector point;
  double distance = 0.0;
};

namespace detail {

inline Matrix stack_columns(const VertexList& vertices) {
  if (vertices.empty()) throw ShapeError("polytope needs at least one vertex");
  Matrix v(vertices.front().size(), static_cast<Eigen::Index>(vertices.size()));
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (vertices[i].size() != v.rows()) throw ShapeError("polytope vertices differ in dimension");
    v.col(static_cast<Eigen::Index>(i)) = vertices[i];
  }
  return v;
}

}  // namespace detail

/// Closest point of conv(vertices) to z, with its convex weights.
inline HullProjection project_to_hull(const VertexList& vertices, const Vector& z,
                                      int max_iter = 5000) {
  const Matrix v = detail::stack_columns(vertices);
  if (z.size() != v.rows()) throw ShapeError("project_to_hull: point has wrong dimension");
  const Eigen::Index nv = v.cols();

  Vector w = Vector::Zero(nv);
  Eigen::Index start = 0;
  (v.colwise() - z).colwise().squaredNorm().minCoeff(&start);
  w(start) = 1.0;
  Vector x = v.col(start);
  const double scale = 1.0 + v.cwiseAbs().maxCoeff() + z.cwiseAbs().maxCoeff();

  for (int it = 0; it < max_iter; ++it) {
    const Vector g = x - z;
    if (g.norm() <= 1e-15 * scale) break;
    const Vector scores = v.transpose() * g;
    Eigen::Index fw = 0;
    scores.minCoeff(&fw);
    Eigen::Index away = -1;
    double away_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < nv; ++i) {
      if (w(i) > 0.0 && scores(i) > away_score) {
        away_score = scores(i);
        away = i;
      }
    }
    const double gx = g.dot(x);
    const double fw_gap = gx - scores(fw);
    if (fw_gap <= 1e-24 * scale * scale) break;
    Vector d;
    double step_max = 0.0;
    const bool toward = fw_gap >= away_score - gx;
    if (toward) {
      d = v.col(fw) - x;
      step_max = 1.0;
    } else {
      d = x - v.col(away);
      step_max = w(away) / (1.0 - w(away));
    }
    const double dd = d.squaredNorm();
    if (dd == 0.0) break;
    const double step = std::clamp(-g.dot(d) / dd, 0.0, step_max);
    if (step == 0.0) break;
    if (toward) {
      w *= (1.0 - step);
      w(fw) += step;
    } else {
      w *= (1.0 + step);
      w(away) -= step;
      if (step == step_max) w(away) = 0.0;
    }
    x = v * w;
  }
  return {w, x, (x - z).norm()};
}

inline bool in_hull(const VertexList& vertices, const Vector& z, double tol = 1e-9) {
  return project_to_hull(vertices, z).distance <= tol * (1.0 + z.norm());
}

struct FrankWolfeOptions {
  double gap_tol = tol::kFrankWolfe;
  int max_iters = 500;
  double armijo = 1e-4;
  double backtrack = 0.5;
};

struct FrankWolfeResult {
  Vector point;
  Vector weights;
  double value = 0.0;
  Vector gradient;
  double gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

struct ValueAndGradient {
  double value = 0.0;
  Vector gradient;
};

/// Minimizes a differentiable function over conv(vertices), starting from the
/// convex weights `initial_weights`. The linear minimization oracle breaks
/// ties by the first vertex index. Step sizes come from a backtracking line
/// search on a local quadratic model with an Armijo safeguard.
inline FrankWolfeResult frank_wolfe(const std::function<ValueAndGradient(const Vector&)>& f,
                                    const VertexList& vertices, Vector initial_weights,
                                    const FrankWolfeOptions& opts = {}) {
  const Matrix v = detail::stack_columns(vertices);
  const Eigen::Index nv = v.cols();
  if (initial_weights.size() != nv) throw ShapeError("frank_wolfe: weight vector has wrong size");

  FrankWolfeResult r;
  r.weights = std::move(initial_weights);
  r.point = v * r.weights;
  ValueAndGradient cur = f(r.point);
  r.value = cur.value;
  r.gradient = cur.gradient;
  double lipschitz = 0.0;

  for (int it = 0; it < opts.max_iters; ++it) {
    r.iterations = it;
    const Vector& g = cur.gradient;
    const Vector scores = v.transpose() * g;
    Eigen::Index fw = 0;
    scores.minCoeff(&fw);
    Eigen::Index away = -1;
    double away_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < nv; ++i) {
      if (r.weights(i) > 0.0 && scores(i) > away_score) {
        away_score = scores(i);
        away = i;
      }
    }
    const double gx = g.dot(r.point);
    r.gap = gx - scores(fw);
    if (r.gap <= opts.gap_tol) {
      r.converged = true;
      break;
    }
    const bool toward = r.gap >= away_score - gx;
    Vector d;
    double step_max = 0.0;
    if (toward) {
      d = v.col(fw) - r.point;
      step_max = 1.0;
    } else {
      d = r.point - v.col(away);
      step_max = r.weights(away) / (1.0 - r.weights(away));
    }
    const double slope = g.dot(d);
    const double dd = d.squaredNorm();
    if (!(slope < 0.0) || dd == 0.0) break;
    if (lipschitz <= 0.0) lipschitz = std::max(1e-12, -slope / dd);

    auto updated_weights = [&](double step) {
      Vector w = r.weights;
      if (toward) {
        w *= (1.0 - step);
        w(fw) += step;
      } else {
        w *= (1.0 + step);
        w(away) -= step;
        if (step == step_max) w(away) = 0.0;
      }
      return w;
    };

    bool accepted = false;
    Vector trial_weights;
    Vector trial_point;
    ValueAndGradient trial;
    for (int ls = 0; ls < 60; ++ls) {
      const double step = std::min(step_max, -slope / (lipschitz * dd));
      trial_weights = updated_weights(step);
      trial_point = v * trial_weights;
      trial = f(trial_point);
      const double model = cur.value + step * slope + 0.5 * lipschitz * step * step * dd;
      if (trial.value <= model && trial.value <= cur.value + opts.armijo * step * slope) {
        accepted = true;
        break;
      }
      lipschitz /= opts.backtrack;
    }
    if (!accepted) break;
    lipschitz *= 0.9;

    r.weights = std::move(trial_weights);
    r.point = std::move(trial_point);
    cur = std::move(trial);
    r.value = cur.value;
    r.gradient = cur.gradient;
  }
  if (!r.converged) {
    const Vector scores = v.transpose() * cur.gradient;
    r.gap = cur.gradient.dot(r.point) - scores.minCoeff();
    r.converged = r.gap <= opts.gap_tol;
  }
  return r;
}

}  // namespace cautious
