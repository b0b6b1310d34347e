#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace fdclust::lbfgs {

struct Options {
  int history = 10;
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;  ///< stop when ||g||_inf <= this
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search = 40;
};

enum class Status { converged, max_iterations, line_search_failed, diverged };

struct Result {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  Status status = Status::max_iterations;
};

/// f(x, grad) -> value; the callback fills `grad`.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

namespace detail {

// Minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb), clamped
// into the bracket; falls back to bisection when the cubic is degenerate.
inline double cubic_step(double a, double fa, double ga, double b, double fb, double gb) {
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  const double lo = std::min(a, b), hi = std::max(a, b);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    const double margin = 0.1 * (hi - lo);
    if (std::isfinite(t) && t > lo + margin && t < hi - margin) return t;
  }
  return 0.5 * (a + b);
}

struct Point {
  double step;
  double value;
  double slope;
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
};

}  // namespace detail

/// Strong-Wolfe line search (bracketing + zoom). Returns false when no
/// acceptable step was found; `out` then holds the best point evaluated.
inline bool strong_wolfe(const Objective& f, const Eigen::VectorXd& x0, double f0, const Eigen::VectorXd& g0,
                         const Eigen::VectorXd& dir, double initial_step, const Options& opt, detail::Point& out) {
  const double slope0 = g0.dot(dir);
  auto eval = [&](double step) {
    detail::Point p;
    p.step = step;
    p.x = x0 + step * dir;
    p.grad.resize(x0.size());
    p.value = f(p.x, p.grad);
    p.slope = p.grad.dot(dir);
    return p;
  };

  detail::Point prev{0.0, f0, slope0, x0, g0};
  detail::Point best = prev;
  double step = initial_step;
  int evals = 0;

  auto zoom = [&](detail::Point lo, detail::Point hi) -> bool {
    while (evals < opt.max_line_search) {
      const double trial = detail::cubic_step(lo.step, lo.value, lo.slope, hi.step, hi.value, hi.slope);
      detail::Point p = eval(trial);
      ++evals;
      if (!std::isfinite(p.value)) {
        hi = p;
        hi.value = std::numeric_limits<double>::infinity();
        continue;
      }
      if (p.value < best.value) best = p;
      if (p.value > f0 + opt.wolfe_c1 * trial * slope0 || p.value >= lo.value) {
        hi = p;
      } else {
        if (std::abs(p.slope) <= -opt.wolfe_c2 * slope0) {
          out = p;
          return true;
        }
        if (p.slope * (hi.step - lo.step) >= 0.0) hi = lo;
        lo = p;
      }
      if (std::abs(hi.step - lo.step) < 1e-16 * std::max(1.0, lo.step)) break;
    }
    return false;
  };

  while (evals < opt.max_line_search) {
    detail::Point cur = eval(step);
    ++evals;
    if (!std::isfinite(cur.value)) {
      // shrink into the finite region
      step = 0.5 * (prev.step + step);
      continue;
    }
    if (cur.value < best.value) best = cur;
    if (cur.value > f0 + opt.wolfe_c1 * step * slope0 || (evals > 1 && cur.value >= prev.value)) {
      if (zoom(prev, cur)) return true;
      out = best;
      return false;
    }
    if (std::abs(cur.slope) <= -opt.wolfe_c2 * slope0) {
      out = cur;
      return true;
    }
    if (cur.slope >= 0.0) {
      if (zoom(cur, prev)) return true;
      out = best;
      return false;
    }
    prev = cur;
    step *= 2.0;
  }
  out = best;
  return false;
}

/// Limited-memory BFGS minimization of `f` from `x0`.
inline Result minimize(const Objective& f, Eigen::VectorXd x0, const Options& opt = {}) {
  Result res;
  res.x = std::move(x0);
  res.gradient.resize(res.x.size());
  res.value = f(res.x, res.gradient);
  if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
    res.status = Status::diverged;
    return res;
  }

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    if (res.gradient.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance) {
      res.status = Status::converged;
      return res;
    }

    // two-loop recursion
    Eigen::VectorXd dir = -res.gradient;
    const std::size_t k = s_hist.size();
    std::vector<double> alpha(k);
    for (std::size_t j = k; j-- > 0;) {
      alpha[j] = rho_hist[j] * s_hist[j].dot(dir);
      dir -= alpha[j] * y_hist[j];
    }
    if (k > 0) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t j = 0; j < k; ++j) {
      const double beta = rho_hist[j] * y_hist[j].dot(dir);
      dir += (alpha[j] - beta) * s_hist[j];
    }
    if (!(dir.dot(res.gradient) < 0.0)) {
      // lost descent; restart from steepest descent
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -res.gradient;
    }

    const double initial = s_hist.empty() ? std::min(1.0, 1.0 / res.gradient.lpNorm<Eigen::Infinity>()) : 1.0;
    detail::Point next;
    const bool ok = strong_wolfe(f, res.x, res.value, res.gradient, dir, initial, opt, next);
    if (!ok && !(next.value < res.value)) {
      res.status = Status::line_search_failed;
      return res;
    }

    Eigen::VectorXd s = next.x - res.x;
    Eigen::VectorXd y = next.grad - res.gradient;
    res.x = std::move(next.x);
    res.gradient = std::move(next.grad);
    res.value = next.value;
    if (!std::isfinite(res.value)) {
      res.status = Status::diverged;
      return res;
    }

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
  }
  res.status = res.gradient.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance ? Status::converged
                                                                                 : Status::max_iterations;
  return res;
}

}  // namespace fdclust::lbfgs
