#pragma once

// Limited-memory BFGS with a strong-Wolfe line search.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tbqst {

struct LbfgsOptions {
  int memory = 20;
  int max_iterations = 50000;
  /// Stop when |delta f| < rel_f_tol * max(1, |f|) and the step is below
  /// step_tol * (1 + |x|_inf).
  double rel_f_tol = 1e-10;
  double step_tol = 1e-8;
  /// Stop when |grad|_inf <= grad_tol * (1 + |f|).
  double grad_tol = 1e-12;
  /// A failed line search still counts as converged when |grad|_inf is below
  /// stall_grad_tol * (1 + |f|): progress is then limited by rounding.
  double stall_grad_tol = 1e-6;
  int max_line_search = 50;
  double c1 = 1e-4;
  double c2 = 0.9;
};

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0;
  Eigen::VectorXd grad;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string reason;
};

namespace detail {

inline double cubic_minimizer(double a, double fa, double ga, double b, double fb, double gb) {
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  if (disc < 0) return 0.5 * (a + b);
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
  return std::isfinite(t) ? t : 0.5 * (a + b);
}

}  // namespace detail

/// `fg(x, grad)` returns f(x) and writes the gradient.
template <class ObjectiveFn>
OptimResult minimize_lbfgs(ObjectiveFn&& fg, Eigen::VectorXd x0, const LbfgsOptions& opt = {}) {
  using Eigen::VectorXd;
  OptimResult res;
  const Eigen::Index n = x0.size();
  VectorXd x = std::move(x0);
  VectorXd g(n);
  double f = fg(x, g);
  res.evaluations = 1;

  std::deque<VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  auto grad_small = [&](double fv, const VectorXd& gv, double t) {
    return gv.size() == 0 || gv.lpNorm<Eigen::Infinity>() <= t * (1.0 + std::abs(fv));
  };

  int iter = 0;
  bool fresh_restart = false;
  while (true) {
    if (!std::isfinite(f)) {
      res.reason = "non-finite objective";
      break;
    }
    if (grad_small(f, g, opt.grad_tol)) {
      res.converged = true;
      res.reason = "gradient tolerance";
      break;
    }
    if (iter >= opt.max_iterations) {
      res.reason = "iteration limit";
      break;
    }

    // Two-loop recursion for p = -H g.
    VectorXd q = g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[static_cast<std::size_t>(i)] = rho_hist[static_cast<std::size_t>(i)] * s_hist[static_cast<std::size_t>(i)].dot(q);
      q -= alpha[static_cast<std::size_t>(i)] * y_hist[static_cast<std::size_t>(i)];
    }
    double gamma = 1.0;
    if (!s_hist.empty()) gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    VectorXd p = gamma * q;
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(p);
      p += s_hist[i] * (alpha[i] - beta);
    }
    p = -p;
    double dphi0 = g.dot(p);
    if (!(dphi0 < 0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      p = -g;
      dphi0 = -g.squaredNorm();
    }

    double step = 1.0;
    if (s_hist.empty()) step = std::min(1.0, 1.0 / std::max(1e-300, p.lpNorm<Eigen::Infinity>())) *
                               std::max(1.0, x.lpNorm<Eigen::Infinity>()) * 1e-2;

    // Strong-Wolfe line search.
    const double f0 = f;
    VectorXd x_new(n), g_new(n);
    auto phi = [&](double a, double& dphi) {
      x_new = x + a * p;
      const double v = fg(x_new, g_new);
      ++res.evaluations;
      dphi = g_new.dot(p);
      return v;
    };
    double a_prev = 0, f_prev = f0, d_prev = dphi0;
    double a_cur = step;
    bool found = false;
    double a_acc = 0, f_acc = f0;
    VectorXd x_acc, g_acc;
    auto accept = [&](double a, double fv) {
      a_acc = a;
      f_acc = fv;
      x_acc = x_new;
      g_acc = g_new;
      found = true;
    };
    auto zoom = [&](double lo, double f_lo, double d_lo, double hi, double f_hi, double d_hi, int budget) {
      for (int k = 0; k < budget; ++k) {
        const double width = hi - lo;
        double a = detail::cubic_minimizer(lo, f_lo, d_lo, hi, f_hi, d_hi);
        const double lo_b = std::min(lo, hi) + 0.1 * std::abs(width);
        const double hi_b = std::max(lo, hi) - 0.1 * std::abs(width);
        if (!(a >= lo_b && a <= hi_b)) a = 0.5 * (lo + hi);
        double da = 0;
        const double fa = phi(a, da);
        if (!std::isfinite(fa) || fa > f0 + opt.c1 * a * dphi0 || fa >= f_lo) {
          hi = a;
          f_hi = fa;
          d_hi = da;
        } else {
          if (std::abs(da) <= -opt.c2 * dphi0) {
            accept(a, fa);
            return;
          }
          if (fa < f_acc) accept(a, fa);
          if (da * (hi - lo) >= 0) {
            hi = lo;
            f_hi = f_lo;
            d_hi = d_lo;
          }
          lo = a;
          f_lo = fa;
          d_lo = da;
        }
        if (std::abs(hi - lo) <= 1e-16 * std::max(1.0, std::abs(lo))) return;
      }
    };
    found = false;
    f_acc = f0;
    for (int k = 0; k < opt.max_line_search; ++k) {
      double d_cur = 0;
      const double f_cur = phi(a_cur, d_cur);
      if (!std::isfinite(f_cur) || f_cur > f0 + opt.c1 * a_cur * dphi0 || (k > 0 && f_cur >= f_prev)) {
        zoom(a_prev, f_prev, d_prev, a_cur, f_cur, d_cur, opt.max_line_search);
        break;
      }
      if (std::abs(d_cur) <= -opt.c2 * dphi0) {
        accept(a_cur, f_cur);
        break;
      }
      if (d_cur >= 0) {
        accept(a_cur, f_cur);
        zoom(a_cur, f_cur, d_cur, a_prev, f_prev, d_prev, opt.max_line_search);
        break;
      }
      a_prev = a_cur;
      f_prev = f_cur;
      d_prev = d_cur;
      a_cur *= 2.0;
    }

    if (!found || !(f_acc < f0)) {
      if (!fresh_restart && !s_hist.empty()) {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        fresh_restart = true;
        continue;
      }
      res.converged = grad_small(f, g, opt.stall_grad_tol);
      res.reason = "line search made no progress";
      break;
    }
    fresh_restart = false;

    VectorXd s = x_acc - x;
    VectorXd y = g_acc - g;
    const double f_old = f;
    x = x_acc;
    g = g_acc;
    f = f_acc;
    ++iter;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    if (std::abs(f_old - f) < opt.rel_f_tol * std::max(1.0, std::abs(f)) &&
        s.lpNorm<Eigen::Infinity>() < opt.step_tol * (1.0 + x.lpNorm<Eigen::Infinity>())) {
      res.converged = true;
      res.reason = "objective and step tolerance";
      break;
    }
  }
  res.x = std::move(x);
  res.f = f;
  res.grad = std::move(g);
  res.iterations = iter;
  return res;
}

}  // namespace tbqst
