#include "inca/hier_gnn/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "inca/core/error.hpp"

namespace inca::hier_gnn {

namespace {

void project(std::vector<double>& x, const Bounds& b) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], b.lower[i], b.upper[i]);
}

// Zeroes gradient components that point out of the box at active bounds.
std::vector<double> projected_gradient(const std::vector<double>& x, const std::vector<double>& g,
                                       const Bounds& b) {
  std::vector<double> pg = g;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= b.lower[i] && g[i] > 0.0) pg[i] = 0.0;
    if (x[i] >= b.upper[i] && g[i] < 0.0) pg[i] = 0.0;
  }
  return pg;
}

double inf_norm(const std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n = std::max(n, std::abs(x));
  return n;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_bounds(const std::vector<double>& x, const Bounds& b) {
  if (b.lower.size() != x.size() || b.upper.size() != x.size())
    fail(ErrorCode::ShapeMismatch, "bounds do not match the parameter vector");
}

struct Pair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

}  // namespace

OptimizerResult minimize_lbfgs_box(const Objective& fn, std::vector<double> x0, const Bounds& bounds,
                                   const OptimizerOptions& opts) {
  check_bounds(x0, bounds);
  const std::size_t n = x0.size();
  OptimizerResult res;
  res.x = std::move(x0);
  project(res.x, bounds);

  std::vector<double> g(n);
  res.f = fn(res.x, g);
  res.evaluations = 1;
  res.trace.push_back(res.f);

  std::deque<Pair> memory;
  std::vector<double> x_new(n), g_new(n), dir(n), alpha(opts.memory);

  for (res.iterations = 0; res.iterations < opts.max_iters; ++res.iterations) {
    std::vector<double> pg = projected_gradient(res.x, g, bounds);
    res.projected_grad_norm = inf_norm(pg);
    if (res.projected_grad_norm <= opts.grad_tol) {
      res.converged = true;
      break;
    }

    // Free variables: not pinned at a bound by the current gradient.
    std::vector<char> free(n, 1);
    for (std::size_t i = 0; i < n; ++i)
      if (pg[i] == 0.0 && (res.x[i] <= bounds.lower[i] || res.x[i] >= bounds.upper[i])) free[i] = 0;

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) memory.clear();
      // Two-loop recursion on the free subspace.
      for (std::size_t i = 0; i < n; ++i) dir[i] = free[i] ? -g[i] : 0.0;
      for (std::size_t k = memory.size(); k-- > 0;) {
        alpha[k] = memory[k].rho * dot(memory[k].s, dir);
        for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[k] * memory[k].y[i];
      }
      double gamma = 1.0;
      if (!memory.empty()) gamma = dot(memory.back().s, memory.back().y) / dot(memory.back().y, memory.back().y);
      else gamma = std::min(1.0, 1.0 / std::max(inf_norm(pg), 1e-300));
      for (double& v : dir) v *= gamma;
      for (std::size_t k = 0; k < memory.size(); ++k) {
        const double beta = memory[k].rho * dot(memory[k].y, dir);
        for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha[k] - beta) * memory[k].s[i];
      }
      for (std::size_t i = 0; i < n; ++i)
        if (!free[i]) dir[i] = 0.0;
      if (dot(dir, g) >= 0.0) {
        memory.clear();
        for (std::size_t i = 0; i < n; ++i) dir[i] = free[i] ? -g[i] * gamma : 0.0;
      }

      double step = 1.0;
      for (int ls = 0; ls < 40; ++ls) {
        for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + step * dir[i];
        project(x_new, bounds);
        double decrease = 0.0;
        for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (x_new[i] - res.x[i]);
        double f_new = std::numeric_limits<double>::infinity();
        try {
          f_new = fn(x_new, g_new);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NonFiniteLoss) throw;
        }
        ++res.evaluations;
        if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * decrease && decrease < 0.0) {
          Pair pr{std::vector<double>(n), std::vector<double>(n), 0.0};
          for (std::size_t i = 0; i < n; ++i) {
            pr.s[i] = x_new[i] - res.x[i];
            pr.y[i] = g_new[i] - g[i];
          }
          const double sy = dot(pr.s, pr.y);
          if (sy > 1e-10 * dot(pr.y, pr.y)) {
            pr.rho = 1.0 / sy;
            memory.push_back(std::move(pr));
            if (memory.size() > opts.memory) memory.pop_front();
          }
          const double f_old = res.f;
          res.x.swap(x_new);
          g.swap(g_new);
          res.f = f_new;
          res.trace.push_back(res.f);
          accepted = true;
          if ((f_old - f_new) <= opts.ftol * std::max({std::abs(f_old), std::abs(f_new), 1.0})) {
            res.converged = true;
          }
          break;
        }
        step *= 0.5;
      }
    }
    if (!accepted) break;  // no descent possible along either direction
    if (res.converged) {
      ++res.iterations;
      break;
    }
  }
  res.projected_grad_norm = inf_norm(projected_gradient(res.x, g, bounds));
  if (res.projected_grad_norm <= opts.grad_tol) res.converged = true;
  return res;
}

OptimizerResult minimize_adam(const Objective& fn, std::vector<double> x0, const Bounds& bounds,
                              const OptimizerOptions& opts) {
  check_bounds(x0, bounds);
  const std::size_t n = x0.size();
  OptimizerResult res;
  res.x = std::move(x0);
  project(res.x, bounds);
  std::vector<double> g(n), g_new(n), m(n, 0.0), v(n, 0.0), x_new(n);
  res.f = fn(res.x, g);
  res.evaluations = 1;
  res.trace.push_back(res.f);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double lr = opts.adam_step;
  std::size_t t = 0;
  for (res.iterations = 0; res.iterations < opts.max_iters; ++res.iterations) {
    res.projected_grad_norm = inf_norm(projected_gradient(res.x, g, bounds));
    if (res.projected_grad_norm <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    ++t;
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
    }
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] - lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    project(x_new, bounds);
    double f_new = std::numeric_limits<double>::infinity();
    try {
      f_new = fn(x_new, g_new);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteLoss) throw;
    }
    ++res.evaluations;
    if (std::isfinite(f_new) && f_new <= res.f) {
      const double f_old = res.f;
      res.x.swap(x_new);
      g.swap(g_new);
      res.f = f_new;
      res.trace.push_back(res.f);
      if ((f_old - f_new) <= opts.ftol * std::max({std::abs(f_old), std::abs(f_new), 1.0}) && f_old != f_new) {
        res.converged = true;
        ++res.iterations;
        break;
      }
    } else {
      lr *= 0.5;
      if (lr < 1e-12) break;
    }
  }
  res.projected_grad_norm = inf_norm(projected_gradient(res.x, g, bounds));
  if (res.projected_grad_norm <= opts.grad_tol) res.converged = true;
  return res;
}

}  // namespace inca::hier_gnn
