#include "slipctl/constrained_opt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace slipctl {
namespace {

// Thrown internally when the evaluation budget runs out.
struct BudgetExhausted {};

class Lagrangian {
 public:
  explicit Lagrangian(const OptProblem& p) : p_(p), lambda_(Vec::Zero(Eigen::Index(p.inequalities.size()))) {}

  double rho = 10.0;

  double objective(const Vec& w) {
    charge(1);
    return p_.objective(w);
  }

  Vec constraints(const Vec& w) {
    charge(1);
    Vec g(Eigen::Index(p_.inequalities.size()));
    for (std::size_t k = 0; k < p_.inequalities.size(); ++k) g(Eigen::Index(k)) = p_.inequalities[k](w);
    return g;
  }

  double value(const Vec& w) {
    double v = objective(w);
    if (lambda_.size() > 0) {
      const Vec g = constraints(w);
      const Vec shifted = (lambda_ + rho * g).cwiseMax(0.0);
      v += (shifted.squaredNorm() - lambda_.squaredNorm()) / (2.0 * rho);
    }
    return v;
  }

  Vec gradient(const Vec& w) {
    return numerical_gradient([this](const Vec& x) { return value(x); }, w);
  }

  void unmeter() { metered_ = false; }
  void update_multipliers(const Vec& g) { lambda_ = (lambda_ + rho * g).cwiseMax(0.0); }
  const Vec& multipliers() const { return lambda_; }
  long evaluations() const { return evals_; }

 private:
  void charge(long n) {
    if (!metered_) return;
    if (p_.max_evaluations > 0 && evals_ + n > p_.max_evaluations) throw BudgetExhausted{};
    evals_ += n;
  }

  const OptProblem& p_;
  Vec lambda_;
  long evals_ = 0;
  bool metered_ = true;
};

// Intersection of slabs lb <= a . w <= ub; the box is one of them.
class SlabSet {
 public:
  explicit SlabSet(const OptProblem& p) {
    if (p.box) add(p.box->row, p.box->lb + p.box->offset, p.box->ub + p.box->offset);
    for (const auto& b : p.bounds) add(b.row, b.lb, b.ub);
  }

  bool empty() const { return slabs_.empty(); }

  double violation(const Vec& w) const {
    double v = 0.0;
    for (const auto& s : slabs_) {
      const double x = s.row.dot(w);
      v = std::max({v, s.lb - x, x - s.ub});
    }
    return v;
  }

  // Euclidean projection: active-set on the half-spaces, Dykstra's scheme if that cycles.
  Vec project(const Vec& w) const {
    if (slabs_.size() == 1) return project_one(slabs_[0], w);
    if (slabs_.empty() || violation(w) <= 0.0) return w;
    if (auto x = project_active_set(w)) return *x;
    return project_dykstra(w);
  }

  // Stationarity measure: w - P(w - g); reduces to the plain gradient without slabs.
  Vec gradient_map(const Vec& w, const Vec& g) const { return empty() ? g : Vec(w - project(w - g)); }

 private:
  struct Slab {
    Vec row;
    double aa, lb, ub;
  };

  // Half-space k of the working set: sign * row . x <= sign * bound.
  struct Face {
    std::size_t slab;
    double sign;
  };

  std::optional<Vec> project_active_set(const Vec& w) const {
    std::vector<Face> active;
    Vec x = w;
    for (int iter = 0; iter < 4 * int(slabs_.size()) + 8; ++iter) {
      // Projection onto the working faces held as equalities.
      Vec mu;
      if (!active.empty()) {
        Mat n(Eigen::Index(active.size()), w.size());
        Vec b(Eigen::Index(active.size()));
        for (std::size_t k = 0; k < active.size(); ++k) {
          const Slab& s = slabs_[active[k].slab];
          n.row(Eigen::Index(k)) = active[k].sign * s.row.transpose();
          b(Eigen::Index(k)) = active[k].sign > 0 ? s.ub : -s.lb;
        }
        const Mat gram = n * n.transpose();
        mu = gram.completeOrthogonalDecomposition().solve(n * w - b);
        x = w - n.transpose() * mu;
        Eigen::Index worst;
        if (mu.minCoeff(&worst) < -1e-12) {
          active.erase(active.begin() + worst);
          continue;
        }
      } else {
        x = w;
      }
      // Add the most violated face.
      double worst_gap = 1e-12;
      std::optional<Face> add;
      for (std::size_t k = 0; k < slabs_.size(); ++k) {
        const double ax = slabs_[k].row.dot(x);
        if (ax - slabs_[k].ub > worst_gap) {
          worst_gap = ax - slabs_[k].ub;
          add = Face{k, 1.0};
        }
        if (slabs_[k].lb - ax > worst_gap) {
          worst_gap = slabs_[k].lb - ax;
          add = Face{k, -1.0};
        }
      }
      if (!add) return x;
      for (const auto& f : active) {
        if (f.slab == add->slab) return std::nullopt;  // both sides of one slab: give up here
      }
      active.push_back(*add);
    }
    return std::nullopt;
  }

  Vec project_dykstra(const Vec& w) const {
    Vec x = w;
    std::vector<Vec> corr(slabs_.size(), Vec::Zero(w.size()));
    for (int sweep = 0; sweep < 500; ++sweep) {
      double change = 0.0;
      for (std::size_t k = 0; k < slabs_.size(); ++k) {
        const Vec y = x + corr[k];
        const Vec next = project_one(slabs_[k], y);
        corr[k] = y - next;
        change = std::max(change, (next - x).cwiseAbs().maxCoeff());
        x = next;
      }
      if (change < 1e-13) break;
    }
    return x;
  }

  void add(const Vec& row, double lb, double ub) {
    const double aa = row.squaredNorm();
    if (aa > 0.0) slabs_.push_back({row, aa, lb, ub});
  }

  static Vec project_one(const Slab& s, const Vec& w) {
    const double x = s.row.dot(w);
    if (x > s.ub) return w - ((x - s.ub) / s.aa) * s.row;
    if (x < s.lb) return w + ((s.lb - x) / s.aa) * s.row;
    return w;
  }

  std::vector<Slab> slabs_;
};

bool bounds_consistent(const std::vector<LinearBound>& bounds) {
  for (const auto& b : bounds) {
    if (b.lb > b.ub) return false;
    if (b.row.squaredNorm() == 0.0 && (b.lb > 0.0 || b.ub < 0.0)) return false;
  }
  return true;
}

double max_violation(const Vec& g) { return g.size() ? std::max(0.0, g.maxCoeff()) : 0.0; }

}  // namespace

Vec numerical_gradient(const ScalarFn& f, const Vec& w) {
  Vec grad(w.size());
  Vec probe = w;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double h = 1e-4 * std::max(1.0, std::abs(w(j)));
    probe(j) = w(j) + h;
    const double up = f(probe);
    probe(j) = w(j) - h;
    const double down = f(probe);
    probe(j) = w(j);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("numerical_gradient: objective not finite when probing coordinate " + std::to_string(j));
    }
    grad(j) = (up - down) / (2.0 * h);
  }
  return grad;
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

bool FirstStepBox::feasible() const {
  if (lb > ub) return false;
  if (row.squaredNorm() > 0.0) return true;
  return -offset >= lb && -offset <= ub;
}

Vec FirstStepBox::project(const Vec& w) const {
  const double aa = row.squaredNorm();
  if (aa <= 0.0) return w;
  const double s = value(w);
  if (s > ub) return w - ((s - ub) / aa) * row;
  if (s < lb) return w + ((lb - s) / aa) * row;
  return w;
}

SolveResult solve(const OptProblem& p) {
  const auto started = std::chrono::steady_clock::now();
  if (!p.objective) throw std::invalid_argument("solve: objective is empty");
  if (p.initial.size() == 0 || !p.initial.allFinite()) throw std::invalid_argument("solve: initial point must be finite");
  if (!(p.tol > 0.0) || !(p.ctol > 0.0)) throw std::invalid_argument("solve: tolerances must be positive");
  if (p.box && p.box->row.size() != p.initial.size()) throw std::invalid_argument("solve: box row has wrong size");
  for (const auto& b : p.bounds) {
    if (b.row.size() != p.initial.size()) throw std::invalid_argument("solve: bound row has wrong size");
  }

  SolveResult r;
  r.w_star = p.initial;
  r.violations.assign(p.inequalities.size(), 0.0);
  r.multipliers = Vec::Zero(Eigen::Index(p.inequalities.size()));
  auto finish = [&] {
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return r;
  };
  if ((p.box && !p.box->feasible()) || !bounds_consistent(p.bounds)) {
    r.status = SolveStatus::infeasible;
    return finish();
  }

  const SlabSet slabs(p);
  Lagrangian lag(p);
  lag.rho = p.rho0;
  Vec w = slabs.project(p.initial);
  // Slabs whose intersection is empty leave the projection outside one of them.
  const double slab_gap = slabs.violation(w);

  // Best iterate so far: feasible points first, then lower objective.
  Vec best_w = w;
  double best_f = std::numeric_limits<double>::infinity();
  double best_viol = std::numeric_limits<double>::infinity();
  double best_rov = 0.0;
  auto consider = [&](const Vec& x, double f, double viol, double rov) {
    const bool better = (viol <= p.ctol && best_viol > p.ctol) ||
                        ((viol <= p.ctol) == (best_viol <= p.ctol) &&
                         (viol <= p.ctol ? f < best_f : viol < best_viol));
    if (better) {
      best_w = x;
      best_f = f;
      best_viol = viol;
      best_rov = rov;
    }
  };

  try {
    double prev_viol = max_violation(lag.constraints(w));
    consider(w, lag.objective(w), prev_viol, 0.0);
    double step = 1.0;
    for (int outer = 1; outer <= p.max_outer; ++outer) {
      r.outer_iterations = outer;
      double value = lag.value(w);
      Vec grad = lag.gradient(w);
      Vec pgrad = slabs.gradient_map(w, grad);
      Vec prev_w, prev_grad;
      for (int inner = 0; inner < p.max_inner && pgrad.norm() > p.tol; ++inner) {
        // Barzilai-Borwein trial step, then Armijo backtracking along the projected path.
        if (prev_w.size()) {
          const Vec s = w - prev_w;
          const Vec y = grad - prev_grad;
          const double sy = s.dot(y);
          if (sy > 1e-16) step = std::clamp(s.squaredNorm() / sy, 1e-8, 1e4);
        }
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
          Vec cand = slabs.project(w - step * grad);
          const double cand_value = lag.value(cand);
          if (cand_value <= value - 1e-4 * grad.dot(w - cand)) {
            prev_w = w;
            prev_grad = grad;
            w = std::move(cand);
            value = cand_value;
            accepted = true;
            break;
          }
          step *= 0.5;
        }
        ++r.inner_iterations;
        if (!accepted) break;
        grad = lag.gradient(w);
        pgrad = slabs.gradient_map(w, grad);
      }

      const Vec g = lag.constraints(w);
      const double viol = max_violation(g);
      const double f = lag.objective(w);
      const double rov = pgrad.norm();
      lag.update_multipliers(g);
      consider(w, f, viol, rov);
      if (p.record_trace) r.trace.push_back({outer, r.inner_iterations, f, viol, rov});
      if (rov <= p.tol && viol <= p.ctol) {
        best_w = w;
        best_f = f;
        best_viol = viol;
        best_rov = rov;
        r.status = SolveStatus::converged;
        break;
      }
      if (viol > 0.25 * prev_viol) lag.rho = std::min(lag.rho * 10.0, p.rho_max);
      prev_viol = viol;
    }
  } catch (const BudgetExhausted&) {
    r.status = SolveStatus::max_iter;
  }

  r.w_star = best_w;
  r.rov = best_rov;
  r.evaluations = lag.evaluations();
  if (r.status != SolveStatus::converged) {
    lag.unmeter();
    r.rov = slabs.gradient_map(best_w, lag.gradient(best_w)).norm();
  }
  if (slab_gap > p.ctol) r.status = SolveStatus::infeasible;
  r.multipliers = lag.multipliers();
  r.objective = p.objective(best_w);
  for (std::size_t k = 0; k < p.inequalities.size(); ++k) r.violations[k] = std::max(0.0, p.inequalities[k](best_w));
  r.max_violation = r.violations.empty() ? 0.0 : *std::max_element(r.violations.begin(), r.violations.end());
  return finish();
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "outer,inner,f,violation,grad_norm\n";
  out.precision(17);
  for (const auto& t : trace) {
    out << t.outer << ',' << t.inner << ',' << t.f << ',' << t.violation << ',' << t.grad_norm << '\n';
  }
}

GridResult grid_oracle(const OptProblem& p, double lo, double hi, int resolution) {
  const Eigen::Index n = p.initial.size();
  if (n < 1 || n > 3) throw std::invalid_argument("grid_oracle: dimension must be 1..3");
  if (resolution < 2 || !(hi > lo)) throw std::invalid_argument("grid_oracle: need resolution >= 2 and hi > lo");

  GridResult out;
  std::vector<int> idx(std::size_t(n), 0);
  Vec w(n);
  const double cell = (hi - lo) / double(resolution - 1);
  while (true) {
    for (Eigen::Index j = 0; j < n; ++j) w(j) = lo + cell * idx[std::size_t(j)];
    ++out.evaluated;
    bool ok = true;
    if (p.box) {
      const double s = p.box->value(w);
      ok = s >= p.box->lb - p.ctol && s <= p.box->ub + p.ctol;
    }
    for (std::size_t k = 0; ok && k < p.bounds.size(); ++k) {
      const double s = p.bounds[k].row.dot(w);
      ok = s >= p.bounds[k].lb - p.ctol && s <= p.bounds[k].ub + p.ctol;
    }
    for (std::size_t k = 0; ok && k < p.inequalities.size(); ++k) ok = p.inequalities[k](w) <= p.ctol;
    if (ok) {
      ++out.feasible;
      const double v = p.objective(w);
      if (!out.found || v < out.value) {
        out.found = true;
        out.value = v;
        out.w = w;
      }
    }
    std::size_t d = 0;
    while (d < idx.size() && ++idx[d] == resolution) idx[d++] = 0;
    if (d == idx.size()) break;
  }
  out.report = out.found ? "feasible minimum found" : "no feasible grid point among " + std::to_string(out.evaluated);
  return out;
}

}  // namespace slipctl
