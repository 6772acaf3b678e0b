#include "wfmpc/qp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace wfmpc {

void QpProblem::validate() const {
  const auto n = hessian.rows();
  if (hessian.cols() != n) throw std::invalid_argument("qp: H not square");
  if (gradient.size() != n) throw std::invalid_argument("qp: g size mismatch");
  if (ineq_matrix.rows() != ineq_bound.size()) {
    throw std::invalid_argument("qp: G/h row mismatch");
  }
  if (ineq_matrix.rows() > 0 && ineq_matrix.cols() != n) {
    throw std::invalid_argument("qp: G column mismatch");
  }
  const double scale = std::max(1.0, hessian.cwiseAbs().maxCoeff());
  if ((hessian - hessian.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("qp: H not symmetric");
  }
}

void QpProblem::append_box(const Eigen::VectorXd& lower,
                           const Eigen::VectorXd& upper) {
  const auto n = num_vars();
  if (lower.size() != n || upper.size() != n) {
    throw std::invalid_argument("qp: box size mismatch");
  }
  const auto m0 = ineq_matrix.rows();
  Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(m0 + 2 * n, n);
  Eigen::VectorXd bound(m0 + 2 * n);
  if (m0 > 0) {
    mat.topRows(m0) = ineq_matrix;
    bound.head(m0) = ineq_bound;
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    mat(m0 + k, k) = 1.0;
    bound(m0 + k) = upper(k);
    mat(m0 + n + k, k) = -1.0;
    bound(m0 + n + k) = -lower(k);
  }
  ineq_matrix = std::move(mat);
  ineq_bound = std::move(bound);
}

double QpResiduals::max() const {
  return std::max(std::max(stationarity, primal),
                  std::max(dual, complementarity));
}

namespace {

// Row-compressed view of the constraint matrix. The closed-loop problems
// carry one or two nonzeros per row (box and rate constraints), so every
// product goes through this structure; it also fixes the summation order so
// reported residuals are recomputable bit for bit.
struct SparseRows {
  std::vector<std::vector<std::pair<Eigen::Index, double>>> rows;
  Eigen::Index cols = 0;

  static SparseRows from(const Eigen::MatrixXd& g) {
    SparseRows s;
    s.cols = g.cols();
    s.rows.resize(static_cast<std::size_t>(g.rows()));
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      auto& row = s.rows[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < g.cols(); ++c) {
        if (g(r, c) != 0.0) row.emplace_back(c, g(r, c));
      }
    }
    return s;
  }

  Eigen::Index row_count() const {
    return static_cast<Eigen::Index>(rows.size());
  }

  void multiply(const Eigen::VectorXd& x, Eigen::VectorXd* out) const {
    out->resize(row_count());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double acc = 0.0;
      for (const auto& [c, v] : rows[r]) acc += v * x(c);
      (*out)(static_cast<Eigen::Index>(r)) = acc;
    }
  }

  void add_multiply_transpose(const Eigen::VectorXd& y,
                              Eigen::VectorXd* out) const {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double yr = y(static_cast<Eigen::Index>(r));
      if (yr == 0.0) continue;
      for (const auto& [c, v] : rows[r]) (*out)(c) += v * yr;
    }
  }

  Eigen::MatrixXd gram() const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(cols, cols);
    for (const auto& row : rows) {
      for (const auto& [c1, v1] : row) {
        for (const auto& [c2, v2] : row) g(c1, c2) += v1 * v2;
      }
    }
    return g;
  }
};

QpResiduals residuals_impl(const QpProblem& problem, const SparseRows& sparse,
                           const Eigen::VectorXd& x,
                           const Eigen::VectorXd& duals) {
  QpResiduals res;
  Eigen::VectorXd stat = problem.hessian * x + problem.gradient;
  if (sparse.row_count() > 0) {
    sparse.add_multiply_transpose(duals, &stat);
    Eigen::VectorXd slack;
    sparse.multiply(x, &slack);
    slack -= problem.ineq_bound;
    res.primal = slack.cwiseMax(0.0).lpNorm<Eigen::Infinity>();
    res.dual = (-duals).cwiseMax(0.0).lpNorm<Eigen::Infinity>();
    res.complementarity =
        duals.cwiseProduct(slack).cwiseAbs().lpNorm<Eigen::Infinity>();
  }
  res.stationarity = stat.lpNorm<Eigen::Infinity>();
  return res;
}

}  // namespace

QpResiduals kkt_residuals(const QpProblem& problem, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& duals) {
  if (x.size() != problem.num_vars() ||
      duals.size() != problem.num_constraints()) {
    throw std::invalid_argument("kkt_residuals: dimension mismatch");
  }
  return residuals_impl(problem, SparseRows::from(problem.ineq_matrix), x,
                        duals);
}

double qp_objective(const QpProblem& problem, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(problem.hessian * x) + problem.gradient.dot(x);
}

namespace {

// Equality-constrained solve on the active rows with tiny regularization and
// iterative refinement against the unregularized KKT system.
bool polish_candidate(const QpProblem& problem,
                      const std::vector<Eigen::Index>& active,
                      Eigen::VectorXd* x_out, Eigen::VectorXd* duals_out) {
  const auto n = problem.num_vars();
  const auto na = static_cast<Eigen::Index>(active.size());
  const Eigen::Index dim = n + na;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
  kkt.topLeftCorner(n, n) = problem.hessian;
  for (Eigen::Index a = 0; a < na; ++a) {
    kkt.block(n + a, 0, 1, n) = problem.ineq_matrix.row(active[a]);
    kkt.block(0, n + a, n, 1) = problem.ineq_matrix.row(active[a]).transpose();
  }
  Eigen::VectorXd rhs(dim);
  rhs.head(n) = -problem.gradient;
  for (Eigen::Index a = 0; a < na; ++a) {
    rhs(n + a) = problem.ineq_bound(active[a]);
  }

  const double delta =
      1e-9 * std::max(1.0, problem.hessian.cwiseAbs().maxCoeff());
  Eigen::MatrixXd kkt_reg = kkt;
  kkt_reg.topLeftCorner(n, n).diagonal().array() += delta;
  kkt_reg.bottomRightCorner(na, na).diagonal().array() -= delta;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(kkt_reg);
  if (ldlt.info() != Eigen::Success) return false;
  Eigen::VectorXd sol = ldlt.solve(rhs);
  for (int refine = 0; refine < 3; ++refine) {
    const Eigen::VectorXd resid = rhs - kkt * sol;
    sol += ldlt.solve(resid);
  }
  if (!sol.allFinite()) return false;

  *x_out = sol.head(n);
  duals_out->setZero(problem.num_constraints());
  for (Eigen::Index a = 0; a < na; ++a) {
    (*duals_out)(active[a]) = sol(n + a);
  }
  return true;
}

// Identifies the active set from the ADMM iterate and refines it with a
// single-exchange discipline: drop the most negative multiplier, otherwise
// add the most violated row. Every pass produces a candidate and the best
// one (by worst residual) is adopted; mass add/drop cycles and candidates
// built from mutually inconsistent rows are avoided this way.
void polish(const QpProblem& problem, const SparseRows& sparse,
            const QpSettings& settings, int max_passes, QpSolution* best) {
  const auto m = problem.num_constraints();
  const auto n = problem.num_vars();
  if (m == 0) return;

  const double refine_tol = std::max(settings.tol, 1e-8);

  // The splitting step leaves a strictly positive multiplier exactly on the
  // rows its projection clamped, which is the natural active-set seed. Cap
  // at n rows (a vertex cannot bind more), keeping the largest multipliers.
  std::vector<bool> in_set(static_cast<std::size_t>(m), false);
  std::vector<Eigen::Index> active;
  for (Eigen::Index r = 0; r < m; ++r) {
    if (best->duals(r) > 0.0) active.push_back(r);
  }
  if (static_cast<Eigen::Index>(active.size()) > n) {
    std::sort(active.begin(), active.end(),
              [&](Eigen::Index a, Eigen::Index b) {
                return best->duals(a) > best->duals(b);
              });
    active.resize(static_cast<std::size_t>(n));
    std::sort(active.begin(), active.end());
  }
  for (Eigen::Index r : active) in_set[static_cast<std::size_t>(r)] = true;

  // Rows that are exact negatives describe an empty equality pair; never
  // hold both active at once.
  const auto opposes = [&](Eigen::Index a, Eigen::Index b) {
    return (problem.ineq_matrix.row(a) + problem.ineq_matrix.row(b))
               .cwiseAbs()
               .maxCoeff() == 0.0;
  };
  {
    std::vector<Eigen::Index> filtered;
    for (Eigen::Index r : active) {
      bool conflict = false;
      for (Eigen::Index kept : filtered) {
        if (opposes(kept, r)) conflict = true;
      }
      if (conflict) {
        in_set[static_cast<std::size_t>(r)] = false;
      } else {
        filtered.push_back(r);
      }
    }
    active.swap(filtered);
  }

  for (int pass = 0; pass < max_passes; ++pass) {
    Eigen::VectorXd x, duals;
    if (!polish_candidate(problem, active, &x, &duals)) return;

    const Eigen::VectorXd clamped = duals.cwiseMax(0.0);
    const QpResiduals res = residuals_impl(problem, sparse, x, clamped);
    if (res.max() < best->residuals.max()) {
      best->x = x;
      best->duals = clamped;
      best->residuals = res;
      best->polished = true;
    }
    if (res.within(settings.tol)) return;

    // Drop the worst wrongly-assumed-active row first.
    Eigen::Index drop = -1;
    double most_negative = -refine_tol;
    for (std::size_t a = 0; a < active.size(); ++a) {
      if (duals(active[a]) < most_negative) {
        most_negative = duals(active[a]);
        drop = static_cast<Eigen::Index>(a);
      }
    }
    if (drop >= 0) {
      in_set[static_cast<std::size_t>(active[static_cast<std::size_t>(drop)])] =
          false;
      active.erase(active.begin() + drop);
      continue;
    }

    // Otherwise bring in the most violated row.
    Eigen::VectorXd new_slack;
    sparse.multiply(x, &new_slack);
    new_slack -= problem.ineq_bound;
    Eigen::Index add = -1;
    double worst = refine_tol;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (in_set[static_cast<std::size_t>(r)]) continue;
      if (new_slack(r) > worst) {
        bool conflict = false;
        for (Eigen::Index a : active) {
          if (opposes(a, r)) conflict = true;
        }
        if (conflict) continue;
        worst = new_slack(r);
        add = r;
      }
    }
    if (add < 0) return;  // stable set
    active.push_back(add);
    in_set[static_cast<std::size_t>(add)] = true;
  }
}

}  // namespace

QpSolution solve(const QpProblem& problem, const QpSettings& settings,
                 const QpWarmStart* warm) {
  problem.validate();
  if (settings.tol <= 0.0) {
    throw std::invalid_argument("qp: tol must be positive");
  }
  const auto n = problem.num_vars();
  const auto m = problem.num_constraints();

  QpSolution out;
  if (m == 0) {
    // Unconstrained: a single regularized solve with refinement.
    Eigen::MatrixXd reg = problem.hessian;
    reg.diagonal().array() += settings.sigma;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
    Eigen::VectorXd x = ldlt.solve(-problem.gradient);
    for (int refine = 0; refine < 5; ++refine) {
      x += ldlt.solve(-(problem.hessian * x + problem.gradient));
    }
    out.x = x;
    out.duals.resize(0);
    out.iterations = 1;
    out.residuals = kkt_residuals(problem, out.x, out.duals);
    out.status = out.residuals.within(settings.tol) ? QpStatus::kSolved
                                                    : QpStatus::kMaxIterations;
    out.objective = qp_objective(problem, out.x);
    return out;
  }

  const SparseRows sparse = SparseRows::from(problem.ineq_matrix);
  const Eigen::MatrixXd gram = sparse.gram();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);  // duals, kept >= 0
  if (warm != nullptr) {
    if (warm->x.size() == n) x = warm->x;
    if (warm->duals.size() == m) y = warm->duals.cwiseMax(0.0);
  }
  Eigen::VectorXd z;
  sparse.multiply(x, &z);
  z = z.cwiseMin(problem.ineq_bound);

  double rho = settings.rho;
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  const auto refactor = [&]() {
    Eigen::MatrixXd kkt = problem.hessian + rho * gram;
    kkt.diagonal().array() += settings.sigma;
    ldlt.compute(kkt);
  };
  refactor();

  out.status = QpStatus::kMaxIterations;
  out.x = x;
  out.duals = y;
  out.residuals = residuals_impl(problem, sparse, x, y);
  double best_max = out.residuals.max();

  Eigen::VectorXd rhs(n), x_tilde(n), gx_tilde(m), v(m);
  // Attempt the active-set polish before the iteration budget runs out;
  // transient steps where the splitting iteration crawls are usually one
  // exact equality solve away once the clamped rows are known.
  int next_polish = std::min(500, settings.max_iter);
  int iter = 0;
  for (; iter < settings.max_iter; ++iter) {
    rhs = settings.sigma * x - problem.gradient;
    {
      Eigen::VectorXd scaled = rho * z - y;
      sparse.add_multiply_transpose(scaled, &rhs);
    }
    x_tilde = ldlt.solve(rhs);
    sparse.multiply(x_tilde, &gx_tilde);

    x = settings.alpha * x_tilde + (1.0 - settings.alpha) * x;
    v = settings.alpha * gx_tilde + (1.0 - settings.alpha) * z + y / rho;
    z = v.cwiseMin(problem.ineq_bound);
    y = rho * (v - z);

    if ((iter + 1) % settings.check_interval == 0 ||
        iter + 1 == settings.max_iter) {
      const QpResiduals res = residuals_impl(problem, sparse, x, y);
      if (res.max() < best_max) {
        best_max = res.max();
        out.x = x;
        out.duals = y;
        out.residuals = res;
      }
      if (res.within(settings.tol)) {
        out.status = QpStatus::kSolved;
        out.x = x;
        out.duals = y;
        out.residuals = res;
        ++iter;
        break;
      }
      if (y.lpNorm<Eigen::Infinity>() > settings.infeasible_dual_norm) {
        out.status = QpStatus::kInfeasible;
        out.x = x;
        out.duals = y;
        out.residuals = res;
        ++iter;
        break;
      }
      if (settings.polish && iter + 1 >= next_polish) {
        next_polish *= 2;
        polish(problem, sparse, settings, 20, &out);
        best_max = out.residuals.max();
        if (out.residuals.within(settings.tol)) {
          out.status = QpStatus::kSolved;
          ++iter;
          break;
        }
      }
      if (settings.adaptive_rho) {
        // Balance the splitting gap against the stationarity residual.
        Eigen::VectorXd gx;
        sparse.multiply(x, &gx);
        const double primal_gap = (gx - z).lpNorm<Eigen::Infinity>();
        const double dual_gap = res.stationarity;
        if (primal_gap > 1e-18 && dual_gap > 1e-18) {
          const double ratio = std::sqrt(primal_gap / dual_gap);
          if (ratio > 5.0 || ratio < 0.2) {
            rho = std::clamp(rho * ratio, 1e-6, 1e6);
            refactor();
          }
        }
      }
    }
  }
  out.iterations = iter;

  if (settings.polish && out.status != QpStatus::kInfeasible) {
    polish(problem, sparse, settings, 60, &out);
  }
  if (out.status != QpStatus::kInfeasible &&
      out.residuals.within(settings.tol)) {
    out.status = QpStatus::kSolved;
  }
  out.objective = qp_objective(problem, out.x);
  return out;
}

void save_problem(const std::filesystem::path& path, const QpProblem& problem) {
  problem.validate();
  std::ofstream outf(path);
  if (!outf) throw std::runtime_error("qp: cannot write " + path.string());
  outf.precision(17);
  const auto n = problem.num_vars();
  const auto m = problem.num_constraints();
  outf << n << ' ' << m << '\n';
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      outf << problem.hessian(r, c) << (c + 1 == n ? '\n' : ' ');
    }
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    outf << problem.gradient(r) << (r + 1 == n ? '\n' : ' ');
  }
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      outf << problem.ineq_matrix(r, c) << (c + 1 == n ? '\n' : ' ');
    }
  }
  for (Eigen::Index r = 0; r < m; ++r) {
    outf << problem.ineq_bound(r) << (r + 1 == m ? '\n' : ' ');
  }
  if (!outf) throw std::runtime_error("qp: write failed for " + path.string());
}

QpProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("qp: cannot open " + path.string());
  Eigen::Index n = 0, m = 0;
  in >> n >> m;
  if (!in || n <= 0 || m < 0) {
    throw std::runtime_error("qp: bad dimension header in " + path.string());
  }
  QpProblem problem;
  problem.hessian.resize(n, n);
  problem.gradient.resize(n);
  problem.ineq_matrix.resize(m, n);
  problem.ineq_bound.resize(m);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) in >> problem.hessian(r, c);
  }
  for (Eigen::Index r = 0; r < n; ++r) in >> problem.gradient(r);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) in >> problem.ineq_matrix(r, c);
  }
  for (Eigen::Index r = 0; r < m; ++r) in >> problem.ineq_bound(r);
  if (!in) throw std::runtime_error("qp: truncated file " + path.string());
  problem.validate();
  return problem;
}

}  // namespace wfmpc
