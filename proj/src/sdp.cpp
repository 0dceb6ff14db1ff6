#include "bearsync/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "bearsync/errors.hpp"

namespace bearsync {

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "Optimal";
    case SdpStatus::MaxIterations: return "MaxIterations";
    case SdpStatus::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Symmetric vectorization with sqrt(2) off-diagonal weights so that
// dot(svec(A), svec(B)) == <A, B>.
VectorXd svec(const MatrixXd& a) {
  const Eigen::Index n = a.rows();
  VectorXd v(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) v(k++) = i == j ? a(i, j) : std::sqrt(2.0) * a(i, j);
  }
  return v;
}

double inner(const MatrixXd& a, const MatrixXd& b) { return a.cwiseProduct(b).sum(); }

MatrixXd sym(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

// Largest alpha with m + alpha * d still psd (infinity when unbounded).
double max_step(const MatrixXd& m, const MatrixXd& d) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return 0.0;
  const MatrixXd linv_d = llt.matrixL().solve(d);
  const MatrixXd w = llt.matrixL().solve(linv_d.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(w), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

struct ReducedSystem {
  std::vector<std::size_t> kept;   // indices into the input constraints
  std::vector<MatrixXd> a;         // normalized constraint matrices
  VectorXd b;                      // normalized right-hand sides
  VectorXd row_scale;              // ||Q_i||_F of each kept constraint
  bool consistent = true;
  std::string reason;
};

ReducedSystem reduce_constraints(const SdpProblem& p) {
  ReducedSystem out;
  const std::size_t m = p.constraints.size();
  const Eigen::Index n = p.dim();
  MatrixXd v(n * (n + 1) / 2, static_cast<Eigen::Index>(m));
  VectorXd g(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const double norm = p.constraints[i].Q.norm();
    if (!(norm > 0.0)) {
      if (std::abs(p.constraints[i].g) > 0.0) {
        out.consistent = false;
        out.reason = "zero constraint matrix with nonzero right-hand side: " + p.constraints[i].label;
      }
      v.col(static_cast<Eigen::Index>(i)).setZero();
      g(static_cast<Eigen::Index>(i)) = 0.0;
      continue;
    }
    v.col(static_cast<Eigen::Index>(i)) = svec(p.constraints[i].Q) / norm;
    g(static_cast<Eigen::Index>(i)) = p.constraints[i].g / norm;
  }
  if (!out.consistent) return out;

  Eigen::ColPivHouseholderQR<MatrixXd> qr(v);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  std::vector<std::size_t> indep;
  for (Eigen::Index i = 0; i < rank; ++i) {
    indep.push_back(static_cast<std::size_t>(qr.colsPermutation().indices()(i)));
  }
  std::sort(indep.begin(), indep.end());

  MatrixXd vi(v.rows(), rank);
  VectorXd gi(rank);
  for (Eigen::Index i = 0; i < rank; ++i) {
    vi.col(i) = v.col(static_cast<Eigen::Index>(indep[static_cast<std::size_t>(i)]));
    gi(i) = g(static_cast<Eigen::Index>(indep[static_cast<std::size_t>(i)]));
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qri(vi);
  for (std::size_t j = 0; j < m; ++j) {
    if (std::binary_search(indep.begin(), indep.end(), j)) continue;
    const VectorXd c = qri.solve(v.col(static_cast<Eigen::Index>(j)));
    const double predicted = c.dot(gi);
    const double gj = g(static_cast<Eigen::Index>(j));
    if (std::abs(predicted - gj) > 1e-9 * (1.0 + std::abs(gj) + c.cwiseAbs().dot(gi.cwiseAbs()))) {
      out.consistent = false;
      out.reason = "constraint '" + p.constraints[j].label +
                   "' is a linear combination of others with a different right-hand side";
      return out;
    }
  }

  out.kept = indep;
  out.b.resize(rank);
  out.row_scale.resize(rank);
  for (Eigen::Index i = 0; i < rank; ++i) {
    const auto& c = p.constraints[indep[static_cast<std::size_t>(i)]];
    const double norm = c.Q.norm();
    out.a.push_back(sym(c.Q) / norm);
    out.b(i) = c.g / norm;
    out.row_scale(i) = norm;
  }
  return out;
}

VectorXd apply_op(const std::vector<MatrixXd>& a, const MatrixXd& x) {
  VectorXd r(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) r(static_cast<Eigen::Index>(i)) = inner(a[i], x);
  return r;
}

MatrixXd apply_adjoint(const std::vector<MatrixXd>& a, const VectorXd& y, Eigen::Index n) {
  MatrixXd r = MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < a.size(); ++i) r += y(static_cast<Eigen::Index>(i)) * a[i];
  return r;
}

// max_i |<Q_i, X> - g_i| over the constraints as given, duplicates included.
double raw_residual(const SdpProblem& p, const MatrixXd& x) {
  double worst = 0.0;
  for (const auto& c : p.constraints) worst = std::max(worst, std::abs(inner(c.Q, x) - c.g));
  return worst;
}

void finalize(const SdpProblem& p, SdpSolution& s) {
  s.Z = sym(s.Z);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s.Z);
  const Eigen::Index n = s.Z.rows();
  s.eigenvalues = es.eigenvalues().reverse();
  s.eigenvectors = es.eigenvectors().rowwise().reverse();
  (void)n;
  s.primal_objective = inner(p.cost, s.Z);
  s.max_constraint_residual = raw_residual(p, s.Z);
}

}  // namespace

SdpSolution InteriorPointSolver::solve(const SdpProblem& p, const SdpOptions& opt) const {
  const Eigen::Index n = p.dim();
  if (n < 1 || p.cost.cols() != n) throw Error(ErrorKind::InvalidConfig, "cost must be square");
  if (p.constraints.empty()) throw Error(ErrorKind::InvalidConfig, "SDP needs at least one constraint");
  for (const auto& c : p.constraints) {
    if (c.Q.rows() != n || c.Q.cols() != n) {
      throw Error(ErrorKind::InvalidConfig, "constraint '" + c.label + "' has wrong dimension");
    }
  }

  SdpSolution sol;
  sol.multipliers = VectorXd::Zero(static_cast<Eigen::Index>(p.constraints.size()));
  ReducedSystem rs = reduce_constraints(p);
  if (!rs.consistent) {
    sol.status = SdpStatus::Infeasible;
    sol.Z = MatrixXd::Zero(n, n);
    finalize(p, sol);
    sol.dual_objective = std::numeric_limits<double>::infinity();
    sol.gap = std::numeric_limits<double>::infinity();
    return sol;
  }
  sol.independent_constraints = rs.kept.size();
  const auto m = static_cast<Eigen::Index>(rs.kept.size());

  const double cost_norm = p.cost.norm();
  const double cost_scale = cost_norm > 0.0 ? cost_norm : 1.0;
  const MatrixXd c = sym(p.cost) / cost_scale;
  const auto& a = rs.a;
  const VectorXd& b = rs.b;
  const double b_norm = b.norm();

  const double dn = static_cast<double>(n);
  const double x0 = std::max({10.0, std::sqrt(dn), dn * (1.0 + b.cwiseAbs().maxCoeff()) / 2.0});
  const double s0 = std::max({10.0, std::sqrt(dn), 1.0 + c.norm()});
  MatrixXd x = x0 * MatrixXd::Identity(n, n);
  MatrixXd s = s0 * MatrixXd::Identity(n, n);
  VectorXd y = VectorXd::Zero(m);

  double best_pinf = std::numeric_limits<double>::infinity();
  int best_pinf_iter = 0;
  sol.status = SdpStatus::MaxIterations;

  int iter = 0;
  for (;; ++iter) {
    const VectorXd rp = b - apply_op(a, x);
    const MatrixXd rd = c - apply_adjoint(a, y, n) - s;
    const double mu = inner(x, s) / dn;
    const double pobj = inner(c, x);
    const double dobj = b.dot(y);
    const double relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double pinf = rp.norm() / (1.0 + b_norm);
    const double dinf = rd.norm() / (1.0 + 1.0);
    if (opt.record_history) {
      sol.history.push_back({pobj * cost_scale, dobj * cost_scale, pinf, dinf, mu});
    }
    if (relgap <= opt.gap_tol && pinf <= opt.feas_tol && dinf <= opt.feas_tol &&
        raw_residual(p, x) <= opt.feas_tol) {
      sol.status = SdpStatus::Optimal;
      sol.gap = relgap;
      break;
    }
    // Certificates of infeasibility: an unbounded dual ray or a primal
    // residual that stops shrinking while the iterates keep moving.
    if (dinf < 1e-6 && dobj > 1e8) {
      sol.status = SdpStatus::Infeasible;
      sol.gap = relgap;
      break;
    }
    if (pinf < 0.9 * best_pinf) {
      best_pinf = pinf;
      best_pinf_iter = iter;
    } else if (iter - best_pinf_iter > 20 && pinf > 1e3 * opt.feas_tol) {
      sol.status = SdpStatus::Infeasible;
      sol.gap = relgap;
      break;
    }
    if (iter >= opt.max_iters) {
      sol.gap = relgap;
      break;
    }

    Eigen::LLT<MatrixXd> s_llt(s);
    if (s_llt.info() != Eigen::Success) {
      sol.gap = relgap;
      break;
    }
    const MatrixXd s_inv = s_llt.solve(MatrixXd::Identity(n, n));

    // Schur complement M_ij = <A_i, X A_j S^-1>.
    std::vector<MatrixXd> xas(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) xas[static_cast<std::size_t>(j)] = x * a[static_cast<std::size_t>(j)] * s_inv;
    MatrixXd schur(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = i; j < m; ++j) {
        const double v = 0.5 * (inner(a[static_cast<std::size_t>(i)], xas[static_cast<std::size_t>(j)]) +
                                inner(a[static_cast<std::size_t>(j)], xas[static_cast<std::size_t>(i)]));
        schur(i, j) = v;
        schur(j, i) = v;
      }
    }
    Eigen::LLT<MatrixXd> m_llt(schur);
    if (m_llt.info() != Eigen::Success) {
      schur.diagonal().array() += 1e-14 * schur.diagonal().cwiseAbs().maxCoeff();
      m_llt.compute(schur);
      if (m_llt.info() != Eigen::Success) {
        sol.gap = relgap;
        break;
      }
    }
    const MatrixXd xrd_sinv = x * rd * s_inv;
    const MatrixXd xs = x * s;

    auto direction = [&](const MatrixXd& rc, MatrixXd& dx, VectorXd& dy, MatrixXd& ds) {
      const VectorXd rhs = rp - apply_op(a, (rc * s_inv) - xrd_sinv);
      dy = m_llt.solve(rhs);
      ds = sym(rd - apply_adjoint(a, dy, n));
      dx = sym((rc - x * ds) * s_inv);
    };

    MatrixXd dx_aff, ds_aff;
    VectorXd dy_aff;
    direction(-xs, dx_aff, dy_aff, ds_aff);
    const double ap_aff = std::min(1.0, max_step(x, dx_aff));
    const double ad_aff = std::min(1.0, max_step(s, ds_aff));
    const double mu_aff = inner(x + ap_aff * dx_aff, s + ad_aff * ds_aff) / dn;
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    const MatrixXd rc = sigma * mu * MatrixXd::Identity(n, n) - xs - dx_aff * ds_aff;
    MatrixXd dx, ds;
    VectorXd dy;
    direction(rc, dx, dy, ds);
    const double ap = std::min(1.0, opt.step_fraction * max_step(x, dx));
    const double ad = std::min(1.0, opt.step_fraction * max_step(s, ds));
    if (!(ap > 0.0) && !(ad > 0.0)) {
      sol.gap = relgap;
      break;
    }
    x = sym(x + ap * dx);
    y = y + ad * dy;
    s = sym(s + ad * ds);
  }

  sol.iterations = iter;
  sol.Z = x;
  for (Eigen::Index i = 0; i < m; ++i) {
    sol.multipliers(static_cast<Eigen::Index>(rs.kept[static_cast<std::size_t>(i)])) =
        y(i) * cost_scale / rs.row_scale(i);
  }
  sol.dual_objective = b.dot(y) * cost_scale;
  finalize(p, sol);
  return sol;
}

SdpSolution solve(const SdpProblem& problem, const SdpOptions& options) {
  return InteriorPointSolver{}.solve(problem, options);
}

double tightness(const Eigen::MatrixXd& Z) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(Z), Eigen::EigenvaluesOnly);
  const Eigen::Index n = Z.rows();
  if (n < 2) return 0.0;
  const double l1 = es.eigenvalues()(n - 1);
  const double l2 = std::max(0.0, es.eigenvalues()(n - 2));
  if (!(l1 > 0.0)) return 1.0;
  return std::clamp(l2 / l1, 0.0, 1.0);
}

double tightness(const SdpSolution& solution) {
  const auto& ev = solution.eigenvalues;
  if (ev.size() < 2) return 0.0;
  if (!(ev(0) > 0.0)) return 1.0;
  return std::clamp(std::max(0.0, ev(1)) / ev(0), 0.0, 1.0);
}

Eigen::VectorXd extract_rank1(const Eigen::MatrixXd& Z, Eigen::Index sign_index) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(Z));
  const Eigen::Index n = Z.rows();
  const double l1 = es.eigenvalues()(n - 1);
  if (!(l1 >= 1e-12)) throw Error(ErrorKind::ZeroSolution, "leading eigenvalue below 1e-12");
  VectorXd z = std::sqrt(l1) * es.eigenvectors().col(n - 1);
  if (z(sign_index) < 0.0) z = -z;
  return z;
}

Eigen::VectorXd extract_rank1(const SdpSolution& solution, Eigen::Index sign_index) {
  if (solution.eigenvalues.size() == 0) return extract_rank1(solution.Z, sign_index);
  const double l1 = solution.eigenvalues(0);
  if (!(l1 >= 1e-12)) throw Error(ErrorKind::ZeroSolution, "leading eigenvalue below 1e-12");
  VectorXd z = std::sqrt(l1) * solution.eigenvectors.col(0);
  if (z(sign_index) < 0.0) z = -z;
  return z;
}

void write_sdp_text(std::ostream& os, const SdpProblem& problem) {
  const Eigen::Index n = problem.dim();
  os << "sdp " << n << ' ' << problem.constraints.size() << '\n';
  os.precision(17);
  auto dump = [&](const MatrixXd& m) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) os << (j ? " " : "") << m(i, j);
      os << '\n';
    }
  };
  dump(problem.cost);
  for (const auto& c : problem.constraints) {
    os << "constraint " << c.label << ' ' << c.g << '\n';
    dump(c.Q);
  }
}

SdpProblem read_sdp_text(std::istream& is) {
  std::string tag;
  Eigen::Index n = 0;
  std::size_t count = 0;
  if (!(is >> tag >> n >> count) || tag != "sdp" || n < 1) {
    throw Error(ErrorKind::Parse, "bad sdp header");
  }
  auto read_matrix = [&]() {
    MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!(is >> m(i, j))) throw Error(ErrorKind::Parse, "truncated matrix");
      }
    }
    return m;
  };
  SdpProblem p;
  p.cost = read_matrix();
  for (std::size_t k = 0; k < count; ++k) {
    QuadraticConstraint c;
    if (!(is >> tag >> c.label >> c.g) || tag != "constraint") {
      throw Error(ErrorKind::Parse, "bad constraint header " + std::to_string(k));
    }
    c.Q = read_matrix();
    p.constraints.push_back(std::move(c));
  }
  return p;
}

}  // namespace bearsync
