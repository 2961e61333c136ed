#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <stdexcept>
#include <vector>

#include "stokes_bloch/operators.hpp"
#include "stokes_bloch/tensor.hpp"

namespace stokes_bloch {

// ---------------------------------------------------------------------------
// Directions
// ---------------------------------------------------------------------------

/// Deterministic pseudo-random unit directions (normal samples, normalized).
inline std::vector<RealVector> random_directions(int dim, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<RealVector> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    RealVector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
    const double n = v.norm();
    if (n < 1e-8) continue;
    out.push_back(v / n);
  }
  return out;
}

/// Evenly spread directions over the half circle (2D) or a Fibonacci
/// lattice on the upper hemisphere (3D).
inline std::vector<RealVector> spread_directions(int dim, int count) {
  std::vector<RealVector> out;
  if (dim == 2) {
    for (int j = 0; j < count; ++j) {
      const double t = M_PI * (j + 0.5) / count;
      RealVector v(2);
      v << std::cos(t), std::sin(t);
      out.push_back(v);
    }
  } else {
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int j = 0; j < count; ++j) {
      const double z = 1.0 - (j + 0.5) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      RealVector v(3);
      v << r * std::cos(golden * j), r * std::sin(golden * j), z;
      out.push_back(v);
    }
  }
  return out;
}

/// Orthonormal basis (as columns) of the complement of a unit vector.
inline RealMatrix orthonormal_complement(const RealVector& eta) {
  const int d = static_cast<int>(eta.size());
  RealMatrix basis(d, d - 1);
  int filled = 0;
  // Gram-Schmidt over the coordinate axes, least-aligned first.
  std::vector<int> order(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(eta[a]) < std::abs(eta[b]); });
  for (int axis : order) {
    if (filled == d - 1) break;
    RealVector v = RealVector::Unit(d, axis);
    v -= eta.dot(v) * eta;
    for (int c = 0; c < filled; ++c) v -= basis.col(c).dot(v) * basis.col(c);
    const double n = v.norm();
    if (n < 1e-8) continue;
    basis.col(filled++) = v / n;
  }
  return basis;
}

// ---------------------------------------------------------------------------
// Contraction and ellipticity
// ---------------------------------------------------------------------------

/// M(eta, A)_{kl} = A^{kl}_{ab} eta_a eta_b without symmetrization.
inline RealMatrix contract_M_raw(const Tensor4& A, const RealVector& eta) {
  const int d = A.dim();
  if (eta.size() != d) throw std::invalid_argument("direction has wrong dimension");
  RealMatrix M = RealMatrix::Zero(d, d);
  A.for_each_index([&](int k, int l, int a, int b) { M(k, l) += A(k, l, a, b) * eta[a] * eta[b]; });
  return M;
}

/**
 * Acoustic-type contraction M(eta, A)_{kl} = A^{kl}_{ab} eta_a eta_b.
 *
 * Simple symmetry of A makes M symmetric; the raw asymmetry is checked
 * against 1e-10 (relative to max|A|) and the symmetric part is returned.
 */
inline RealMatrix contract_M(const Tensor4& A, const RealVector& eta) {
  RealMatrix M = contract_M_raw(A, eta);
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, A.max_abs())) {
    throw std::invalid_argument("contraction is not symmetric; tensor lacks simple symmetry");
  }
  return 0.5 * (M + M.transpose());
}

/// Smallest eigenvalue of M(eta, A) restricted to the complement of eta.
inline double transverse_min_eigenvalue(const Tensor4& A, const RealVector& eta) {
  const RealMatrix Q = orthonormal_complement(eta);
  const RealMatrix T = Q.transpose() * contract_M(A, eta) * Q;
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(T);
  return es.eigenvalues()[0];
}

/// Legendre-Hadamard margin: min over directions of transverse_min_eigenvalue.
inline double legendre_hadamard_min(const Tensor4& A, const std::vector<RealVector>& directions) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& eta : directions) m = std::min(m, transverse_min_eigenvalue(A, eta));
  return m;
}

// ---------------------------------------------------------------------------
// Propagation relation
// ---------------------------------------------------------------------------

/**
 * @brief Second-order Bloch data for one branch along one direction.
 *
 * half_lambda2 is lambda''(0)/2 and half_q02 is q0''(0)/2; together with
 * the limit vector phi0 they pin M(eta, A) phi0.
 */
struct PropagationRecord {
  RealVector direction;
  int branch = 0;
  RealVector phi0;
  double half_lambda2 = 0.0;
  double half_q02 = 0.0;

  /// half_lambda2 phi0 - half_q02 eta, which must equal M(eta, A) phi0.
  RealVector m_phi() const { return half_lambda2 * phi0 - half_q02 * direction; }
};

struct PropagationResidual {
  /// || half_lambda2 phi0 - half_q02 eta - M phi0 ||_2
  double vector_residual = 0.0;
  /// | half_lambda2 - M phi0 . phi0 |
  double lambda_identity = 0.0;
  /// | -half_q02 - M phi0 . eta |
  double q0_identity = 0.0;
  RealVector m_phi0;
};

inline PropagationResidual propagation_residual(const PropagationRecord& rec, const Tensor4& A) {
  const RealMatrix M = contract_M(A, rec.direction);
  PropagationResidual out;
  out.m_phi0 = M * rec.phi0;
  out.vector_residual = (rec.m_phi() - out.m_phi0).norm();
  out.lambda_identity = std::abs(rec.half_lambda2 - out.m_phi0.dot(rec.phi0));
  out.q0_identity = std::abs(-rec.half_q02 - out.m_phi0.dot(rec.direction));
  return out;
}

/// max_{m != m'} |M(eta, A) phi0_m . phi0_m'| over records sharing a direction.
inline double cross_branch_coupling(const std::vector<PropagationRecord>& same_direction, const Tensor4& A) {
  double worst = 0.0;
  for (std::size_t i = 0; i < same_direction.size(); ++i) {
    const RealMatrix M = contract_M(A, same_direction[i].direction);
    for (std::size_t j = 0; j < same_direction.size(); ++j) {
      if (i == j) continue;
      worst = std::max(worst, std::abs((M * same_direction[i].phi0).dot(same_direction[j].phi0)));
    }
  }
  return worst;
}

/// Exact records generated from a known tensor: phi0 are the eigenvectors of
/// M restricted to the complement of eta, sorted by eigenvalue.
inline std::vector<PropagationRecord> records_from_tensor(const Tensor4& A, const std::vector<RealVector>& directions) {
  std::vector<PropagationRecord> out;
  for (const auto& eta0 : directions) {
    const RealVector eta = eta0.normalized();
    const RealMatrix M = contract_M(A, eta);
    const RealMatrix Q = orthonormal_complement(eta);
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(Q.transpose() * M * Q);
    for (int m = 0; m < A.dim() - 1; ++m) {
      PropagationRecord r;
      r.direction = eta;
      r.branch = m;
      r.phi0 = Q * es.eigenvectors().col(m);
      r.half_lambda2 = es.eigenvalues()[m];
      r.half_q02 = -(M * r.phi0).dot(eta);
      out.push_back(r);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Equivalence algebra
// ---------------------------------------------------------------------------

/**
 * Violation of the kernel anti-symmetry for a tensor N:
 * N^{jl}_{ab} = -N^{jl}_{ba} = -N^{lj}_{ab} for every index tuple.
 *
 * This is the paired anti-symmetry stated for (alpha,beta) outside {(j,l),(l,j)}
 * together with N^{jl}_{jl} + N^{jl}_{lj} = 0, which is what the diagonal
 * relations force once c(I(x)I) is removed. N^{ii}_{ii} = 0 follows.
 */
inline double kernel_antisymmetry_violation(const Tensor4& N) {
  double m = 0.0;
  N.for_each_index([&](int j, int l, int a, int b) {
    m = std::max({m, std::abs(N(j, l, a, b) + N(j, l, b, a)), std::abs(N(j, l, a, b) + N(l, j, a, b))});
  });
  return std::max(m, N.simple_symmetry_violation());
}

/// c (I(x)I) + N decomposition of B - A.
struct EquivalenceDecomposition {
  double c = 0.0;
  Tensor4 N;
  /// Max violation of the kernel conditions by N (or of the diagonal
  /// consistency when that fails).
  double residual = 0.0;
  /// max_i |(B-A)^{ii}_{ii} - c|.
  double diagonal_spread = 0.0;
  bool diagonal_consistent = true;
};

inline void require_simple_symmetry(const Tensor4& T, double tol, const char* name) {
  if (T.simple_symmetry_violation() > tol * std::max(1.0, T.max_abs())) {
    throw std::invalid_argument(std::string(name) + " lacks the simple symmetry");
  }
}

inline void require_full_symmetry(const Tensor4& T, double tol, const char* name) {
  if (T.full_symmetry_violation() > tol * std::max(1.0, T.max_abs())) {
    throw std::invalid_argument(std::string(name) + " lacks the full (elasticity-type) symmetry");
  }
}

/**
 * Splits B - A into c (I(x)I) + N with c = (B-A)^{11}_{11}.
 *
 * Both inputs must carry the simple symmetry. The residual is small iff
 * A and B satisfy the same propagation relation.
 */
inline EquivalenceDecomposition decompose_difference(const Tensor4& A, const Tensor4& B, double tol = 1e-10) {
  if (A.dim() != B.dim()) throw std::invalid_argument("tensor dimension mismatch");
  require_simple_symmetry(A, tol, "first tensor");
  require_simple_symmetry(B, tol, "second tensor");
  const int d = A.dim();
  const Tensor4 diff = B - A;
  EquivalenceDecomposition out;
  out.c = diff(0, 0, 0, 0);
  for (int i = 0; i < d; ++i) out.diagonal_spread = std::max(out.diagonal_spread, std::abs(diff(i, i, i, i) - out.c));
  out.N = diff - out.c * Tensor4::i_otimes_i(d);
  out.diagonal_consistent = out.diagonal_spread <= tol * std::max(1.0, diff.max_abs());
  out.residual = out.diagonal_consistent ? kernel_antisymmetry_violation(out.N)
                                         : std::max(out.diagonal_spread, kernel_antisymmetry_violation(out.N));
  return out;
}

struct SymmetricDecomposition {
  double c = 0.0;
  /// || B_s - A_s - c (I(x)I) ||_inf
  double residual = 0.0;
};

/// Symmetrized case: B_s - A_s must be a multiple of I(x)I. Both inputs must
/// carry the full symmetry.
inline SymmetricDecomposition decompose_difference_sym(const Tensor4& As, const Tensor4& Bs, double tol = 1e-10) {
  if (As.dim() != Bs.dim()) throw std::invalid_argument("tensor dimension mismatch");
  require_full_symmetry(As, tol, "first tensor");
  require_full_symmetry(Bs, tol, "second tensor");
  const Tensor4 diff = Bs - As;
  SymmetricDecomposition out;
  out.c = diff(0, 0, 0, 0);
  out.residual = (diff - out.c * Tensor4::i_otimes_i(As.dim())).max_abs();
  return out;
}

struct SymbolEquivalence {
  bool equivalent = false;
  double c = 0.0;
  double max_deviation = 0.0;
};

/**
 * Tests whether (A-B)^{kl}_{ab} xi_a xi_b = c xi_k xi_l for all xi, i.e.
 * whether A and B define the same Stokes operator on divergence-free fields.
 * The scalar c is fitted by least squares over `samples` random unit xi.
 */
inline SymbolEquivalence symbol_equivalence(const Tensor4& A, const Tensor4& B, int samples, std::uint64_t seed = 7,
                                            double tol = 1e-10) {
  const int d = A.dim();
  const Tensor4 diff = A - B;
  const auto xis = random_directions(d, samples, seed);
  std::vector<RealMatrix> symbols;
  double num = 0.0;
  double den = 0.0;
  for (const auto& xi : xis) {
    const RealMatrix S = contract_M_raw(diff, xi);
    const RealMatrix X = xi * xi.transpose();
    num += (S.array() * X.array()).sum();
    den += (X.array() * X.array()).sum();
    symbols.push_back(S);
  }
  SymbolEquivalence out;
  out.c = num / den;
  for (std::size_t i = 0; i < xis.size(); ++i) {
    const RealMatrix X = xis[i] * xis[i].transpose();
    out.max_deviation = std::max(out.max_deviation, (symbols[i] - out.c * X).cwiseAbs().maxCoeff());
  }
  out.equivalent = out.max_deviation <= tol * std::max(1.0, std::max(A.max_abs(), B.max_abs()));
  return out;
}

// ---------------------------------------------------------------------------
// Symmetry-adapted bases and kernel enumeration
// ---------------------------------------------------------------------------

/**
 * Orthonormal (Frobenius) basis of the tensors carrying the symmetry of the
 * given kind: the simple symmetry for the full-gradient kind, the full
 * elasticity-type symmetry for the symmetrized kind. Each basis tensor is
 * the normalized indicator of one orbit of index tuples.
 */
inline std::vector<Tensor4> symmetric_tensor_basis(int dim, GradientKind kind) {
  Tensor4 probe(dim);
  std::set<std::size_t> seen;
  std::vector<Tensor4> basis;
  probe.for_each_index([&](int k, int l, int a, int b) {
    const std::size_t start = probe.index(k, l, a, b);
    if (seen.count(start)) return;
    std::vector<std::array<int, 4>> stack{{k, l, a, b}};
    std::set<std::size_t> orbit;
    while (!stack.empty()) {
      const auto t = stack.back();
      stack.pop_back();
      const std::size_t id = probe.index(t[0], t[1], t[2], t[3]);
      if (orbit.count(id)) continue;
      orbit.insert(id);
      stack.push_back({t[1], t[0], t[3], t[2]});
      if (kind == GradientKind::symmetrized) {
        stack.push_back({t[2], t[1], t[0], t[3]});
        stack.push_back({t[0], t[3], t[2], t[1]});
      }
    }
    Tensor4 e(dim);
    const double w = 1.0 / std::sqrt(static_cast<double>(orbit.size()));
    for (std::size_t id : orbit) {
      e.data()[id] = w;
      seen.insert(id);
    }
    basis.push_back(e);
  });
  return basis;
}

/**
 * Dimension of {N : N carries the symmetry of `kind` and the kernel
 * anti-symmetry}, obtained by assembling every linear condition on the d^4
 * entries and measuring the null space numerically.
 */
inline int kernel_condition_dimension(int dim, GradientKind kind) {
  Tensor4 probe(dim);
  const int n = static_cast<int>(probe.size());
  std::vector<Eigen::RowVectorXd> rows;
  auto add = [&](std::size_t i, double si, std::size_t j, double sj) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
    r[static_cast<Eigen::Index>(i)] += si;
    r[static_cast<Eigen::Index>(j)] += sj;
    rows.push_back(r);
  };
  probe.for_each_index([&](int k, int l, int a, int b) {
    const std::size_t id = probe.index(k, l, a, b);
    add(id, 1.0, probe.index(l, k, b, a), -1.0);
    add(id, 1.0, probe.index(k, l, b, a), 1.0);
    add(id, 1.0, probe.index(l, k, a, b), 1.0);
    if (kind == GradientKind::symmetrized) {
      add(id, 1.0, probe.index(a, l, k, b), -1.0);
      add(id, 1.0, probe.index(k, b, a, l), -1.0);
    }
  });
  Eigen::MatrixXd C(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) C.row(static_cast<Eigen::Index>(i)) = rows[i];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) rank += s[i] > 1e-10 * s[0];
  return n - rank;
}

/// Dimension of the tensors invisible to the propagation relation:
/// span{I(x)I} plus the anti-symmetric kernel tensors.
inline int expected_reconstruction_kernel_dimension(int dim, GradientKind kind) {
  return 1 + kernel_condition_dimension(dim, kind);
}

/// A kernel tensor N = sum c_{jl,ab} (e_j ^ e_l) (x) (e_a ^ e_b) from given
/// coefficients over pairs j<l and a<b (row-major over the pair lists).
inline Tensor4 antisymmetric_kernel_tensor(int dim, const std::vector<double>& coeffs) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) pairs.emplace_back(i, j);
  if (coeffs.size() != pairs.size() * pairs.size()) throw std::invalid_argument("wrong kernel coefficient count");
  Tensor4 N(dim);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      const double c = coeffs[p * pairs.size() + q];
      const auto [j, l] = pairs[p];
      const auto [a, b] = pairs[q];
      N(j, l, a, b) += c;
      N(j, l, b, a) -= c;
      N(l, j, a, b) -= c;
      N(l, j, b, a) += c;
    }
  }
  return N;
}

// ---------------------------------------------------------------------------
// Reconstruction from Bloch data
// ---------------------------------------------------------------------------

struct ReconstructionOptions {
  /// Singular values below rank_tolerance * sigma_max span the kernel.
  double rank_tolerance = 1e-8;
};

struct Reconstruction {
  /// Minimal-norm tensor reproducing the records.
  Tensor4 tensor;
  /// Orthonormal basis of the numerical kernel within the symmetric space.
  std::vector<Tensor4> kernel;
  int kernel_dim = 0;
  int expected_kernel_dim = 0;
  /// True if the numerical kernel is larger than the expected one.
  bool rank_deficient = false;
  std::vector<double> singular_values;
  /// Least-squares residual norm of the fitted equations.
  double residual = 0.0;
};

/**
 * Least-squares recovery of a tensor X from propagation records, solving
 * M(eta, X) phi0 = half_lambda2 phi0 - half_q02 eta over the symmetric
 * tensors of the given kind. Returns the minimal-norm solution and the
 * numerical kernel.
 */
inline Reconstruction reconstruct_from_bloch(const std::vector<PropagationRecord>& records, int dim, GradientKind kind,
                                             const ReconstructionOptions& opts = {}) {
  if (records.empty()) throw std::invalid_argument("no propagation records");
  const auto basis = symmetric_tensor_basis(dim, kind);
  const int p = static_cast<int>(basis.size());
  const int rows = static_cast<int>(records.size()) * dim;
  Eigen::MatrixXd G(rows, p);
  Eigen::VectorXd rhs(rows);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.direction.size() != dim || rec.phi0.size() != dim) throw std::invalid_argument("record dimension mismatch");
    const RealVector target = rec.m_phi();
    for (int b = 0; b < p; ++b) {
      const RealVector col = contract_M_raw(basis[static_cast<std::size_t>(b)], rec.direction) * rec.phi0;
      for (int k = 0; k < dim; ++k) G(static_cast<Eigen::Index>(r) * dim + k, b) = col[k];
    }
    for (int k = 0; k < dim; ++k) rhs(static_cast<Eigen::Index>(r) * dim + k) = target[k];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  Reconstruction out{Tensor4(dim)};
  out.expected_kernel_dim = expected_reconstruction_kernel_dimension(dim, kind);
  const double cutoff = opts.rank_tolerance * (s.size() ? s[0] : 0.0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    out.singular_values.push_back(s[i]);
    if (s[i] > cutoff) {
      x += svd.matrixV().col(i) * (svd.matrixU().col(i).dot(rhs) / s[i]);
      ++rank;
    }
  }
  out.kernel_dim = p - rank;
  out.rank_deficient = out.kernel_dim > out.expected_kernel_dim;
  for (int b = 0; b < p; ++b) out.tensor += x[b] * basis[static_cast<std::size_t>(b)];
  for (int i = rank; i < p; ++i) {
    Tensor4 t(dim);
    for (int b = 0; b < p; ++b) t += svd.matrixV()(b, i) * basis[static_cast<std::size_t>(b)];
    out.kernel.push_back(t);
  }
  out.residual = (G * x - rhs).norm();
  return out;
}

/// Removes the components of T along an orthonormal tensor family.
inline Tensor4 project_out(Tensor4 T, const std::vector<Tensor4>& family) {
  for (const auto& e : family) {
    double dot = 0.0;
    for (std::size_t i = 0; i < T.size(); ++i) dot += T.data()[i] * e.data()[i];
    T -= dot * e;
  }
  return T;
}

}  // namespace stokes_bloch
