#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace sbt;

namespace {

Tensor4 random_symmetric(int d, GradientKind kind, std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> normal;
  Tensor4 t(d);
  for (const auto& b : symmetric_tensor_basis(d, kind)) t += (scale * normal(rng)) * b;
  return t;
}

std::vector<double> random_coeffs(std::size_t n, std::mt19937& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> c(n);
  for (auto& v : c) v = normal(rng);
  return c;
}

std::size_t pair_count(int d) { return static_cast<std::size_t>(d * (d - 1) / 2); }

}  // namespace

TEST_CASE("decomposition recovers synthetic c and N exactly", "[tensor_lab]") {
  std::mt19937 rng(42);
  for (int d : {2, 3}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor4 A = random_symmetric(d, GradientKind::full_gradient, rng);
      const double c = std::normal_distribution<double>()(rng);
      const Tensor4 N = antisymmetric_kernel_tensor(d, random_coeffs(pair_count(d) * pair_count(d), rng));
      const Tensor4 B = A + c * Tensor4::i_otimes_i(d) + N;
      const auto dec = decompose_difference(A, B);
      CHECK(std::abs(dec.c - c) < 1e-12);
      CHECK(dec.residual < 1e-12);
      CHECK(max_entry_difference(dec.N, N) < 1e-12);
    }
  }
}

TEST_CASE("non-equivalent tensors leave a residual", "[tensor_lab]") {
  std::mt19937 rng(5);
  const Tensor4 A = random_symmetric(2, GradientKind::full_gradient, rng);
  Tensor4 B = A;
  B(0, 0, 1, 1) += 0.1;
  B(1, 1, 0, 0) += 0.1;
  CHECK(decompose_difference(A, B).residual > 1e-2);
  Tensor4 bad = A;
  bad(0, 1, 0, 1) += 1.0;
  CHECK_THROWS_AS(decompose_difference(A, bad), std::invalid_argument);
}

TEST_CASE("symmetrized decomposition is a multiple of I(x)I", "[tensor_lab]") {
  std::mt19937 rng(8);
  for (int d : {2, 3}) {
    const Tensor4 A = random_symmetric(d, GradientKind::symmetrized, rng);
    const auto dec = decompose_difference_sym(A, A + 0.75 * Tensor4::i_otimes_i(d));
    CHECK(std::abs(dec.c - 0.75) < 1e-12);
    CHECK(dec.residual < 1e-12);
    CHECK(A.full_symmetry_violation() < 1e-14);
  }
}

TEST_CASE("kernel condition count matches explicit anti-symmetric tensors", "[tensor_lab]") {
  for (int d : {2, 3}) {
    // Independent count: rank of the explicit family (e_j ^ e_l) (x) (e_a ^ e_b).
    const std::size_t p = pair_count(d) * pair_count(d);
    Eigen::MatrixXd M(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(Tensor4(d).size()));
    for (std::size_t i = 0; i < p; ++i) {
      std::vector<double> c(p, 0.0);
      c[i] = 1.0;
      const Tensor4 N = antisymmetric_kernel_tensor(d, c);
      CHECK(kernel_antisymmetry_violation(N) == 0.0);
      for (std::size_t e = 0; e < N.size(); ++e) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e)) = N.data()[e];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    CHECK(kernel_condition_dimension(d, GradientKind::full_gradient) == lu.rank());
    CHECK(kernel_condition_dimension(d, GradientKind::symmetrized) == 0);
  }
  CHECK(expected_reconstruction_kernel_dimension(2, GradientKind::full_gradient) == 2);
  CHECK(expected_reconstruction_kernel_dimension(3, GradientKind::full_gradient) == 10);
  CHECK(expected_reconstruction_kernel_dimension(3, GradientKind::symmetrized) == 1);
}

TEST_CASE("synthetic records reconstruct the tensor modulo its kernel", "[tensor_lab]") {
  std::mt19937 rng(17);
  for (int d : {2, 3}) {
    for (auto kind : {GradientKind::full_gradient, GradientKind::symmetrized}) {
      // Diagonal shift keeps M(eta, A) positive on the complement.
      const Tensor4 A = random_symmetric(d, kind, rng, 0.1) +
                        (kind == GradientKind::symmetrized ? constant_sym_tensor(d, 4.0) : Tensor4::identity(d, 2.0));
      const auto records = records_from_tensor(A, spread_directions(d, d == 2 ? 16 : 32));
      for (const auto& r : records) CHECK(propagation_residual(r, A).vector_residual < 1e-12);
      const auto rec = reconstruct_from_bloch(records, d, kind);
      CHECK(rec.kernel_dim == expected_reconstruction_kernel_dimension(d, kind));
      CHECK_FALSE(rec.rank_deficient);
      CHECK(project_out(rec.tensor - A, rec.kernel).max_abs() < 1e-10);
      // I(x)I lies in the reported kernel.
      const Tensor4 ii = Tensor4::i_otimes_i(d);
      CHECK(project_out(ii, rec.kernel).max_abs() < 1e-10);
    }
  }
}

TEST_CASE("too few directions leave a larger kernel", "[tensor_lab]") {
  const auto records = records_from_tensor(Tensor4::identity(3, 1.0), spread_directions(3, 2));
  const auto rec = reconstruct_from_bloch(records, 3, GradientKind::full_gradient);
  CHECK(rec.rank_deficient);
  CHECK(rec.kernel_dim > rec.expected_kernel_dim);
}

TEST_CASE("symbol equivalence separates kernel from non-kernel perturbations", "[tensor_lab]") {
  std::mt19937 rng(23);
  for (int d : {2, 3}) {
    const Tensor4 A = random_symmetric(d, GradientKind::full_gradient, rng);
    for (int trial = 0; trial < 20; ++trial) {
      const double c = std::normal_distribution<double>()(rng);
      const Tensor4 N = antisymmetric_kernel_tensor(d, random_coeffs(pair_count(d) * pair_count(d), rng));
      CHECK(symbol_equivalence(A, A + c * Tensor4::i_otimes_i(d) + N, 50).equivalent);
    }
    int rejected = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor4 P = random_symmetric(d, GradientKind::full_gradient, rng, 1e-3);
      rejected += symbol_equivalence(A, A + P, 50).equivalent ? 0 : 1;
    }
    CHECK(rejected == 100);
  }
}

TEST_CASE("Legendre-Hadamard margin of simple tensors", "[tensor_lab]") {
  const auto dirs = spread_directions(2, 90);
  CHECK(std::abs(legendre_hadamard_min(Tensor4::identity(2, 1.5), dirs) - 1.5) < 1e-14);
  // I(x)I contributes (eta . phi)^2, which vanishes on the complement.
  CHECK(std::abs(legendre_hadamard_min(Tensor4::identity(2, 1.0) + Tensor4::i_otimes_i(2), dirs) - 1.0) < 1e-14);
  Tensor4 bad(2);
  bad(0, 1, 0, 1) = 1.0;
  CHECK_THROWS_AS(contract_M(bad, unit(1.0, 1.0)), std::invalid_argument);
}

TEST_CASE("random and spread directions are unit and reproducible", "[tensor_lab]") {
  const auto a = random_directions(3, 10, 99);
  const auto b = random_directions(3, 10, 99);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i].norm() - 1.0) < 1e-15);
    CHECK(a[i] == b[i]);
  }
  CHECK(random_directions(3, 10, 100)[0] != a[0]);
  for (const auto& v : spread_directions(3, 32)) CHECK(std::abs(v.norm() - 1.0) < 1e-15);
}
