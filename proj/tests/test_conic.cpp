#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "isacopt/conic/program.hpp"
#include "isacopt/conic/solver.hpp"
#include "isacopt/geometry.hpp"

using namespace isacopt;
using namespace isacopt::conic;
using Catch::Approx;

namespace {

CMat random_hermitian(std::mt19937_64& rng, int M) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMat A(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) A(i, j) = std::complex<double>(g(rng), g(rng));
  return 0.5 * (A + A.adjoint());
}

}  // namespace

TEST_CASE("embedding round-trips and spectra") {
  SECTION("identity embeds to identity") {
    CMat Z = CMat::Identity(3, 3);
    CHECK(hermitian_embed(Z).isApprox(Eigen::MatrixXd::Identity(6, 6)));
    CHECK(extract_hermitian(Eigen::MatrixXd::Identity(6, 6)).isApprox(Z));
  }
  SECTION("Pauli-like matrix has doubled +-1 spectrum") {
    CMat Z(2, 2);
    Z << std::complex<double>(0, 0), std::complex<double>(0, -1),
         std::complex<double>(0, 1), std::complex<double>(0, 0);
    const Eigen::MatrixXd E = hermitian_embed(Z);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(E);
    const auto& lam = es.eigenvalues();
    CHECK(lam[0] == Approx(-1.0));
    CHECK(lam[1] == Approx(-1.0));
    CHECK(lam[2] == Approx(1.0));
    CHECK(lam[3] == Approx(1.0));
  }
  SECTION("embedding of PSD stays PSD (eigen-solver oracle)") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
      CMat A = random_hermitian(rng, 4);
      CMat psd = A * A.adjoint();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hermitian_embed(psd));
      CHECK(es.eigenvalues().minCoeff() >= -1e-9 * psd.trace().real());
      CHECK(hermitian_embed(psd).trace() ==
            Approx(2.0 * psd.trace().real()).epsilon(1e-12));
    }
  }
  SECTION("extract is the exact inverse on Hermitian inputs") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 20; ++t) {
      CMat Z = random_hermitian(rng, 5);
      CHECK((extract_hermitian(hermitian_embed(Z)) - Z).norm() <=
            1e-12 * std::max(1.0, Z.norm()));
    }
  }
  SECTION("real block without imaginary parts extracts to a real matrix") {
    Eigen::MatrixXd A(2, 2);
    A << 2.0, 0.5, 0.5, 1.0;
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(4, 4);
    block.topLeftCorner(2, 2) = A;
    block.bottomRightCorner(2, 2) = A;
    const CMat Z = extract_hermitian(block);
    CHECK(Z.imag().norm() == Approx(0.0).margin(1e-15));
    CHECK(Z.real().isApprox(A));
  }
  SECTION("non-Hermitian input is rejected") {
    CMat Z(2, 2);
    Z << 1.0, 2.0, 3.0, 4.0;
    CHECK_THROWS_AS(hermitian_embed(Z), Error);
  }
}

TEST_CASE("embedded inner products scale by two") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 25; ++t) {
    CMat X = random_hermitian(rng, 4);
    CMat Y = random_hermitian(rng, 4);
    const double lhs =
        (hermitian_embed(X).transpose() * hermitian_embed(Y)).trace();
    const double rhs = 2.0 * (X.adjoint() * Y).trace().real();
    CHECK(lhs == Approx(rhs).epsilon(1e-10).margin(1e-12));
    // svec carries the same inner product
    const double sv = svec(hermitian_embed(X)).dot(svec(hermitian_embed(Y)));
    CHECK(sv == Approx(lhs).epsilon(1e-10).margin(1e-12));
  }
}

TEST_CASE("herm_inner evaluates Re Tr(W C)") {
  std::mt19937_64 rng(13);
  Program prog;
  const HermHandle W = prog.add_hermitian("W", 3);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(prog.num_vars());
  const CMat Wval = random_hermitian(rng, 3);
  x.segment(W.offset, W.coords()) = svec(hermitian_embed(Wval));
  for (int t = 0; t < 10; ++t) {
    const CMat C = random_hermitian(rng, 3);
    const double got = prog.herm_inner(W, C).eval(x);
    const double expect = (Wval * C).trace().real();
    CHECK(got == Approx(expect).epsilon(1e-10).margin(1e-12));
  }
  CHECK(prog.herm_trace(W).eval(x) ==
        Approx(Wval.trace().real()).epsilon(1e-10));
}

TEST_CASE("linear program: min x subject to x >= 3") {
  Program prog;
  const int x = prog.add_scalar("x");
  prog.minimize_term(var_expr(x));
  prog.nonneg(var_expr(x) - LinExpr(3.0));
  const Solution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x[x] == Approx(3.0).margin(1e-5));
}

TEST_CASE("semidefinite program: min Tr(X) subject to X >= I") {
  Program prog;
  const int X = prog.add_symmetric("X", 2);
  prog.minimize_term(var_expr(X + 0) + var_expr(X + 2));  // diagonal svec coords
  std::vector<LinExpr> rows(3);
  rows[0] = var_expr(X + 0) - LinExpr(1.0);
  rows[1] = var_expr(X + 1);
  rows[2] = var_expr(X + 2) - LinExpr(1.0);
  prog.psd_rows(std::move(rows), 2);
  const Solution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == Approx(2.0).margin(2e-5));
  const Eigen::MatrixXd Xv = prog.value_symmetric(X, 2, sol.x);
  CHECK(Xv(0, 0) == Approx(1.0).margin(1e-4));
  CHECK(Xv(1, 1) == Approx(1.0).margin(1e-4));
  CHECK(Xv(0, 1) == Approx(0.0).margin(1e-4));
}

TEST_CASE("second-order program: min ||(x, y)|| with x + y = 2") {
  Program prog;
  const int t = prog.add_scalar("t");
  const int x = prog.add_scalar("x");
  const int y = prog.add_scalar("y");
  prog.minimize_term(var_expr(t));
  prog.zero(var_expr(x) + var_expr(y) - LinExpr(2.0));
  prog.soc({var_expr(t), var_expr(x), var_expr(y)});
  const Solution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == Approx(std::numbers::sqrt2).margin(1e-5));
  CHECK(sol.x[x] == Approx(1.0).margin(1e-4));
  CHECK(sol.x[y] == Approx(1.0).margin(1e-4));
}

TEST_CASE("rotated cone lowering") {
  // minimize u subject to 2 u * 1 >= 3^2
  Program prog;
  const int u = prog.add_scalar("u");
  prog.minimize_term(var_expr(u));
  prog.rotated_soc(var_expr(u), LinExpr(1.0), {LinExpr(3.0)});
  const Solution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x[u] == Approx(4.5).margin(1e-4));
}

TEST_CASE("complex SDP through the embedding") {
  // min Tr(W) s.t. a^H W a >= 1, W Hermitian PSD; optimum 1/||a||^2
  Program prog;
  const HermHandle W = prog.add_hermitian("W", 2);
  CVec a(2);
  a << std::complex<double>(1.0, 0.0), std::complex<double>(0.0, 1.0);
  prog.minimize_term(prog.herm_trace(W));
  prog.nonneg(prog.herm_inner(W, a * a.adjoint()) - LinExpr(1.0));
  prog.psd_herm_combo(2, {{W, 1.0}});
  const Solution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == Approx(0.5).margin(1e-5));
  const CMat Wv = prog.value_hermitian(W, sol.x);
  CHECK(beampattern_gain(Wv, a) == Approx(1.0).margin(1e-4));
}

TEST_CASE("infeasible and unbounded detection") {
  SECTION("x >= 3 and x <= 2 is infeasible") {
    Program prog;
    const int x = prog.add_scalar("x");
    prog.minimize_term(var_expr(x));
    prog.nonneg(var_expr(x) - LinExpr(3.0));
    prog.nonneg(LinExpr(2.0) - var_expr(x));
    const Solution sol = solve(prog);
    CHECK(sol.status == SolveStatus::Infeasible);
  }
  SECTION("min x with only an upper bound is unbounded") {
    Program prog;
    const int x = prog.add_scalar("x");
    prog.minimize_term(var_expr(x));
    prog.nonneg(LinExpr(5.0) - var_expr(x));
    const Solution sol = solve(prog);
    CHECK(sol.status == SolveStatus::Unbounded);
  }
}

TEST_CASE("deterministic resolves") {
  auto build = [] {
    Program prog;
    const int X = prog.add_symmetric("X", 3);
    for (int i = 0; i < 3; ++i)
      prog.minimize_term(var_expr(X + svec_index(i, i, 3)));
    std::vector<LinExpr> rows(svec_size(3));
    for (int i = 0; i < svec_size(3); ++i) rows[i] = var_expr(X + i);
    // X - diag(1,2,3) PSD
    rows[svec_index(0, 0, 3)] += LinExpr(-1.0);
    rows[svec_index(1, 1, 3)] += LinExpr(-2.0);
    rows[svec_index(2, 2, 3)] += LinExpr(-3.0);
    Program p2 = prog;
    p2.psd_rows(std::move(rows), 3);
    return p2;
  };
  const Solution a = solve(build());
  const Solution b = solve(build());
  REQUIRE(a.status == SolveStatus::Optimal);
  REQUIRE(b.status == SolveStatus::Optimal);
  REQUIRE(a.x.size() == b.x.size());
  for (int i = 0; i < a.x.size(); ++i) CHECK(a.x[i] == b.x[i]);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("program dump is parseable text") {
  Program prog;
  const int x = prog.add_scalar("x");
  prog.minimize_term(var_expr(x));
  prog.nonneg(var_expr(x) - LinExpr(1.0));
  prog.psd_symmetric_var(prog.add_symmetric("X", 2), 2);
  std::ostringstream os;
  prog.dump(os);
  const std::string text = os.str();
  CHECK(text.find("cone nonneg") != std::string::npos);
  CHECK(text.find("cone psd") != std::string::npos);
  CHECK(text.find("var x") != std::string::npos);
}
