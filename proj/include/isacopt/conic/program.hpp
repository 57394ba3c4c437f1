#pragma once

// Solver-agnostic description of a convex conic program
//
//   minimize    c'x
//   subject to  E_i(x) in K_i,   K_i in {Zero, Nonneg, SecondOrder, PSD}
//
// where every E_i is an affine map of the declared variable blocks.  Complex
// Hermitian matrix variables are carried as the svec of their real-symmetric
// embedding (see embedding.hpp); helpers below hide the factor-of-two
// bookkeeping that the embedding introduces.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "isacopt/conic/embedding.hpp"
#include "isacopt/errors.hpp"

namespace isacopt::conic {

enum class ConeKind { Zero, Nonneg, SecondOrder, Psd };

inline const char* cone_name(ConeKind k) {
  switch (k) {
    case ConeKind::Zero: return "zero";
    case ConeKind::Nonneg: return "nonneg";
    case ConeKind::SecondOrder: return "soc";
    case ConeKind::Psd: return "psd";
  }
  return "?";
}

struct LinTerm {
  int var;
  double coef;
};

// Sparse affine expression sum_i coef_i * x_i + constant.
struct LinExpr {
  std::vector<LinTerm> terms;
  double constant = 0.0;

  LinExpr() = default;
  /*implicit*/ LinExpr(double c) : constant(c) {}

  LinExpr& add(int var, double coef) {
    if (coef != 0.0) terms.push_back({var, coef});
    return *this;
  }
  // keeps explicit zeros: used where the sparsity pattern must stay fixed
  // across data updates so factorizations can be reused
  LinExpr& add_keep(int var, double coef) {
    terms.push_back({var, coef});
    return *this;
  }
  LinExpr& operator+=(const LinExpr& o) {
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
    constant += o.constant;
    return *this;
  }
  LinExpr& operator*=(double a) {
    for (auto& t : terms) t.coef *= a;
    constant *= a;
    return *this;
  }
  friend LinExpr operator*(double a, LinExpr e) {
    e *= a;
    return e;
  }
  friend LinExpr operator+(LinExpr a, const LinExpr& b) {
    a += b;
    return a;
  }
  friend LinExpr operator-(LinExpr a, const LinExpr& b) {
    LinExpr nb = b;
    nb *= -1.0;
    a += nb;
    return a;
  }
  double eval(const Eigen::VectorXd& x) const {
    double v = constant;
    for (const auto& t : terms) v += t.coef * x[t.var];
    return v;
  }
};

inline LinExpr var_expr(int var, double coef = 1.0) {
  LinExpr e;
  e.add(var, coef);
  return e;
}

struct VarBlock {
  std::string name;
  int offset = 0;
  int size = 0;
  // 0: plain scalars; d > 0: svec coordinates of a d x d symmetric matrix.
  int matdim = 0;
  // m > 0 marks an embedded m x m Hermitian block (matdim == 2m).
  int herm_dim = 0;
};

// Handle to a Hermitian variable block: svec coordinates of the 2m x 2m
// real-symmetric embedding.
struct HermHandle {
  int block = -1;
  int offset = 0;  // first flat coordinate
  int m = 0;       // complex dimension
  int coords() const { return svec_size(2 * m); }
};

struct ConeSpec {
  ConeKind kind;
  int offset;  // first row in the lowered (A, b)
  int dim;
};

class Program {
 public:
  // ---- variable declaration ----------------------------------------------

  int add_scalar(std::string name) { return add_block(std::move(name), 1, 0, 0); }

  int add_vector(std::string name, int dim) {
    return add_block(std::move(name), dim, 0, 0);
  }

  // Real symmetric d x d variable; returns the first svec coordinate.
  int add_symmetric(std::string name, int d) {
    return add_block(std::move(name), svec_size(d), d, 0);
  }

  HermHandle add_hermitian(std::string name, int m) {
    const int off = add_block(std::move(name), svec_size(2 * m), 2 * m, m);
    return HermHandle{static_cast<int>(blocks_.size()) - 1, off, m};
  }

  int num_vars() const { return nvars_; }
  const std::vector<VarBlock>& blocks() const { return blocks_; }

  // ---- objective -----------------------------------------------------------

  void minimize_term(const LinExpr& e) {
    for (const auto& t : e.terms) obj_.add(t.var, t.coef);
    obj_.constant += e.constant;
  }
  double objective_constant() const { return obj_.constant; }

  // Re Tr(W C) as an affine expression of a Hermitian block W.
  LinExpr herm_inner(const HermHandle& h, const Eigen::MatrixXcd& C) const {
    // <embed(W), embed(C)> = 2 Re<W, C>, so halve the svec coefficients.
    const Eigen::VectorXd sc = svec(hermitian_embed(C));
    LinExpr e;
    e.terms.reserve(static_cast<size_t>(sc.size()));
    for (int i = 0; i < sc.size(); ++i)
      if (sc[i] != 0.0) e.terms.push_back({h.offset + i, 0.5 * sc[i]});
    return e;
  }

  // Tr(W) of a Hermitian block.
  LinExpr herm_trace(const HermHandle& h) const {
    LinExpr e;
    const int d = 2 * h.m;
    for (int j = 0; j < d; ++j)
      e.terms.push_back({h.offset + svec_index(j, j, d), 0.5});
    return e;
  }

  // ---- constraints ---------------------------------------------------------

  void zero(LinExpr e) { zero_.push_back(std::move(e)); }
  void nonneg(LinExpr e) { nonneg_.push_back(std::move(e)); }

  // rows[0] >= || rows[1..] ||_2
  void soc(std::vector<LinExpr> rows) {
    if (rows.size() < 2) throw Error("soc: need at least 2 rows");
    soc_.push_back(std::move(rows));
  }

  // 2 p q >= ||z||^2, p >= 0, q >= 0;  lowered to a standard cone on
  // (p + q, sqrt(2) z, p - q).
  void rotated_soc(const LinExpr& p, const LinExpr& q, std::vector<LinExpr> z) {
    std::vector<LinExpr> rows;
    rows.reserve(z.size() + 2);
    rows.push_back(p + q);
    const double rt2 = std::sqrt(2.0);
    for (auto& zi : z) {
      zi *= rt2;
      rows.push_back(std::move(zi));
    }
    rows.push_back(p - q);
    soc_.push_back(std::move(rows));
  }

  // Explicit PSD constraint: the svec rows of a symmetric d x d affine map.
  void psd_rows(std::vector<LinExpr> rows, int d) {
    if (static_cast<int>(rows.size()) != svec_size(d))
      throw Error("psd_rows: row count does not match svec size");
    psd_.push_back({std::move(rows), d});
  }

  // PSD on the plain symmetric variable block starting at `offset`.
  void psd_symmetric_var(int offset, int d) {
    std::vector<LinExpr> rows(svec_size(d));
    for (int i = 0; i < svec_size(d); ++i) rows[i] = var_expr(offset + i);
    psd_rows(std::move(rows), d);
  }

  // sum_i coef_i * H_i + ident * I_m  (Hermitian, via the embedding)  PSD.
  // `ident` is an affine scalar expression multiplying the identity.
  void psd_herm_combo(int m, const std::vector<std::pair<HermHandle, double>>& hs,
                      const LinExpr& ident = LinExpr()) {
    const int d = 2 * m;
    std::vector<LinExpr> rows(svec_size(d));
    for (const auto& [h, c] : hs) {
      if (h.m != m) throw Error("psd_herm_combo: dimension mismatch");
      for (int i = 0; i < svec_size(d); ++i) rows[i].add(h.offset + i, c);
    }
    if (!ident.terms.empty() || ident.constant != 0.0) {
      for (int j = 0; j < d; ++j) rows[svec_index(j, j, d)] += ident;
    }
    psd_rows(std::move(rows), d);
  }

  // ---- lowering ------------------------------------------------------------

  struct Lowered {
    Eigen::SparseMatrix<double> A;  // m x n
    Eigen::VectorXd b;              // m
    Eigen::VectorXd c;              // n
    std::vector<ConeSpec> cones;    // ordered: Zero, Nonneg, SOC..., PSD...
    double obj_constant = 0.0;
  };

  // Standard form: s = b - A x in K  (so rows store -coef in A and the
  // expression constant in b).
  Lowered lower() const {
    Lowered L;
    int m = static_cast<int>(zero_.size() + nonneg_.size());
    for (const auto& s : soc_) m += static_cast<int>(s.size());
    for (const auto& p : psd_) m += static_cast<int>(p.rows.size());

    L.b.setZero(m);
    L.c.setZero(nvars_);
    for (const auto& t : obj_.terms) L.c[t.var] += t.coef;
    L.obj_constant = obj_.constant;

    std::vector<Eigen::Triplet<double>> trips;
    size_t estimate = 0;
    auto count = [&estimate](const LinExpr& e) { estimate += e.terms.size(); };
    for (const auto& e : zero_) count(e);
    for (const auto& e : nonneg_) count(e);
    for (const auto& s : soc_)
      for (const auto& e : s) count(e);
    for (const auto& p : psd_)
      for (const auto& e : p.rows) count(e);
    trips.reserve(estimate);

    int row = 0;
    auto emit = [&](const LinExpr& e) {
      for (const auto& t : e.terms) trips.emplace_back(row, t.var, -t.coef);
      L.b[row] = e.constant;
      ++row;
    };

    if (!zero_.empty()) {
      L.cones.push_back({ConeKind::Zero, row, static_cast<int>(zero_.size())});
      for (const auto& e : zero_) emit(e);
    }
    if (!nonneg_.empty()) {
      L.cones.push_back({ConeKind::Nonneg, row, static_cast<int>(nonneg_.size())});
      for (const auto& e : nonneg_) emit(e);
    }
    for (const auto& s : soc_) {
      L.cones.push_back({ConeKind::SecondOrder, row, static_cast<int>(s.size())});
      for (const auto& e : s) emit(e);
    }
    for (const auto& p : psd_) {
      L.cones.push_back({ConeKind::Psd, row, static_cast<int>(p.rows.size())});
      for (const auto& e : p.rows) emit(e);
    }

    L.A.resize(m, nvars_);
    L.A.setFromTriplets(trips.begin(), trips.end());
    L.A.makeCompressed();
    return L;
  }

  // ---- solution access -----------------------------------------------------

  Eigen::MatrixXcd value_hermitian(const HermHandle& h,
                                   const Eigen::VectorXd& x) const {
    const int d = 2 * h.m;
    return extract_hermitian(unsvec(x.segment(h.offset, svec_size(d)), d));
  }

  Eigen::MatrixXd value_symmetric(int offset, int d,
                                  const Eigen::VectorXd& x) const {
    return unsvec(x.segment(offset, svec_size(d)), d);
  }

  // ---- plain-text dump -----------------------------------------------------
  //
  // Format: one `var` line per block (name offset size matdim), a `min` line
  // of index:coef pairs plus the constant, then one `cone` line per
  // constraint block followed by its rows as index:coef pairs and `| rhs`.
  void dump(std::ostream& os) const {
    os << "conic-program vars " << nvars_ << "\n";
    for (const auto& b : blocks_)
      os << "var " << b.name << " offset " << b.offset << " size " << b.size
         << " matdim " << b.matdim << " herm " << b.herm_dim << "\n";
    os << "min";
    for (const auto& t : obj_.terms) os << " " << t.var << ":" << t.coef;
    os << " const " << obj_.constant << "\n";
    auto dump_expr = [&os](const LinExpr& e) {
      for (const auto& t : e.terms) os << " " << t.var << ":" << t.coef;
      os << " | " << e.constant << "\n";
    };
    for (const auto& e : zero_) {
      os << "cone zero 1\n";
      dump_expr(e);
    }
    for (const auto& e : nonneg_) {
      os << "cone nonneg 1\n";
      dump_expr(e);
    }
    for (const auto& s : soc_) {
      os << "cone soc " << s.size() << "\n";
      for (const auto& e : s) dump_expr(e);
    }
    for (const auto& p : psd_) {
      os << "cone psd " << p.rows.size() << " matdim " << p.d << "\n";
      for (const auto& e : p.rows) dump_expr(e);
    }
  }

 private:
  struct PsdBlock {
    std::vector<LinExpr> rows;
    int d;
  };

  int add_block(std::string name, int size, int matdim, int herm) {
    VarBlock b;
    b.name = std::move(name);
    b.offset = nvars_;
    b.size = size;
    b.matdim = matdim;
    b.herm_dim = herm;
    blocks_.push_back(std::move(b));
    nvars_ += size;
    return blocks_.back().offset;
  }

  int nvars_ = 0;
  std::vector<VarBlock> blocks_;
  LinExpr obj_;
  std::vector<LinExpr> zero_;
  std::vector<LinExpr> nonneg_;
  std::vector<std::vector<LinExpr>> soc_;
  std::vector<PsdBlock> psd_;
};

// Independent feasibility check of a candidate x against lowered data:
// largest violation per cone family of s = b - A x.
struct ConeResiduals {
  double zero = 0.0, nonneg = 0.0, soc = 0.0, psd = 0.0;
  double worst() const { return std::max({zero, nonneg, soc, psd}); }
};

inline ConeResiduals check_cone_membership(const Program::Lowered& L,
                                           const Eigen::VectorXd& x) {
  ConeResiduals out;
  const Eigen::VectorXd s = L.b - L.A * x;
  for (const auto& cone : L.cones) {
    switch (cone.kind) {
      case ConeKind::Zero:
        for (int r = 0; r < cone.dim; ++r)
          out.zero = std::max(out.zero, std::abs(s[cone.offset + r]));
        break;
      case ConeKind::Nonneg:
        for (int r = 0; r < cone.dim; ++r)
          out.nonneg = std::max(out.nonneg, -s[cone.offset + r]);
        break;
      case ConeKind::SecondOrder: {
        const double t = s[cone.offset];
        const double zn = s.segment(cone.offset + 1, cone.dim - 1).norm();
        out.soc = std::max(out.soc, zn - t);
        break;
      }
      case ConeKind::Psd: {
        const int d = static_cast<int>(
            (std::sqrt(8.0 * cone.dim + 1.0) - 1.0) / 2.0 + 0.5);
        const Eigen::MatrixXd X = unsvec(s.segment(cone.offset, cone.dim), d);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X);
        out.psd = std::max(out.psd, -es.eigenvalues().minCoeff());
        break;
      }
    }
  }
  return out;
}

}  // namespace isacopt::conic
