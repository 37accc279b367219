#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace tbqst;
using namespace tbqst::testing;

TEST(Matmul, IdentityAndPauliX) {
  Gen gen(1);
  const Matrix a = gen.ginibre(2, 2);
  EXPECT_EQ(matmul(identity(2), a), a);
  Matrix x(2, 2);
  x << 0, 1, 1, 0;
  EXPECT_EQ(matmul(x, x), identity(2));
}

TEST(Matmul, InnerProductMatchesElementwiseSum) {
  Gen gen(2);
  const Matrix u = gen.ginibre(1, 2), v = gen.ginibre(2, 1);
  const Matrix p = matmul(u, v);
  ASSERT_EQ(p.rows(), 1);
  ASSERT_EQ(p.cols(), 1);
  EXPECT_NEAR(std::abs(p(0, 0) - (u(0, 0) * v(0, 0) + u(0, 1) * v(1, 0))), 0.0, 1e-15);
}

TEST(Matmul, ShapeMismatchThrows) { EXPECT_THROW(matmul(Matrix::Zero(2, 3), Matrix::Zero(2, 3)), ShapeError); }

TEST(Matmul, AgreesWithLoopOracleAndIsAssociative) {
  Gen gen(3);
  for (int t = 0; t < 50; ++t) {
    const int n = gen.integer(1, 6), m = gen.integer(1, 6), k = gen.integer(1, 6), l = gen.integer(1, 6);
    const Matrix a = gen.ginibre(n, m), b = gen.ginibre(m, k), c = gen.ginibre(k, l);
    EXPECT_LT(max_diff(matmul(a, b), naive_matmul(a, b)), 1e-12);
    EXPECT_LT(max_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))), 1e-12);
  }
}

TEST(Adjoint, ConjugateTranspose) {
  Matrix i1(1, 1);
  i1(0, 0) = cd(0, 1);
  EXPECT_EQ(adjoint(i1)(0, 0), cd(0, -1));
  Matrix sym(2, 2);
  sym << 1, 2, 2, 3;
  EXPECT_EQ(adjoint(sym), sym);

  Gen gen(4);
  const Matrix a = gen.ginibre(3, 2);
  const Matrix ad = adjoint(a);
  ASSERT_EQ(ad.rows(), 2);
  ASSERT_EQ(ad.cols(), 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c) EXPECT_EQ(ad(c, r), std::conj(a(r, c)));
  EXPECT_EQ(adjoint(adjoint(a)), a);
}

TEST(Gram, IsHermitianPsd) {
  Gen gen(5);
  for (int t = 0; t < 30; ++t) {
    const Matrix m = gen.ginibre(gen.integer(1, 8), gen.integer(1, 8));
    const Matrix g = m.adjoint() * m;
    EXPECT_LT(hermiticity_error(g), 1e-12);
    EXPECT_GT(eig_hermitian(hermitian_part(g)).values.minCoeff(), -1e-12);
  }
}

TEST(EigHermitian, KnownSpectra) {
  EXPECT_LT((eig_hermitian(identity(4)).values - RealVector::Ones(4)).cwiseAbs().maxCoeff(), 1e-14);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 0.9;
  d(1, 1) = 0.1;
  const RealVector v = eig_hermitian(d).values;
  EXPECT_NEAR(v(0), 0.1, 1e-15);
  EXPECT_NEAR(v(1), 0.9, 1e-15);
}

TEST(EigHermitian, DepolarizedMesClosedForm) {
  const double p = 0.69055;
  const RealVector v = eig_hermitian(depolarized(mes_state(4, 0).density(), p).matrix()).values;
  for (int i = 0; i < 15; ++i) EXPECT_NEAR(v(i), (1 - p) / 16, 1e-12);
  EXPECT_NEAR(v(15), p + (1 - p) / 16, 1e-12);
  EXPECT_NEAR(v(15), 0.7098906, 5e-7);
  EXPECT_NEAR(v(0), 0.019341, 5e-7);
}

TEST(EigHermitian, ReconstructionAndOrthonormality) {
  Gen gen(6);
  for (int t = 0; t < 40; ++t) {
    const int d = gen.integer(1, 16);
    const Matrix h = gen.hermitian(d);
    const EigenSystem es = eig_hermitian(h);
    for (int i = 1; i < d; ++i) EXPECT_LE(es.values(i - 1), es.values(i));
    EXPECT_LT(max_diff(from_spectrum(es, es.values), h), 1e-8);
    EXPECT_LT(max_diff(es.vectors.adjoint() * es.vectors, identity(d)), 1e-8);
  }
}

TEST(EigHermitian, RejectsNonHermitian) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = 1;
  EXPECT_THROW(eig_hermitian(a), ContractViolation);
}

TEST(MatrixSqrt, KnownCases) {
  EXPECT_LT(max_diff(matrix_sqrt_psd(identity(3)), identity(3)), 1e-14);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4;
  d(1, 1) = 9;
  Matrix want = Matrix::Zero(2, 2);
  want(0, 0) = 2;
  want(1, 1) = 3;
  EXPECT_LT(max_diff(matrix_sqrt_psd(d), want), 1e-14);

  Gen gen(7);
  const Vector psi = gen.pure(5);
  const Matrix proj = psi * psi.adjoint();
  EXPECT_LT(max_diff(matrix_sqrt_psd(proj), proj), 1e-8);
}

TEST(MatrixSqrt, SquaresBackAndClampsOrRejects) {
  Gen gen(8);
  for (int t = 0; t < 20; ++t) {
    const Matrix rho = gen.density(gen.integer(1, 10), gen.integer(1, 3));
    const Matrix s = matrix_sqrt_psd(rho);
    EXPECT_LT(max_diff(s * s, rho), 1e-8);
    EXPECT_LT(hermiticity_error(s), 1e-12);
  }
  Matrix tiny = Matrix::Zero(2, 2);
  tiny(0, 0) = 1;
  tiny(1, 1) = -5e-9;
  EXPECT_EQ(matrix_sqrt_psd(tiny)(1, 1), cd(0, 0));
  tiny(1, 1) = -1e-6;
  EXPECT_THROW(matrix_sqrt_psd(tiny), NotPsdError);
}

TEST(Tensor, KnownProductsAndMixedProduct) {
  EXPECT_EQ(tensor(identity(2), identity(2)), identity(4));
  Matrix a = Matrix::Zero(2, 2), b = Matrix::Zero(2, 2);
  a(0, 0) = 1;
  b(1, 1) = 1;
  Matrix want = Matrix::Zero(4, 4);
  want(1, 1) = 1;
  EXPECT_EQ(tensor(a, b), want);

  Gen gen(9);
  for (int t = 0; t < 20; ++t) {
    const Matrix p = gen.ginibre(2, 2), q = gen.ginibre(2, 2), r = gen.ginibre(2, 2), s = gen.ginibre(2, 2);
    EXPECT_LT(max_diff(tensor(p, q) * tensor(r, s), tensor(Matrix(p * r), Matrix(q * s))), 1e-12);
    const Matrix x = gen.ginibre(gen.integer(1, 3), gen.integer(1, 3)), y = gen.ginibre(gen.integer(1, 3), gen.integer(1, 3));
    EXPECT_LT(max_diff(tensor(x, y), naive_kron(x, y)), 1e-15);
  }
}

TEST(TraceProduct, MatchesLoopOracle) {
  Gen gen(10);
  const Matrix a = gen.ginibre(5, 5), b = gen.ginibre(5, 5);
  EXPECT_LT(std::abs(trace_product(a, b) - naive_trace_product(a, b)), 1e-12);
}

TEST(DensityOperator, ValidatesInvariants) {
  EXPECT_NO_THROW(DensityOperator(identity(3) / 3.0));
  EXPECT_THROW(DensityOperator(Matrix::Zero(2, 3)), ShapeError);
  EXPECT_THROW(DensityOperator(identity(3)), ContractViolation);
  Matrix nh = identity(2) / 2.0;
  nh(0, 1) = 0.1;
  EXPECT_THROW(DensityOperator{nh}, ContractViolation);
  Matrix neg = Matrix::Zero(2, 2);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  EXPECT_THROW(DensityOperator{neg}, NotPsdError);
  Matrix nan = identity(2) / 2.0;
  nan(0, 0) = std::nan("");
  EXPECT_ANY_THROW(DensityOperator{nan});
}

TEST(DensityOperator, Factories) {
  EXPECT_EQ(DensityOperator::maximally_mixed(4).matrix(), identity(4) / 4.0);
  Gen gen(11);
  const Vector psi = gen.pure(3);
  EXPECT_LT(max_diff(DensityOperator::from_pure(psi).matrix(), psi * psi.adjoint()), 1e-15);
  const Matrix g = gen.ginibre(3, 3);
  const DensityOperator n = DensityOperator::normalized(g * g.adjoint());
  EXPECT_NEAR(n.matrix().trace().real(), 1.0, 1e-14);
}

TEST(DensityJson, BitExactRoundTrip) {
  Gen gen(12);
  for (int t = 0; t < 10; ++t) {
    const Matrix rho = gen.density(gen.integer(1, 9));
    const Json j = Json::parse(density_to_json(rho).dump());
    const Matrix back = density_matrix_from_json(j);
    EXPECT_EQ(back, rho);
  }
}

// --- generalized Gell-Mann basis ----------------------------------------------------

TEST(GellMann, QubitBasisIsPauli) {
  const GellMannBasis b = build_basis(2);
  ASSERT_EQ(b.size(), 4u);
  Matrix sx(2, 2), sy(2, 2), sz(2, 2);
  sx << 0, 1, 1, 0;
  sy << 0, cd(0, -1), cd(0, 1), 0;
  sz << 1, 0, 0, -1;
  EXPECT_EQ(b.matrices[0], identity(2));
  EXPECT_LT(max_diff(b.matrices[1], sx), 1e-15);
  EXPECT_LT(max_diff(b.matrices[2], sy), 1e-15);
  EXPECT_LT(max_diff(b.matrices[3], sz), 1e-15);
}

TEST(GellMann, GramIsTwiceIdentityAndCasimirHolds) {
  for (int d = 2; d <= 6; ++d) {
    const GellMannBasis b = build_basis(d);
    ASSERT_EQ(static_cast<int>(b.size()), d * d);
    Matrix casimir = Matrix::Zero(d, d);
    for (std::size_t i = 1; i < b.size(); ++i) {
      EXPECT_LT(hermiticity_error(b.matrices[i]), 1e-15);
      EXPECT_LT(std::abs(b.matrices[i].trace()), 1e-14);
      casimir += b.matrices[i] * b.matrices[i];
      for (std::size_t j = 1; j < b.size(); ++j)
        EXPECT_NEAR(std::abs(naive_trace_product(b.matrices[i], b.matrices[j]) - cd(i == j ? 2.0 : 0.0)), 0.0, 1e-12);
    }
    EXPECT_LT(max_diff(casimir, (2.0 * (d * d - 1) / d) * identity(d)), 1e-12) << "d = " << d;
  }
}

TEST(GellMann, RejectsTinyDimension) { EXPECT_THROW(build_basis(1), DomainError); }

TEST(GellMann, DecomposeKnownStates) {
  const GellMannBasis b4 = build_basis(4);
  const RealVector g = decompose(DensityOperator::maximally_mixed(4), b4);
  EXPECT_NEAR(g(0), 0.25, 1e-15);
  EXPECT_LT(g.tail(15).cwiseAbs().maxCoeff(), 1e-15);

  Matrix zero = Matrix::Zero(2, 2);
  zero(0, 0) = 1;
  const RealVector q = decompose(DensityOperator(zero), build_basis(2));
  EXPECT_NEAR(q(0), 0.5, 1e-15);
  EXPECT_NEAR(q(1), 0.0, 1e-15);
  EXPECT_NEAR(q(2), 0.0, 1e-15);
  EXPECT_NEAR(q(3), 0.5, 1e-15);
  EXPECT_THROW(decompose(DensityOperator::maximally_mixed(3), b4), ShapeError);
}

TEST(GellMann, ComposeRoundTripAndShape) {
  Gen gen(13);
  for (int d = 2; d <= 5; ++d) {
    const GellMannBasis b = build_basis(d);
    const DensityOperator rho(gen.density(d));
    const RealVector g = decompose(rho, b);
    EXPECT_NEAR(g(0), 1.0 / d, 1e-14);
    EXPECT_LT(max_diff(compose(g, b), rho.matrix()), 1e-10);
  }
  const GellMannBasis b3 = build_basis(3);
  RealVector g = RealVector::Zero(9);
  g(0) = 1.0 / 3;
  EXPECT_LT(max_diff(compose(g, b3), identity(3) / 3.0), 1e-15);
  g(1) = 5.0;
  const Matrix m = compose(g, b3);
  EXPECT_LT(hermiticity_error(m), 1e-15);
  EXPECT_NEAR(m.trace().real(), 1.0, 1e-14);
  EXPECT_LT(eig_hermitian(m).values.minCoeff(), 0.0);
  EXPECT_THROW(compose(RealVector::Zero(4), b3), ShapeError);
}

TEST(DesignMatrix, RanksOfMeasurementSets) {
  const GellMannBasis b = build_basis(4);
  const auto all = single_set();
  std::vector<Matrix> ops, d1;
  for (const auto& e : all) {
    ops.push_back(e.op);
    if (e.detector() == Detector::D1) d1.push_back(e.op);
  }
  EXPECT_EQ(design_matrix(ops, b).rank, 16);
  EXPECT_EQ(design_matrix(d1, b).rank, 16);
  const std::vector<Matrix> id{identity(4)};
  EXPECT_EQ(design_matrix(id, b).rank, 1);
}

TEST(DesignMatrix, EntriesAreTraceProducts) {
  Gen gen(14);
  const GellMannBasis b = build_basis(3);
  std::vector<Matrix> ops{gen.density(3), gen.density(3)};
  const DesignMatrix a = design_matrix(ops, b);
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t j = 0; j < ops.size(); ++j)
      EXPECT_NEAR(a.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                  naive_trace_product(ops[j], b.matrices[i]).real(), 1e-14);
}

TEST(DesignMatrix, ExactCountsSolveTheLinearSystem) {
  Gen gen(15);
  const GellMannBasis b = build_basis(4);
  std::vector<Matrix> ops;
  for (const auto& e : single_set()) ops.push_back(e.op);
  const DesignMatrix a = design_matrix(ops, b);
  for (int t = 0; t < 10; ++t) {
    const DensityOperator rho(gen.density(4, gen.integer(1, 4)));
    const double photons = gen.uniform(1e3, 1e6);
    RealVector n(static_cast<Eigen::Index>(ops.size()));
    for (std::size_t j = 0; j < ops.size(); ++j) n(static_cast<Eigen::Index>(j)) = photons * naive_trace_product(ops[j], rho.matrix()).real();
    const RealVector x = photons * decompose(rho, b);
    EXPECT_LT((a.entries.transpose() * x - n).cwiseAbs().maxCoeff(), 1e-8 * photons);
  }
}
