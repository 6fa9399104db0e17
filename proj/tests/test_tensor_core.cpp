#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"

using namespace tlstm;

TEST(Unfold, SingleFiberIsIdentity) {
  Tensor3 t(1, 1, 4, {1.0, -2.0, 3.5, 0.25});
  const Matrix m = unfold_feature_mode(t);
  ASSERT_EQ(m.rows(), 4);
  ASSERT_EQ(m.cols(), 1);
  for (int f = 0; f < 4; ++f) EXPECT_EQ(m(f, 0), t(0, 0, static_cast<std::size_t>(f)));
}

TEST(Unfold, MatchesIndexArithmetic) {
  std::vector<double> v(12);
  std::iota(v.begin(), v.end(), 1.0);
  Tensor3 t(2, 3, 2, v);
  const Matrix m = unfold_feature_mode(t);
  const Matrix ref = oracle::unfold(t);
  ASSERT_EQ(m.rows(), 2);
  ASSERT_EQ(m.cols(), 6);
  EXPECT_EQ(m, ref);
  // Column j = s*W + w: sample 1, timestep 2 is column 5 holding entries 11, 12.
  EXPECT_EQ(m(0, 5), 11.0);
  EXPECT_EQ(m(1, 5), 12.0);
}

TEST(Unfold, RefoldRoundTripIsExact) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = 1 + rng.below(6), w = 1 + rng.below(5), f = 1 + rng.below(7);
    const Tensor3 t = oracle::random_tensor(rng, s, w, f);
    EXPECT_EQ(refold_feature_mode(unfold_feature_mode(t), s, w), t);
  }
}

TEST(Tensor3, RejectsNonFiniteAndBadLength) {
  EXPECT_THROW(Tensor3(1, 1, 2, {1.0}), Error);
  EXPECT_THROW(Tensor3(1, 1, 1, {std::nan("")}), Error);
  EXPECT_THROW(Tensor3(1, 0, 1), Error);
}

TEST(Gram, IdentityLikeAndZero) {
  Matrix id = Matrix::Identity(2, 2);
  EXPECT_EQ(gram_covariance(id), id);
  EXPECT_EQ(gram_covariance(Matrix::Zero(3, 5)), Matrix::Zero(3, 3));
}

TEST(Gram, MatchesTripleLoopAndIsSymmetric) {
  Rng rng(11);
  Matrix m(4, 50);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.normal();
  const Matrix c = gram_covariance(m);
  const Matrix ref = oracle::gram(m);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      EXPECT_LE(std::abs(c(i, j) - ref(i, j)), 1e-12 * std::abs(ref(i, j)) + 1e-14);
      EXPECT_EQ(c(i, j), c(j, i));
    }
}

TEST(SymEig, DiagonalCase) {
  Matrix c = Vector(Eigen::Vector3d(3, 1, 2)).asDiagonal();
  const SymEig e = sym_eig(c);
  EXPECT_EQ(e.eigenvalues(0), 3.0);
  EXPECT_EQ(e.eigenvalues(1), 2.0);
  EXPECT_EQ(e.eigenvalues(2), 1.0);
  EXPECT_EQ(std::abs(e.eigenvectors(0, 0)), 1.0);
  EXPECT_EQ(std::abs(e.eigenvectors(2, 1)), 1.0);
  EXPECT_EQ(std::abs(e.eigenvectors(1, 2)), 1.0);
}

TEST(SymEig, TwoByTwoClosedForm) {
  Matrix c(2, 2);
  c << 2, 1, 1, 2;
  const SymEig e = sym_eig(c);
  // Characteristic polynomial (2 - l)^2 - 1 = 0 gives l = 3, 1.
  EXPECT_NEAR(e.eigenvalues(0), 3.0, 1e-14);
  EXPECT_NEAR(e.eigenvalues(1), 1.0, 1e-14);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(e.eigenvectors(0, 0)), r, 1e-14);
  EXPECT_NEAR(e.eigenvectors(0, 0) * e.eigenvectors(1, 0), 0.5, 1e-14);   // (1, 1) direction
  EXPECT_NEAR(e.eigenvectors(0, 1) * e.eigenvectors(1, 1), -0.5, 1e-14);  // (1, -1) direction
}

TEST(SymEig, RandomReconstructionAndOrthogonality) {
  Rng rng(5);
  const Matrix c = oracle::random_symmetric(rng, 10);
  const SymEig e = sym_eig(c);
  const Matrix rec = e.eigenvectors * e.eigenvalues.asDiagonal() * e.eigenvectors.transpose();
  EXPECT_LT((rec - c).norm() / c.norm(), 1e-9);
  EXPECT_LT((e.eigenvectors.transpose() * e.eigenvectors - Matrix::Identity(10, 10)).norm(), 1e-10);
  for (Eigen::Index i = 1; i < 10; ++i) EXPECT_GE(e.eigenvalues(i - 1), e.eigenvalues(i));
}

TEST(SymEig, Errors) {
  Matrix c(2, 2);
  c << 1, 2, 0, 1;
  try {
    sym_eig(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonSymmetric);
  }
  Rng rng(1);
  const Matrix s = oracle::random_symmetric(rng, 6);
  try {
    sym_eig(s, JacobiOptions{.max_sweeps = 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoConvergence);
  }
}

TEST(SymEig, ZeroAndOneByOne) {
  const SymEig z = sym_eig(Matrix::Zero(3, 3));
  EXPECT_EQ(z.eigenvalues, Vector::Zero(3));
  Matrix one(1, 1);
  one << -4.0;
  EXPECT_EQ(sym_eig(one).eigenvalues(0), -4.0);
}

TEST(Projection, FullRankReconstructs) {
  Rng rng(8);
  const Tensor3 t = oracle::standardize_features(oracle::random_tensor(rng, 20, 5, 6));
  const ProjectionModel p = fit_projection(t, 6);
  const Tensor3 proj = project(t, p);
  const Matrix back = p.u_reduced * unfold_feature_mode(proj);
  EXPECT_LT((back - unfold_feature_mode(t)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(p.retained_variance_fraction(), 1.0, 1e-12);
}

TEST(Projection, PaperConfigurationFourteenToTen) {
  Rng rng(21);
  const Tensor3 t = oracle::standardize_features(oracle::random_tensor(rng, 40, 10, 14));
  const ProjectionModel p = fit_projection(t, 10);
  EXPECT_EQ(p.k, 10u);
  EXPECT_EQ(p.u_reduced.rows(), 14);
  EXPECT_EQ(p.u_reduced.cols(), 10);
  const Tensor3 out = project(t, p);
  EXPECT_EQ(out.dims(), (std::array<std::size_t, 3>{40, 10, 10}));
  EXPECT_LT((p.u_reduced.transpose() * p.u_reduced - Matrix::Identity(10, 10)).norm(), 1e-10);
}

TEST(Projection, SignConventionLargestEntryPositive) {
  Rng rng(4);
  const Tensor3 t = oracle::random_tensor(rng, 30, 4, 5);
  const ProjectionModel p = fit_projection(t, 5);
  for (Eigen::Index j = 0; j < 5; ++j) {
    Eigen::Index arg = 0;
    p.u_reduced.col(j).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(p.u_reduced(arg, j), 0.0);
  }
}

TEST(Projection, VarianceOptimalAmongEigenSubsets) {
  Rng rng(17);
  const Tensor3 t = oracle::random_tensor(rng, 25, 4, 7);
  const Matrix gram = oracle::gram(oracle::unfold(t));
  const SymEig e = sym_eig(gram);
  for (std::size_t k = 1; k <= 7; ++k) {
    const ProjectionModel p = fit_projection(t, k);
    const double chosen = (p.u_reduced.transpose() * gram * p.u_reduced).trace();
    EXPECT_NEAR(p.retained_variance_fraction(), chosen / gram.trace(), 1e-10);
    // Every k-subset of eigenvectors retains no more Gram trace.
    std::vector<int> sel(7, 0);
    std::fill(sel.begin(), sel.begin() + static_cast<long>(k), 1);
    std::sort(sel.begin(), sel.end());
    do {
      double tr = 0.0;
      for (int i = 0; i < 7; ++i)
        if (sel[static_cast<std::size_t>(i)]) tr += e.eigenvectors.col(i).dot(gram * e.eigenvectors.col(i));
      EXPECT_LE(tr, chosen * (1 + 1e-12) + 1e-12);
    } while (std::next_permutation(sel.begin(), sel.end()));
  }
}

TEST(Projection, IdentityProjectionIsNoOp) {
  Rng rng(2);
  const Tensor3 t = oracle::random_tensor(rng, 3, 4, 5);
  ProjectionModel p;
  p.k = 5;
  p.u_reduced = Matrix::Identity(5, 5);
  EXPECT_EQ(project(t, p), t);
}

TEST(Projection, SingleRowMatchesDotProducts) {
  Rng rng(9);
  const Tensor3 train = oracle::random_tensor(rng, 10, 3, 4);
  const ProjectionModel p = fit_projection(train, 2);
  const Tensor3 one = oracle::random_tensor(rng, 1, 1, 4);
  const Tensor3 out = project(one, p);
  for (std::size_t j = 0; j < 2; ++j) {
    double s = 0.0;
    for (std::size_t f = 0; f < 4; ++f) s += one(0, 0, f) * p.u_reduced(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(j));
    EXPECT_NEAR(out(0, 0, j), s, 1e-14);
  }
}

TEST(Projection, DecorrelatesTrainingData) {
  Rng rng(12);
  const Tensor3 t = oracle::standardize_features(oracle::random_tensor(rng, 50, 10, 6));
  const ProjectionModel p = fit_projection(t, 4);
  const Matrix g = oracle::gram(oracle::unfold(project(t, p)));
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      if (i != j) EXPECT_LT(std::abs(g(i, j)), 1e-8 * g.diagonal().maxCoeff());
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(g(i, i), p.retained_eigenvalues(i), 1e-8 * g(i, i));
}

TEST(Projection, EnergyNeverIncreases) {
  Rng rng(13);
  const Tensor3 t = oracle::random_tensor(rng, 15, 4, 6);
  const double e0 = unfold_feature_mode(t).squaredNorm();
  for (std::size_t k = 1; k <= 6; ++k) {
    const double ek = unfold_feature_mode(project(t, fit_projection(t, k))).squaredNorm();
    EXPECT_LE(ek, e0 * (1 + 1e-12));
    if (k == 6) EXPECT_NEAR(ek, e0, 1e-9 * e0);
  }
}

TEST(Projection, Errors) {
  Rng rng(1);
  const Tensor3 t = oracle::random_tensor(rng, 4, 2, 3);
  try {
    fit_projection(t, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RankTooLarge);
  }
  const ProjectionModel p = fit_projection(t, 2);
  try {
    project(oracle::random_tensor(rng, 2, 2, 5), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimMismatch);
  }
}

TEST(Projection, TiesKeepJacobiOrder) {
  // Two equal eigenvalues: the ordering must be reproducible run to run.
  Matrix c = Matrix::Identity(3, 3) * 2.0;
  c(2, 2) = 5.0;
  const SymEig a = sym_eig(c);
  const SymEig b = sym_eig(c);
  EXPECT_EQ(a.eigenvectors, b.eigenvectors);
  EXPECT_EQ(a.eigenvalues(0), 5.0);
  EXPECT_EQ(std::abs(a.eigenvectors(0, 1)), 1.0);  // original column 0 before column 1
}
