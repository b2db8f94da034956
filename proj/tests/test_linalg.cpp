#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "pfr/linalg.hpp"
#include "pfr/random.hpp"

using pfr::Matrix;
using pfr::SymmetricMatrix;

namespace {

Matrix random_symmetric(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  pfr::Rng rng(seed);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = scale * rng.uniform(-1.0, 1.0);
  return a;
}

// det(A - lambda I) by Gaussian elimination with partial pivoting.
double char_poly(const Matrix& a, double lambda) {
  const std::size_t n = a.rows();
  std::vector<double> m(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] -= lambda;
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r * n + c]) > std::abs(m[piv * n + c])) piv = r;
    if (m[piv * n + c] == 0.0) return 0.0;
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(m[c * n + k], m[piv * n + k]);
      det = -det;
    }
    det *= m[c * n + c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = m[r * n + c] / m[c * n + c];
      for (std::size_t k = c; k < n; ++k) m[r * n + k] -= f * m[c * n + k];
    }
  }
  return det;
}

// All real roots of det(A - lambda I) on the Gershgorin interval by a fine
// sign-change scan refined with bisection.
std::vector<double> characteristic_roots(const Matrix& a) {
  const std::size_t n = a.rows();
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) r += std::abs(a(i, j));
    lo = std::min(lo, a(i, i) - r);
    hi = std::max(hi, a(i, i) + r);
  }
  lo -= 1e-3;
  hi += 1e-3;
  const int steps = 200000;
  std::vector<double> roots;
  double prev_x = lo;
  double prev_f = char_poly(a, lo);
  for (int s = 1; s <= steps; ++s) {
    const double x = lo + (hi - lo) * s / steps;
    const double f = char_poly(a, x);
    if (prev_f == 0.0) {
      roots.push_back(prev_x);
    } else if ((prev_f < 0) != (f < 0) && f != 0.0) {
      double l = prev_x;
      double h = x;
      double fl = prev_f;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (l + h);
        const double fm = char_poly(a, mid);
        if ((fm < 0) == (fl < 0)) {
          l = mid;
          fl = fm;
        } else {
          h = mid;
        }
      }
      roots.push_back(0.5 * (l + h));
    }
    prev_x = x;
    prev_f = f;
  }
  return roots;
}

void expect_valid_pairs(const SymmetricMatrix& sym, const pfr::EigenPairs& pairs) {
  const Matrix& a = sym.entries();
  const double bound = 1e-8 * (1.0 + pfr::frobenius_norm(a));
  const std::size_t d = pairs.values.size();
  ASSERT_EQ(pairs.vectors.cols(), d);
  for (std::size_t k = 0; k + 1 < d; ++k) EXPECT_LE(pairs.values[k], pairs.values[k + 1]);
  for (std::size_t k = 0; k < d; ++k) {
    const auto v = pairs.vectors.column(k);
    const auto av = pfr::multiply(a, v);
    double r = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) r += std::pow(av[i] - pairs.values[k] * v[i], 2);
    EXPECT_LE(std::sqrt(r), bound);
    for (std::size_t l = 0; l < d; ++l) {
      const auto w = pairs.vectors.column(l);
      double dot = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * w[i];
      EXPECT_NEAR(dot, k == l ? 1.0 : 0.0, 1e-8);
    }
  }
}

}  // namespace

TEST(Matrix, ProductsAndTranspose) {
  const Matrix a{{1, 2, 3}, {4, 5, 6}};
  const Matrix b{{1, 0}, {0, 1}, {1, 1}};
  EXPECT_EQ(a * b, (Matrix{{4, 5}, {10, 11}}));
  EXPECT_EQ(pfr::transpose(a), (Matrix{{1, 4}, {2, 5}, {3, 6}}));
  const std::vector<double> x{1, 1, 1};
  EXPECT_EQ(pfr::multiply(a, x), (std::vector<double>{6, 15}));
  const std::vector<double> y{1, -1};
  EXPECT_EQ(pfr::multiply_transposed(a, y), (std::vector<double>{-3, -3, -3}));
  EXPECT_THROW(a * a, pfr::DimensionError);
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), pfr::DimensionError);
}

TEST(SymmetricMatrix, SymmetrizesAndValidates) {
  const SymmetricMatrix s(Matrix{{1, 2}, {4, 1}});
  EXPECT_EQ(s(0, 1), 3.0);
  EXPECT_EQ(s(1, 0), 3.0);
  EXPECT_THROW(SymmetricMatrix(Matrix(2, 3)), pfr::DimensionError);
  EXPECT_THROW(SymmetricMatrix{Matrix()}, pfr::DimensionError);
  EXPECT_THROW(SymmetricMatrix(Matrix{{1, NAN}, {0, 1}}), pfr::InputError);
  EXPECT_THROW(SymmetricMatrix(Matrix{{INFINITY}}), pfr::InputError);
}

TEST(Eigh, IdentityKeepsUnitValues) {
  const SymmetricMatrix a(Matrix::identity(3));
  const auto pairs = pfr::eigh_smallest(a, 2);
  EXPECT_EQ(pairs.values, (std::vector<double>{1.0, 1.0}));
  expect_valid_pairs(a, pairs);
}

TEST(Eigh, TwoByTwoAnalytic) {
  const SymmetricMatrix a(Matrix{{2, 1}, {1, 2}});
  const auto pairs = pfr::eigh_smallest(a, 2);
  EXPECT_NEAR(pairs.values[0], 1.0, 1e-14);
  EXPECT_NEAR(pairs.values[1], 3.0, 1e-14);
  const double r = 1.0 / std::sqrt(2.0);
  // Largest-magnitude entry positive, ties to the lower index.
  EXPECT_NEAR(pairs.vectors(0, 0), r, 1e-14);
  EXPECT_NEAR(pairs.vectors(1, 0), -r, 1e-14);
  EXPECT_NEAR(pairs.vectors(0, 1), r, 1e-14);
  EXPECT_NEAR(pairs.vectors(1, 1), r, 1e-14);
}

TEST(Eigh, SignConventionMakesLargestEntryPositive) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SymmetricMatrix a(random_symmetric(7, seed));
    const auto pairs = pfr::eigh(a);
    for (std::size_t k = 0; k < 7; ++k) {
      const auto v = pairs.vectors.column(k);
      std::size_t best = 0;
      for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
      EXPECT_GT(v[best], 0.0);
    }
  }
}

TEST(Eigh, RandomSixBySixMatchesCharacteristicRoots) {
  const Matrix m = random_symmetric(6, 42);
  const auto pairs = pfr::eigh_smallest(SymmetricMatrix(m), 3);
  const auto roots = characteristic_roots(m);
  ASSERT_EQ(roots.size(), 6u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(pairs.values[k], roots[k], 1e-7);
}

TEST(Eigh, ResidualAndOrthonormalityOnRandomInputs) {
  for (std::size_t n : {1u, 2u, 5u, 12u, 30u}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const SymmetricMatrix a(random_symmetric(n, 100 * n + seed, 10.0));
      const auto pairs = pfr::eigh_smallest(a, std::max<std::size_t>(1, n / 2));
      expect_valid_pairs(a, pairs);
    }
  }
}

TEST(Eigh, RepeatedEigenvaluesStillOrthonormal) {
  // Q diag(1,1,1,5,5) Q^T with a random rotation.
  pfr::Rng rng(9);
  Matrix g(5, 5);
  for (double& v : g.data()) v = rng.normal();
  Matrix q = pfr::eigh(SymmetricMatrix(g + pfr::transpose(g))).vectors;
  Matrix d(5, 5);
  const double diag[] = {1, 1, 1, 5, 5};
  for (std::size_t i = 0; i < 5; ++i) d(i, i) = diag[i];
  const SymmetricMatrix a(q * d * pfr::transpose(q));
  const auto pairs = pfr::eigh_smallest(a, 4);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(pairs.values[k], 1.0, 1e-10);
  EXPECT_NEAR(pairs.values[3], 5.0, 1e-10);
  expect_valid_pairs(a, pairs);
}

TEST(Eigh, FullSpectrumReproducesTrace) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix m = random_symmetric(9, seed, 3.0);
    const auto pairs = pfr::eigh(SymmetricMatrix(m));
    double sum = 0.0;
    for (double v : pairs.values) sum += v;
    EXPECT_NEAR(sum, pfr::trace(m), 1e-8 * (1.0 + std::abs(pfr::trace(m))));
  }
}

TEST(Eigh, DeterministicBitwise) {
  const SymmetricMatrix a(random_symmetric(15, 3));
  const auto p1 = pfr::eigh_smallest(a, 5);
  const auto p2 = pfr::eigh_smallest(a, 5);
  EXPECT_EQ(p1.values, p2.values);
  EXPECT_EQ(p1.vectors, p2.vectors);
}

TEST(Eigh, RejectsBadDimension) {
  const SymmetricMatrix a(Matrix::identity(3));
  EXPECT_THROW(pfr::eigh_smallest(a, 4), pfr::DimensionError);
  EXPECT_THROW(pfr::eigh_smallest(a, 0), pfr::DimensionError);
}

TEST(Eigh, ZeroMatrix) {
  const SymmetricMatrix a(Matrix(4, 4));
  const auto pairs = pfr::eigh_smallest(a, 2);
  EXPECT_EQ(pairs.values, (std::vector<double>{0.0, 0.0}));
  expect_valid_pairs(a, pairs);
}

TEST(SolveSpd, MatchesDirectProduct) {
  const Matrix a{{4, 1, 0}, {1, 3, 1}, {0, 1, 2}};
  const std::vector<double> x{1, -2, 3};
  const auto b = pfr::multiply(a, x);
  const auto solved = pfr::solve_spd(a, b);
  ASSERT_TRUE(solved);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR((*solved)[i], x[i], 1e-12);
  EXPECT_FALSE(pfr::solve_spd(Matrix{{1, 2}, {2, 1}}, std::vector<double>{1, 1}));
}
