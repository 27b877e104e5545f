#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "doctest.h"
#include "lpcsvrg/errors.hpp"
#include "lpcsvrg/problem.hpp"
#include "lpcsvrg/vec.hpp"

using namespace lpcsvrg;

namespace {

std::shared_ptr<const Dataset> tiny_dataset() {
  auto ds = std::make_shared<Dataset>();
  ds->n = 2;
  ds->d = 2;
  ds->features = {1.0, 0.0, 0.0, 1.0};
  ds->targets = {1.0, 1.0};
  ds->provenance = "test";
  return ds;
}

// solve (A^T A) x = A^T b by gaussian elimination, enough for small tests
std::vector<double> normal_equations(const Dataset& ds) {
  const std::size_t d = ds.d;
  std::vector<double> m(d * d, 0.0), rhs(d, 0.0);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const auto a = ds.row(i);
    for (std::size_t p = 0; p < d; ++p) {
      rhs[p] += a[p] * ds.targets[i];
      for (std::size_t q = 0; q < d; ++q) m[p * d + q] += a[p] * a[q];
    }
  }
  for (std::size_t p = 0; p < d; ++p) {
    std::size_t piv = p;
    for (std::size_t r = p + 1; r < d; ++r)
      if (std::fabs(m[r * d + p]) > std::fabs(m[piv * d + p])) piv = r;
    for (std::size_t q = 0; q < d; ++q) std::swap(m[p * d + q], m[piv * d + q]);
    std::swap(rhs[p], rhs[piv]);
    for (std::size_t r = 0; r < d; ++r) {
      if (r == p) continue;
      const double f = m[r * d + p] / m[p * d + p];
      for (std::size_t q = 0; q < d; ++q) m[r * d + q] -= f * m[p * d + q];
      rhs[r] -= f * rhs[p];
    }
  }
  for (std::size_t p = 0; p < d; ++p) rhs[p] /= m[p * d + p];
  return rhs;
}

}  // namespace

TEST_CASE("proximal maps hit their closed forms") {
  const NonsmoothTerm l1 = NonsmoothTerm::l1(1.0);
  CHECK(l1.prox(1.0, std::vector<double>{3.0, -0.5}) == std::vector<double>{2.0, 0.0});
  CHECK(l1.value(std::vector<double>{3.0, -0.5}) == 3.5);

  const NonsmoothTerm l2 = NonsmoothTerm::l2_squared(1.0);
  CHECK(l2.prox(1.0, std::vector<double>{2.0}) == std::vector<double>{1.0});
  CHECK(l2.value(std::vector<double>{2.0}) == 2.0);

  const NonsmoothTerm box = NonsmoothTerm::box(0.0, 1.0);
  CHECK(box.prox(0.3, std::vector<double>{-1.0, 0.5, 2.0}) ==
        std::vector<double>{0.0, 0.5, 1.0});
  CHECK(box.value(std::vector<double>{0.5}) == 0.0);
  CHECK(box.value(std::vector<double>{2.0}) == std::numeric_limits<double>::infinity());

  const NonsmoothTerm none = NonsmoothTerm::zero();
  CHECK(none.prox(1.0, std::vector<double>{5.0}) == std::vector<double>{5.0});
  CHECK(none.value(std::vector<double>{5.0}) == 0.0);

  CHECK(l2.strong_convexity() == 1.0);
  CHECK(l1.strong_convexity() == 0.0);

  CHECK_THROWS_AS(NonsmoothTerm::l1(-1.0), ConfigInvalid);
  CHECK_THROWS_AS(NonsmoothTerm::box(1.0, 0.0), ConfigInvalid);
}

TEST_CASE("smoothness is the largest row norm") {
  auto ds = std::make_shared<Dataset>();
  ds->n = 2;
  ds->d = 2;
  ds->features = {1.0, 2.0, 3.0, 0.0};
  ds->targets = {0.0, 0.0};
  const CompositeProblem p(ds, NonsmoothTerm::zero());
  CHECK(p.smoothness() == 9.0);
}

TEST_CASE("gradients match a finite difference probe") {
  const SyntheticProblem sp = make_synthetic(5, 20, 0.5, 42);
  const CompositeProblem p(sp.data, NonsmoothTerm::zero());
  std::vector<double> x(5);
  for (std::size_t j = 0; j < 5; ++j) x[j] = 0.1 * static_cast<double>(j) - 0.2;
  const std::vector<double> g = p.full_grad(x);
  const double h = 1e-6;
  for (std::size_t j = 0; j < 5; ++j) {
    std::vector<double> xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double fd = (p.smooth_loss(xp) - p.smooth_loss(xm)) / (2.0 * h);
    CHECK(g[j] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("noise free synthetic data is solved by its planted vector") {
  const SyntheticProblem sp = make_synthetic(4, 50, 0.0, 7);
  const std::vector<double> sol = normal_equations(*sp.data);
  CHECK(std::sqrt(vec::norm_sq(vec::sub(sol, sp.x_star))) < 1e-8);
  const CompositeProblem p(sp.data, NonsmoothTerm::zero());
  CHECK(p.smooth_loss(sp.x_star) < 1e-16);
  CHECK(vec::norm_sq(p.full_grad(sp.x_star)) < 1e-16);
}

TEST_CASE("synthetic data is reproducible and seed sensitive") {
  const Dataset a = make_synthetic_dataset(6, 30, 1.0, 3);
  const Dataset b = make_synthetic_dataset(6, 30, 1.0, 3);
  const Dataset c = make_synthetic_dataset(6, 30, 1.0, 4);
  CHECK(a.content_hash() == b.content_hash());
  CHECK(a.content_hash() != c.content_hash());
  CHECK(a.features == b.features);
}

TEST_CASE("sample gradients compose into the full gradient") {
  const SyntheticProblem sp = make_synthetic(3, 10, 1.0, 11);
  const CompositeProblem p(sp.data, NonsmoothTerm::zero());
  const std::vector<double> x{0.5, -1.0, 2.0};
  std::vector<double> acc(3, 0.0);
  for (std::size_t i = 0; i < 10; ++i) p.add_sample_grad(i, x, 1.0 / 10.0, acc);
  const std::vector<double> g = p.full_grad(x);
  for (std::size_t j = 0; j < 3; ++j) CHECK(acc[j] == doctest::Approx(g[j]).epsilon(1e-12));
}

TEST_CASE("batch gradient differences") {
  auto ds = tiny_dataset();
  const CompositeProblem p(ds, NonsmoothTerm::zero());
  const std::vector<double> x{2.0, 0.0};
  const std::vector<double> xt{0.0, 0.0};

  std::vector<double> out(2);
  const std::vector<std::size_t> b0{0};
  p.batch_grad_diff(b0, x, xt, out);
  CHECK(out == std::vector<double>{2.0, 0.0});

  const std::vector<std::size_t> b01{0, 1};
  p.batch_grad_diff(b01, x, xt, out);
  CHECK(out == std::vector<double>{1.0, 0.0});

  // the full batch reproduces the difference of full gradients
  const std::vector<double> gx = p.full_grad(x);
  const std::vector<double> gt = p.full_grad(xt);
  for (std::size_t j = 0; j < 2; ++j)
    CHECK(out[j] == doctest::Approx(gx[j] - gt[j]).epsilon(1e-12));

  std::vector<double> acc(2, 0.0);
  CHECK_THROWS_AS(p.add_sample_grad(2, x, 1.0, acc), IndexOutOfRange);
}

TEST_CASE("gradient mapping reduces to the prox step residual") {
  auto ds = std::make_shared<Dataset>();
  ds->n = 1;
  ds->d = 1;
  ds->features = {1.0};
  ds->targets = {0.0};
  const CompositeProblem p(ds, NonsmoothTerm::l1(1.0));
  const std::vector<double> g = gradient_mapping(p, std::vector<double>{3.0}, 1.0);
  CHECK(g == std::vector<double>{3.0});
  CHECK_THROWS_AS(gradient_mapping(p, std::vector<double>{3.0}, 0.0), ConfigInvalid);
}

TEST_CASE("libsvm text parses into a dense dataset") {
  const Dataset ds = parse_libsvm("3.5 1:1.0 3:-2.0\n", "inline");
  CHECK(ds.n == 1);
  CHECK(ds.d == 3);
  CHECK(ds.targets == std::vector<double>{3.5});
  CHECK(ds.features == std::vector<double>{1.0, 0.0, -2.0});

  const Dataset two = parse_libsvm("1 1:1\n-1 2:0.5\n", "inline");
  CHECK(two.n == 2);
  CHECK(two.d == 2);
  CHECK(two.features == std::vector<double>{1.0, 0.0, 0.0, 0.5});

  // comments and blank lines are skipped without losing line numbers
  const Dataset skip = parse_libsvm("# header\n\n2 1:4\n", "inline");
  CHECK(skip.n == 1);
  CHECK(skip.targets == std::vector<double>{2.0});
}

TEST_CASE("libsvm parse errors carry line numbers") {
  CHECK_THROWS_AS(parse_libsvm("abc 1:1\n", "inline"), ParseError);
  try {
    parse_libsvm("1 1:1\nabc 1:1\n", "inline");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
  CHECK_THROWS_AS(parse_libsvm("1 0:5\n", "inline"), ParseError);
  CHECK_THROWS_AS(parse_libsvm("1 2\n", "inline"), ParseError);
  CHECK_THROWS_AS(parse_libsvm("1 a:b\n", "inline"), ParseError);
  CHECK_THROWS_AS(parse_libsvm("", "inline"), EmptyDataset);
  CHECK_THROWS_AS(parse_libsvm("# nothing\n", "inline"), EmptyDataset);
  CHECK_THROWS_AS(load_libsvm("/nonexistent/file.libsvm"), EmptyDataset);
}
