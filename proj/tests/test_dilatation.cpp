#include "doctest.h"

#include "qcde/dilatation.hpp"

#include <random>
#include <sstream>

using namespace qcde;

namespace {

const cplx I(0.0, 1.0);

int mode_index(const BasisSpec& s, int k1, int k2)
{
  return (k1 + s.N) * s.side() + (k2 + s.N);
}

ParamVector random_theta(const BasisSpec& s, std::mt19937_64& rng, double scale)
{
  std::normal_distribution<double> nd;
  auto th = ParamVector::zeros(s);
  th.a = cplx(1.0 + 0.1 * nd(rng), 0.1 * nd(rng));
  th.b = cplx(0.1 * nd(rng), 0.1 * nd(rng));
  for (auto& c : th.coeffs)
    c = scale * nd(rng);
  return th;
}

double sup(const ComplexGrid& g)
{
  double m = 0.0;
  for (auto v : g.values())
    m = std::max(m, std::abs(v));
  return m;
}

} // namespace

TEST_SUITE("dilatation")
{
  TEST_CASE("basis layout")
  {
    for (int N : { 0, 1, 2, 6 }) {
      const BasisSpec s{ N, 3.0 };
      CHECK(s.count() == 2 * (2 * N + 1) * (2 * N + 1));
      CHECK(ParamVector::zeros(s).coeffs.size() == static_cast<std::size_t>(s.count()));
    }
    const BasisSpec s{ 2, 1.0 };
    CHECK(s.k1(0) == -2);
    CHECK(s.k2(0) == -2);
    CHECK(s.k1(mode_index(s, 1, -1)) == 1);
    CHECK(s.k2(mode_index(s, 1, -1)) == -1);
    CHECK_THROWS_AS(BasisSpec({ -1, 1.0 }).validate(), InvalidArgument);
    CHECK_THROWS_AS(BasisSpec({ 1, 0.0 }).validate(), InvalidArgument);
  }

  TEST_CASE("parameter vector validation and flat layout")
  {
    const BasisSpec s{ 1, 2.0 };
    auto th = ParamVector::zeros(s);
    CHECK_NOTHROW(th.validate(s));
    th.a = 0.0;
    CHECK_THROWS_AS(th.validate(s), InvalidArgument);
    th.a = 1.0;
    th.coeffs.pop_back();
    CHECK_THROWS_AS(th.validate(s), DimensionMismatch);
    th = ParamVector::zeros(s);
    th.coeffs[3] = std::nan("");
    CHECK_THROWS_AS(th.validate(s), InvalidArgument);

    std::mt19937_64 rng(1);
    const auto t = random_theta(s, rng, 0.3);
    const auto f = t.flat();
    CHECK(f[0] == t.a.real());
    CHECK(f[1] == t.a.imag());
    CHECK(f[2] == t.b.real());
    CHECK(f[3] == t.b.imag());
    const auto back = ParamVector::from_flat(f);
    CHECK(back.a == t.a);
    CHECK(back.b == t.b);
    CHECK(back.coeffs == t.coeffs);
  }

  TEST_CASE("bump values")
  {
    const double L = 2.0;
    CHECK(bump(0.0, 0.0, L) == 1.0);
    CHECK(bump(L, 0.0, L) == 0.0);
    CHECK(bump(0.0, -L, L) == 0.0);
    CHECK(bump(1.5 * L, 0.3, L) == 0.0);
    CHECK(bump(L / std::sqrt(2.0), L / std::sqrt(2.0), L) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(bump(L / 2.0, 0.0, L) == 0.99609375);
    for (double r : { 0.1, 0.5, 0.9, 0.999 }) {
      const double v = bump(r * L * 0.6, r * L * 0.8, L);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }

  TEST_CASE("phi evaluation examples")
  {
    const BasisSpec s{ 2, 1.5 };
    const GridSpec grid{ 3.0, 64 };
    auto th = ParamVector::zeros(s);
    CHECK(sup(eval_phi(th, s, grid)) == 0.0);

    th.coeffs[2 * mode_index(s, 0, 0)] = 1.0;
    const auto phi = eval_phi(th, s, grid);
    double err = 0.0;
    for (int r = 0; r < grid.n; ++r)
      for (int c = 0; c < grid.n; ++c) {
        const cplx z = grid.node(r, c);
        err = std::max(err, std::abs(phi(r, c) - bump(z.real(), z.imag(), s.L)));
      }
    CHECK(err < 1e-14);

    th = ParamVector::zeros(s);
    th.coeffs[2 * mode_index(s, 1, 0) + 1] = 1.0;
    CHECK(std::abs(eval_phi_at(th, s, 0.0) - I) < 1e-15);
    const cplx z(0.4, -0.3);
    const cplx expect = I * std::exp(I * M_PI * z.real() / s.L) * bump(z.real(), z.imag(), s.L);
    CHECK(std::abs(eval_phi_at(th, s, z) - expect) < 1e-14);
  }

  TEST_CASE("phi on the grid matches pointwise evaluation and vanishes off the disk")
  {
    const BasisSpec s{ 3, 1.0 };
    const GridSpec grid{ 2.0, 32 };
    std::mt19937_64 rng(2);
    const auto th = random_theta(s, rng, 0.2);
    const auto phi = eval_phi(th, s, grid);
    double err = 0.0, outside = 0.0;
    for (int r = 0; r < grid.n; ++r)
      for (int c = 0; c < grid.n; ++c) {
        const cplx z = grid.node(r, c);
        err = std::max(err, std::abs(phi(r, c) - eval_phi_at(th, s, z)));
        if (std::abs(z) >= s.L)
          outside = std::max(outside, std::abs(phi(r, c)));
      }
    CHECK(err < 1e-12);
    CHECK(outside == 0.0);
    CHECK_THROWS_AS(eval_phi(ParamVector::zeros(BasisSpec{ 2, 1.0 }), s, grid), DimensionMismatch);
  }

  TEST_CASE("basis elements")
  {
    const BasisSpec s{ 1, 1.0 };
    const cplx z(0.2, 0.35);
    for (int j = 0; j < s.count(); ++j) {
      auto th = ParamVector::zeros(s);
      th.coeffs[j] = 1.0;
      CHECK(std::abs(basis_element_at(j, s, z) - eval_phi_at(th, s, z)) < 1e-15);
    }
    CHECK(std::abs(basis_element_at(1, s, z) - I * basis_element_at(0, s, z)) < 1e-15);
  }

  TEST_CASE("phi to mu")
  {
    CHECK(phi_to_mu(cplx(0.0)) == cplx(0.0));
    CHECK(std::abs(phi_to_mu(cplx(1.0)) - 0.5) < 1e-15);
    CHECK(std::abs(phi_to_mu(3.0 * I) - 0.75 * I) < 1e-15);
    CHECK(std::abs(phi_to_mu(3.0 * I)) == doctest::Approx(0.75));

    const BasisSpec s{ 2, 1.0 };
    const GridSpec grid{ 2.0, 32 };
    std::mt19937_64 rng(4);
    const auto phi = eval_phi(random_theta(s, rng, 2.0), s, grid);
    const auto mu = phi_to_mu(phi);
    const double p = sup(phi);
    CHECK(sup(mu) < 1.0);
    CHECK(sup(mu) <= p / (1.0 + p) + 1e-15);
  }

  TEST_CASE("perturbation examples")
  {
    CHECK(std::abs(perturb_nu(cplx(0.0), cplx(0.3, -0.2)) - cplx(0.3, -0.2)) < 1e-15);
    CHECK(std::abs(perturb_nu(cplx(1.0), cplx(1.0)) - 0.25) < 1e-15);
    CHECK(std::abs(perturb_nu(I, cplx(1.0)) - 0.5) < 1e-15);
    // finite differences of T(z) = z/(1+|z|)
    const double e = 1e-7;
    auto fd = [&](cplx phi, cplx d) {
      return (phi_to_mu(phi + e * d) - phi_to_mu(phi - e * d)) / (2 * e);
    };
    CHECK(std::abs(fd(1.0, 1.0) - 0.25) < 1e-8);
    CHECK(std::abs(fd(I, 1.0) - 0.5) < 1e-8);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 20; ++k) {
      const cplx phi(nd(rng), nd(rng)), d(nd(rng), nd(rng));
      CHECK(std::abs(fd(phi, d) - perturb_nu(phi, d)) < 1e-7);
      CHECK(std::abs(perturb_nu(phi, d)) <= std::abs(d) / (1.0 + std::abs(phi)) + 1e-14);
    }
  }

  TEST_CASE("perturbation is first order and real linear")
  {
    const BasisSpec s{ 2, 1.0 };
    const GridSpec grid{ 2.0, 32 };
    std::mt19937_64 rng(9);
    const auto phi = eval_phi(random_theta(s, rng, 0.5), s, grid);
    const auto d1 = eval_phi(random_theta(s, rng, 0.5), s, grid);
    const auto d2 = eval_phi(random_theta(s, rng, 0.5), s, grid);
    const auto nu = perturb_nu(phi, d1);
    const auto mu = phi_to_mu(phi);
    auto defect = [&](double e) {
      ComplexGrid p(grid);
      for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = phi[i] + e * d1[i];
      const auto mu2 = phi_to_mu(p);
      double m = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i)
        m = std::max(m, std::abs(mu2[i] - mu[i] - e * nu[i]));
      return m / e;
    };
    CHECK(defect(1e-3) <= 0.15 * defect(1e-2));
    CHECK(defect(1e-4) <= 0.15 * defect(1e-3));

    const double al = 0.7, be = -1.3;
    ComplexGrid mix(grid);
    for (std::size_t i = 0; i < mix.size(); ++i)
      mix[i] = al * d1[i] + be * d2[i];
    const auto lhs = perturb_nu(phi, mix);
    const auto n1 = perturb_nu(phi, d1), n2 = perturb_nu(phi, d2);
    double err = 0.0, outside = 0.0;
    for (std::size_t i = 0; i < mix.size(); ++i) {
      err = std::max(err, std::abs(lhs[i] - al * n1[i] - be * n2[i]));
      if (std::abs(grid.node(static_cast<int>(i) / grid.n, static_cast<int>(i) % grid.n)) >= s.L)
        outside = std::max(outside, std::abs(lhs[i]));
    }
    CHECK(err < 1e-14);
    CHECK(outside == 0.0);
  }

  TEST_CASE("QTHETA round trip")
  {
    const BasisSpec s{ 2, 2.5 };
    std::mt19937_64 rng(10);
    auto th = random_theta(s, rng, 1.0);
    th.coeffs[0] = 0.1;
    th.coeffs[1] = 1.0 / 3.0;
    th.coeffs[2] = -5e-324;
    std::stringstream ss;
    write_qtheta(ss, th, s);
    CHECK(ss.str().rfind("QTHETA 2 2.5\n", 0) == 0);
    const auto [back, bs] = read_qtheta(ss);
    CHECK(bs == s);
    CHECK(back.a == th.a);
    CHECK(back.b == th.b);
    CHECK(back.coeffs == th.coeffs);

    std::stringstream bad("QTHETA 1 1.0\n1\n0\n0\n");
    CHECK_THROWS_AS(read_qtheta(bad), FormatError);
    std::stringstream junk("THETA 1 1.0\n");
    CHECK_THROWS_AS(read_qtheta(junk), FormatError);
  }
}
