#include "doctest.h"

#include "qcde/data.hpp"
#include "qcde/errors.hpp"
#include "qcde/likelihood.hpp"

#include <sstream>

using namespace qcde;

namespace {

double gauss2(cplx x, double s)
{
  return std::exp(-std::norm(x) / (2 * s * s)) / (2 * M_PI * s * s);
}

// Histogram of samples on the window, normalized as a density.
DensityGrid histogram(const std::vector<cplx>& pts, const GridSpec& w)
{
  DensityGrid h(w);
  const double sp = w.spacing();
  for (auto p : pts) {
    const int c = static_cast<int>(std::floor((p.real() + w.half_width) / sp));
    const int r = static_cast<int>(std::floor((p.imag() + w.half_width) / sp));
    if (r >= 0 && r < w.n && c >= 0 && c < w.n)
      h(r, c) += 1.0;
  }
  for (auto& v : h.values())
    v /= pts.size() * sp * sp;
  return h;
}

} // namespace

TEST_SUITE("data")
{
  TEST_CASE("example names")
  {
    for (Example e : { Example::halfg, Example::stroke, Example::waffle })
      CHECK(parse_example(to_string(e)) == e);
    CHECK_THROWS_AS(parse_example("blob"), ConfigError);
  }

  TEST_CASE("deformation formulas")
  {
    CHECK(std::abs(stroke_map(0.0)) == 0.0);
    const cplx s11 = stroke_map(cplx(1.0, 1.0));
    CHECK(s11.real() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s11.imag() == doctest::Approx((3.0 + 2.0 * std::tanh(1.0)) / 20.0 - 0.8 * std::sin(1.0)).epsilon(1e-15));
    const cplx w0 = waffle_map(0.0);
    CHECK(std::abs(w0.real()) < 1e-16);
    CHECK(w0.imag() == doctest::Approx(2.0 / (3.0 * M_PI)).epsilon(1e-15));
    CHECK(halfg_edge(0.0) == 0.0);
    CHECK(halfg_edge(1.0) == doctest::Approx(std::sin(5.0) / 15.0 - std::tanh(1.0) / 3.0).epsilon(1e-15));
  }

  TEST_CASE("samplers are deterministic and respect their construction")
  {
    for (Example e : { Example::halfg, Example::stroke, Example::waffle }) {
      const auto a = sample(e, 200, 17);
      const auto b = sample(e, 200, 17);
      const auto c = sample(e, 200, 18);
      CHECK(a.points == b.points);
      CHECK(a.points != c.points);
      CHECK(a.points.size() == 200);
    }
    const auto h = sample_halfg(20000, 3);
    double m1 = 0.0, m2 = 0.0;
    for (auto p : h.points) {
      const double x1 = p.real() - halfg_edge(p.imag());
      CHECK_MESSAGE(x1 <= 0.0, "edge constraint");
      m1 += x1;
      m2 += p.imag();
    }
    m1 /= h.points.size();
    m2 /= h.points.size();
    const double n = static_cast<double>(h.points.size());
    CHECK(std::abs(m2) < 4.0 * 0.5 / std::sqrt(n));
    // half-normal mean with sd 1/2
    const double hm = -0.5 * std::sqrt(2.0 / M_PI);
    CHECK(std::abs(m1 - hm) < 4.0 * 0.5 * std::sqrt(1.0 - 2.0 / M_PI) / std::sqrt(n));
  }

  TEST_CASE("true density values")
  {
    const double s0 = true_density(Example::stroke, stroke_map(0.0));
    CHECK(s0 == doctest::Approx(1.0 / (2 * M_PI) * 40.0 / 3.0).epsilon(1e-13));
    CHECK(true_density(Example::halfg, cplx(0.5, 0.0)) == 0.0);
    // halfg: twice the N(0, I/4) density left of the edge
    const cplx y(-0.3, 0.2);
    const cplx x(y.real() - halfg_edge(y.imag()), y.imag());
    CHECK(true_density(Example::halfg, y) == doctest::Approx(2.0 * gauss2(x, 0.5)).epsilon(1e-14));
    CHECK_THROWS_AS(true_density(Example::waffle, cplx(0.0, 5.0), 2.0), BranchSearchIncomplete);
  }

  TEST_CASE("true densities integrate to one")
  {
    for (Example e : { Example::halfg, Example::stroke, Example::waffle }) {
      const auto w = metric_window(e, 512);
      const cplx lo(-w.half_width, -w.half_width), hi(w.half_width, w.half_width);
      CHECK(true_mass(e, lo, hi) == doctest::Approx(1.0).epsilon(5e-3));
      CHECK(true_mass(e, cplx(-8.0, -8.0), cplx(8.0, 8.0), 30.0) == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(true_mass(Example::waffle, cplx(-3.0, -3.0), cplx(3.0, 3.0), 8.0) ==
          doctest::Approx(1.0).epsilon(5e-3));
    // node sums are fine away from fold singularities
    for (Example e : { Example::halfg, Example::stroke }) {
      const auto w = metric_window(e, 512);
      CHECK(quad(true_density_grid(e, w)) ==
            doctest::Approx(true_mass(e, cplx(-w.half_width, -w.half_width),
                                      cplx(w.half_width, w.half_width)))
              .epsilon(2e-3));
    }
    // the halfg edge splits the plane
    const double left = true_mass(Example::halfg, cplx(-8.0, -8.0), cplx(0.0, 8.0));
    const double right = true_mass(Example::halfg, cplx(0.0, -8.0), cplx(8.0, 8.0));
    CHECK(left + right == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(right > 0.0);
  }

  TEST_CASE("Monte Carlo histograms agree with true cell masses")
  {
    for (Example e : { Example::halfg, Example::stroke, Example::waffle }) {
      const GridSpec w = metric_window(e, 32);
      const auto pts = sample(e, 1000000, 99).points;
      const auto hist = histogram(pts, w);
      DensityGrid cell(w);
      const double sp = w.spacing();
      for (int r = 0; r < w.n; ++r)
        for (int c = 0; c < w.n; ++c) {
          const cplx lo(-w.half_width + c * sp, -w.half_width + r * sp);
          cell(r, c) = true_mass(e, lo, lo + cplx(sp, sp)) / (sp * sp);
        }
      CHECK_MESSAGE(metrics(hist, cell).l1 < 0.02, to_string(e));
    }
  }

  TEST_CASE("kernel estimate")
  {
    const GridSpec w{ 3.0, 128 };
    const std::vector<cplx> one{ 0.0 };
    const auto k = kde(one, 0.4, w);
    const auto t = gaussian_target(0.4);
    double err = 0.0;
    for (int r = 0; r < w.n; ++r)
      for (int c = 0; c < w.n; ++c)
        err = std::max(err, std::abs(k(r, c) - std::exp(t.logpdf(w.node(r, c)))));
    CHECK(err < 1e-14);

    const auto d = sample_stroke(300, 1);
    CHECK(quad(kde(d.points, 0.1, GridSpec{ 4.0, 256 })) == doctest::Approx(1.0).epsilon(1e-3));

    const auto truth = true_density_grid(Example::stroke, metric_window(Example::stroke, 128));
    const auto o = kde_oracle_ise(d.points, truth);
    REQUIRE(o.bandwidths.size() == 25);
    CHECK(o.bandwidths.front() == doctest::Approx(0.005));
    CHECK(o.bandwidths.back() == doctest::Approx(1.0));
    for (double v : o.ises)
      CHECK(o.ise <= v);
    CHECK(metrics(kde(d.points, o.bandwidth, truth.spec()), truth).ise == doctest::Approx(o.ise).epsilon(1e-12));
  }

  TEST_CASE("metrics")
  {
    const GridSpec w{ 8.0, 256 };
    const double delta = 0.7;
    const auto p = DensityGrid::sample(w, [](cplx z) { return gauss2(z, 1.0); });
    const auto q = DensityGrid::sample(w, [&](cplx z) { return gauss2(z - delta, 1.0); });
    const auto zero = metrics(p, p);
    CHECK(zero.ise == 0.0);
    CHECK(zero.hellinger2 == 0.0);
    CHECK(zero.l1 == 0.0);

    const auto m = metrics(p, q);
    // int p^2 = 1/(4 pi), int p q = exp(-delta^2/4)/(4 pi)
    CHECK(m.ise == doctest::Approx((1.0 - std::exp(-delta * delta / 4.0)) / (2 * M_PI)).epsilon(1e-8));
    // Bhattacharyya coefficient exp(-delta^2/8)
    CHECK(m.hellinger2 == doctest::Approx(1.0 - std::exp(-delta * delta / 8.0)).epsilon(1e-8));
    CHECK(m.hellinger == doctest::Approx(std::sqrt(m.hellinger2)));
    // L1 = 2 (2 Phi(delta/2) - 1); |p - q| has a kink, so only O(h^2)
    CHECK(m.l1 == doctest::Approx(2.0 * std::erf(delta / (2.0 * std::sqrt(2.0)))).epsilon(1e-3));

    auto neg = p;
    neg[5] = -1e-6;
    CHECK_THROWS_AS(metrics(neg, p), NegativeDensity);

    // bounds on random pairs
    const GridSpec small{ 2.0, 16 };
    for (int k = 0; k < 10; ++k) {
      DensityGrid a(small), b(small);
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = std::abs(std::sin(1.3 * i + k));
        b[i] = std::abs(std::cos(0.7 * i * k));
      }
      const double sa = quad(a), sb = quad(b);
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] /= sa;
        b[i] /= sb;
      }
      const auto mm = metrics(a, b);
      CHECK(mm.l1 <= 2.0 + 1e-12);
      CHECK(mm.hellinger2 <= 1.0 + 1e-12);
      CHECK(mm.hellinger2 <= 0.5 * mm.l1 + 1e-12);
    }
  }

  TEST_CASE("dataset CSV")
  {
    const auto d = sample_waffle(50, 4);
    std::stringstream ss;
    write_csv(ss, d);
    CHECK(ss.str().rfind("x,y\n", 0) == 0);
    const auto back = read_csv(ss);
    CHECK(back == d.points);

    std::stringstream bad("x,y\n1.0,abc\n");
    CHECK_THROWS_AS(read_csv(bad), FormatError);
    std::stringstream header("a,b\n1,2\n");
    CHECK_THROWS_AS(read_csv(header), FormatError);
  }
}
