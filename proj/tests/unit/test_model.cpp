#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "extmil/calculus.hpp"
#include "extmil/errors.hpp"
#include "extmil/models.hpp"
#include "extmil/presets.hpp"

using namespace extmil;

namespace {

ScalarField square() {
  return {[](std::span<const double> x, std::span<double> g) { g[0] = 2.0 * x[0]; },
          [](std::span<const double>, std::span<double> h) { h[0] = 2.0; }};
}

ScalarField identity() {
  return {[](std::span<const double>, std::span<double> g) { g[0] = 1.0; }, {}};
}

ScalarField constant() {
  return {[](std::span<const double>, std::span<double> g) { std::fill(g.begin(), g.end(), 0.0); },
          [](std::span<const double>, std::span<double> h) { std::fill(h.begin(), h.end(), 0.0); }};
}

// Zero drift, constant diffusion columns.
SdeModel additive_model(std::size_t n, std::size_t d, double drift_scale = 0.0) {
  FieldSpec drift{[=](std::span<const double> x, std::span<double> out) {
                    for (std::size_t i = 0; i < out.size(); ++i) out[i] = drift_scale * x[i];
                  },
                  [=](std::span<const double>, std::span<double> out) {
                    std::fill(out.begin(), out.end(), 0.0);
                    for (std::size_t i = 0; i < n; ++i) out[i * n + i] = drift_scale;
                  },
                  [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); }};
  std::vector<FieldSpec> diffusion;
  for (std::size_t j = 0; j < d; ++j) {
    diffusion.push_back({[=](std::span<const double>, std::span<double> out) {
                           for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.1 * static_cast<double>(i + j + 1);
                         },
                         [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); },
                         [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); }});
  }
  return make_function_model("additive", n, drift, diffusion);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

const StateVector kHestonPoint{100.0, 0.09, 0.0};

// Hand-derived Heston operator applications with c = nu sqrt(1 - rho^2).
struct HestonOracle {
  double nu = 0.1, rho = 0.7;
  double c() const { return nu * std::sqrt(1.0 - rho * rho); }
  StateVector l1_sigma2(const StateVector&) const { return {0.0, c() * nu * rho / 2.0, 0.0}; }
  StateVector l2_sigma1(const StateVector& x) const { return {x[0] * c() / 2.0, nu * rho * c() / 2.0, 0.0}; }
  StateVector bracket12(const StateVector& x) const { return {-c() * x[0] / 2.0, 0.0, 0.0}; }
};

std::vector<StateVector> sample_points(const std::string& id, std::size_t count, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<StateVector> points;
  for (std::size_t p = 0; p < count; ++p) {
    if (id == "heston-asian") {
      points.push_back({50.0 + 100.0 * u(rng), 0.01 + 0.3 * u(rng), 100.0 * u(rng)});
    } else if (id == "bs-asian") {
      points.push_back({50.0 + 100.0 * u(rng), 100.0 * u(rng)});
    } else if (id == "gbm") {
      points.push_back({50.0 + 100.0 * u(rng)});
    } else {
      points.push_back({-2.0 + 4.0 * u(rng), -2.0 + 4.0 * u(rng)});
    }
  }
  return points;
}

}  // namespace

TEST_CASE("apply_L on GBM") {
  const auto gbm = make_gbm({0.1, 0.2});
  const StateVector one{1.0};
  CHECK(apply_L(gbm, 0, square(), one) == doctest::Approx(0.24).epsilon(1e-14));
  const StateVector five{5.0};
  CHECK(apply_L(gbm, 1, identity(), five) == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t j = 0; j <= 1; ++j) CHECK(apply_L(gbm, j, constant(), five) == 0.0);
  CHECK_THROWS_AS(apply_L(gbm, 0, identity(), five), ContractViolation);
  CHECK_THROWS_AS(apply_L(gbm, 2, identity(), five), ContractViolation);
  const StateVector wrong{1.0, 2.0};
  CHECK_THROWS_AS(apply_L(gbm, 1, identity(), wrong), ContractViolation);
}

TEST_CASE("l_sigma on GBM and constant diffusion") {
  const auto gbm = make_gbm({0.1, 0.2});
  const StateVector s{100.0};
  CHECK(l_sigma(gbm, 1, 1, s)[0] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(l_sigma(gbm, 0, 0, s)[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(l_sigma(gbm, 2, 0, s), ContractViolation);

  const auto additive = additive_model(3, 2);
  const StateVector x{0.3, -1.0, 2.0};
  for (std::size_t j1 = 1; j1 <= 2; ++j1) {
    for (std::size_t j2 = 1; j2 <= 2; ++j2) {
      for (double v : l_sigma(additive, j1, j2, x)) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("Heston Lie bracket matches the symbolic oracle") {
  const auto heston = make_heston_asian();
  const HestonOracle oracle;
  const auto b12 = lie_bracket(heston, 1, 2, kHestonPoint);
  const auto b21 = lie_bracket(heston, 2, 1, kHestonPoint);
  const auto expected = oracle.bracket12(kHestonPoint);
  CHECK(expected[0] == doctest::Approx(-3.570714).epsilon(1e-6));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rel(b12[i], expected[i]) < 1e-10);
    CHECK(rel(b21[i], -expected[i]) < 1e-10);
  }
  for (std::size_t j = 1; j <= 2; ++j) {
    for (double v : lie_bracket(heston, j, j, kHestonPoint)) CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(lie_bracket(heston, 0, 1, kHestonPoint), ContractViolation);
  CHECK_THROWS_AS(lie_bracket(heston, 1, 3, kHestonPoint), ContractViolation);

  const auto l12 = l_sigma(heston, 1, 2, kHestonPoint);
  const auto l21 = l_sigma(heston, 2, 1, kHestonPoint);
  const auto o12 = oracle.l1_sigma2(kHestonPoint), o21 = oracle.l2_sigma1(kHestonPoint);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rel(l12[i], o12[i]) < 1e-12);
    CHECK(rel(l21[i], o21[i]) < 1e-12);
  }
}

TEST_CASE("bracket antisymmetry and bracket-defect identity at sampled points") {
  const auto heston = make_heston_asian();
  for (const auto& x : sample_points("heston-asian", 50, 11)) {
    const auto b12 = lie_bracket(heston, 1, 2, x);
    const auto b21 = lie_bracket(heston, 2, 1, x);
    // g_{21} - g_{12} = L_1 sigma_2 - L_2 sigma_1
    const auto g21 = l_sigma(heston, 1, 2, x);
    const auto g12 = l_sigma(heston, 2, 1, x);
    for (std::size_t i = 0; i < 3; ++i) {
      const double scale = std::max(1e-300, std::abs(b12[i]));
      CHECK(std::abs(b12[i] + b21[i]) <= 1e-12 * scale);
      CHECK(std::abs(b12[i] - (g21[i] - g12[i])) <= 1e-12 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("stratonovich drift") {
  const StateVector s{100.0};
  CHECK(stratonovich_drift(make_gbm({0.1, 0.4}), s)[0] == doctest::Approx(2.0).epsilon(1e-13));
  const auto bs = stratonovich_drift(make_bs_asian({0.1, 0.4}), StateVector{100.0, 0.0});
  CHECK(bs[0] == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(bs[1] == 100.0);
  const auto additive = additive_model(3, 2, 0.7);
  const StateVector x{0.3, -1.0, 2.0};
  CHECK(stratonovich_drift(additive, x) == additive.drift(x));
}

TEST_CASE("commutativity check") {
  const auto bs = make_bs_asian();
  const auto bs_points = sample_points("bs-asian", 20, 3);
  const auto r1 = commutativity_check(bs, bs_points);
  CHECK(r1.commutative);
  CHECK(r1.max_defect == 0.0);
  CHECK(r1.sample_count == 20);

  const auto heston = make_heston_asian();
  const std::vector<StateVector> one{kHestonPoint};
  const auto r2 = commutativity_check(heston, one);
  CHECK_FALSE(r2.commutative);
  CHECK(rel(r2.max_defect, HestonOracle{}.c() * 100.0 / 2.0) < 1e-10);
  CHECK(r2.witness_point == kHestonPoint);

  const auto additive = additive_model(3, 3);
  const std::vector<StateVector> pts{{0.0, 1.0, 2.0}, {5.0, -1.0, 0.5}};
  CHECK(commutativity_check(additive, pts).commutative);

  const std::vector<StateVector> none;
  CHECK_THROWS_AS(commutativity_check(bs, none), ContractViolation);
}

TEST_CASE("phi3 coefficient tensor") {
  const auto heston = make_heston_asian();
  const auto c = phi3_coefficient_tensor(heston, kHestonPoint);
  CHECK(rel(c(0, 0), 1.59375) < 1e-10);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != 0 || j != 0) CHECK(std::abs(c(i, j)) < 1e-12);
    }
  }
  // Vanishes on commutative presets.
  for (const std::string id : {"bs-asian", "gbm", "small-diffusion"}) {
    const auto m = preset(id);
    const auto pts = sample_points(id, 20, 5);
    REQUIRE(commutativity_check(m.model, pts).commutative);
    for (const auto& x : pts) {
      const auto c3 = phi3_coefficient_tensor(m.model, x);
      for (double v : c3.data()) CHECK(std::abs(v) < 1e-12);
    }
  }
}

TEST_CASE("phi1 coefficient fields") {
  const auto gbm = make_gbm({0.1, 0.2});
  const auto p = phi1_coefficient_fields(gbm, StateVector{100.0});
  CHECK(p.vector[0] == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(p.matrix(0, 0) == doctest::Approx(40.0).epsilon(1e-13));

  const auto bs = phi1_coefficient_fields(make_bs_asian({0.1, 0.4}), StateVector{100.0, 0.0});
  CHECK(bs.vector[0] == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(bs.vector[1] == doctest::Approx(5.0).epsilon(1e-13));

  const auto flat = phi1_coefficient_fields(additive_model(2, 2), StateVector{1.0, 2.0});
  for (double v : flat.vector) CHECK(v == 0.0);
  for (double v : flat.matrix.data()) CHECK(v == 0.0);
}

TEST_CASE("phi2 coefficient fields") {
  const auto gbm = make_gbm({0.1, 0.2});
  const auto p = phi2_coefficient_fields(gbm, StateVector{100.0});
  CHECK(p.tensor(0, 0, 0) == doctest::Approx(800.0).epsilon(1e-13));
  CHECK(p.matrix(0, 0) == doctest::Approx(4.0).epsilon(1e-13));

  const auto flat = phi2_coefficient_fields(additive_model(2, 2), StateVector{1.0, 2.0});
  for (double v : flat.tensor.data()) CHECK(v == 0.0);
  for (double v : flat.matrix.data()) CHECK(v == 0.0);

  // d = 1: M = 1/4 (L_1 sigma_1)(L_1 sigma_1)^T.
  const auto bs = make_bs_asian();
  const StateVector x{80.0, 12.0};
  const auto q = phi2_coefficient_fields(bs, x);
  const auto l11 = l_sigma(bs, 1, 1, x);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(q.matrix(i, j) == doctest::Approx(0.25 * l11[i] * l11[j]).epsilon(1e-14));
      CHECK(q.matrix(i, j) == q.matrix(j, i));
    }
  }
}

TEST_CASE("operator applications agree with finite differences of the fields") {
  for (const auto& id : preset_ids()) {
    const auto m = preset(id);
    const std::size_t n = m.model.state_dim(), d = m.model.noise_dim();
    for (const auto& x : sample_points(id, 10, 17)) {
      for (std::size_t j1 = 1; j1 <= d; ++j1) {
        for (std::size_t j2 = 0; j2 <= d; ++j2) {
          // (L_{j1} sigma_{j2})(x) = d/dt sigma_{j2}(x + t sigma_{j1}(x)) at t = 0.
          const auto dir = m.model.field(j1, x);
          const double t = 1e-6;
          StateVector xp = x, xm = x;
          for (std::size_t i = 0; i < n; ++i) {
            xp[i] += t * dir[i];
            xm[i] -= t * dir[i];
          }
          const auto fp = m.model.field(j2, xp), fm = m.model.field(j2, xm);
          const auto analytic = l_sigma(m.model, j1, j2, x);
          for (std::size_t i = 0; i < n; ++i) {
            const double fd = (fp[i] - fm[i]) / (2.0 * t);
            CHECK(std::abs(analytic[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
          }
        }
      }
    }
  }
}

TEST_CASE("preset derivatives match finite differences at 100 points") {
  for (const auto& id : preset_ids()) {
    CAPTURE(id);
    const auto m = preset(id);
    const auto pts = sample_points(id, 100, 23);
    const auto check = check_derivatives(m.model, pts);
    CHECK(check.points == 100);
    CHECK(check.max_jacobian_error < 1e-5);
    CHECK(check.max_hessian_error < 1e-5);
    CHECK(check.max_hessian_asymmetry == 0.0);
  }
}

TEST_CASE("finite-difference fallback for ad-hoc models") {
  // dX = sin(Y) dt + X Y dB, dY = -X dt
  FieldSpec drift{[](std::span<const double> x, std::span<double> out) {
    out[0] = std::sin(x[1]);
    out[1] = -x[0];
  }};
  FieldSpec sigma{[](std::span<const double> x, std::span<double> out) {
    out[0] = x[0] * x[1];
    out[1] = 0.0;
  }};
  const auto model = make_function_model("adhoc", 2, drift, {sigma});
  const StateVector x{0.7, 1.3};
  const auto j0 = model.drift_jacobian(x);
  CHECK(j0(0, 1) == doctest::Approx(std::cos(1.3)).epsilon(1e-8));
  CHECK(j0(1, 0) == doctest::Approx(-1.0).epsilon(1e-8));
  const auto j1 = model.diffusion_jacobian(1, x);
  CHECK(j1(0, 0) == doctest::Approx(1.3).epsilon(1e-8));
  CHECK(j1(0, 1) == doctest::Approx(0.7).epsilon(1e-8));
  const auto h0 = model.drift_hessian(x);
  CHECK(h0(0, 1, 1) == doctest::Approx(-std::sin(1.3)).epsilon(1e-5));
  const auto h1 = model.diffusion_hessian(1, x);
  CHECK(h1(0, 0, 1) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(h1(0, 1, 0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(std::abs(h1(0, 0, 0)) < 1e-5);
}

TEST_CASE("model contracts") {
  const auto heston = make_heston_asian();
  CHECK(heston.state_dim() == 3);
  CHECK(heston.noise_dim() == 2);
  CHECK(heston.nonnegative_coordinate() == std::optional<std::size_t>(1));
  CHECK_THROWS_AS(heston.diffusion(0, kHestonPoint), ContractViolation);
  CHECK_THROWS_AS(heston.diffusion(3, kHestonPoint), ContractViolation);
  CHECK_THROWS_AS(heston.drift(StateVector{1.0}), ContractViolation);
  // sqrt(max(v, 0)) policy: no diffusion in the variance below zero, finite values.
  const StateVector negative{100.0, -0.01, 0.0};
  CHECK(heston.diffusion(1, negative) == StateVector{0.0, 0.0, 0.0});
  const auto jac = heston.diffusion_jacobian(1, negative);
  for (double v : jac.data()) CHECK(std::isfinite(v));
  CHECK_THROWS_AS(make_small_diffusion({1.0}), ContractViolation);
  CHECK_NOTHROW(make_small_diffusion({0.0}));
}
