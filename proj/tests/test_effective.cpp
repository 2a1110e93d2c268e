#include <doctest.h>

#include <cmath>
#include <random>

#include "maglab/effective/effective.hpp"
#include "maglab/errors.hpp"

using namespace maglab;
using namespace maglab::effective;

namespace {

const montgomery::CriticalPointData& critical() { return montgomery::ground_band_critical_point(); }

/// Model A principal symbol on a window wide enough for the quantization
/// lattices used below (hbar <= 0.215 with 64 modes, hbar <= 0.05 with 256).
const EffectiveSymbolGrid& model_a_grid() {
  static const EffectiveSymbolGrid grid =
      effective_principal(geometry::make_model("A"), 1, linspace(-2.5, 2.5, 101), linspace(-7.0, 7.0, 141));
  return grid;
}

geometry::ModelCatalogEntry constant_delta() {
  geometry::FieldProfile f;
  f.field = [](double, double t) { return t; };
  f.dt_field = [](double, double) { return 1.0; };
  f.delta = [](double) { return 1.0; };
  f.delta_prime = [](double) { return 0.0; };
  f.dtt_field_at_zero = [](double) { return 0.0; };
  f.delta_min = 1.0;
  f.delta_star = 0.5;
  geometry::ModelCatalogEntry e;
  e.name = "flat";
  e.family = "custom";
  e.field = f;
  return e;
}

Symbol harmonic() {
  return [](double x, double xi) { return x * x + xi * xi; };
}

double max_pair_error(const SpectrumResult& bs, const SpectrumResult& q) {
  double worst = 0.0;
  for (std::size_t i = 0; i < bs.eigenvalues.size(); ++i) {
    worst = std::max(worst, std::abs(bs.eigenvalues[i] - q.eigenvalues.at(bs.indices[i])));
  }
  return worst;
}

}  // namespace

TEST_SUITE("effective_principal") {
  TEST_CASE("constant delta gives an x-independent symbol equal to the dispersive curve") {
    const auto g = effective_principal(constant_delta(), 1, linspace(-1, 1, 5), linspace(-2, 2, 9));
    for (int j = 0; j < 9; ++j) {
      const double exact = montgomery::montgomery_eigenvalue(g.xi_grid[j], 1);
      for (int i = 0; i < 5; ++i) CHECK(std::abs(g.principal(i, j) - exact) < 1e-8);
    }
  }

  TEST_CASE("model A attains the critical value at the well bottom") {
    const auto& g = model_a_grid();
    CHECK(std::abs(g.principal_fn(0.0, critical().nu_c) - critical().mu_c) < 1e-8);
    CHECK(g.principal.minCoeff() >= critical().mu_c - 1e-8);
    CHECK(g.principal.minCoeff() > 0.0);
    CHECK(g.truncation_note.find("identity truncation") != std::string::npos);
  }

  TEST_CASE("defining identity at random points") {
    const auto& g = model_a_grid();
    const auto model = geometry::make_model("A");
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ux(-2.5, 2.5), uxi(-4.0, 4.0);
    for (int k = 0; k < 25; ++k) {
      const double x = ux(rng), xi = uxi(rng);
      const double d = model.field.delta(x);
      const double lhs = g.principal_fn(x, xi) / std::pow(d, 2.0 / 3.0);
      CHECK(std::abs(lhs - montgomery::montgomery_eigenvalue(xi / std::cbrt(d), 1)) < 1e-8);
    }
  }

  TEST_CASE("interpolant refinement, derivatives and range errors") {
    const auto curve = dispersive_interpolant(1, -1.0, 2.0);
    CHECK(curve->refinement_shift() < 1e-8);
    CHECK(curve->spacing() <= 0.05);
    CHECK(std::abs(curve->derivative(0.3) - montgomery::dispersive_derivative(0.3, 1)) < 1e-6);
    CHECK(std::abs(curve->second_derivative(critical().nu_c) - critical().curvature) < 1e-4);
    CHECK(dispersive_interpolant(1, -1.0, 2.0) == curve);
    try {
      (*curve)(2.5);
      FAIL("expected RangeError");
    } catch (const RangeError& e) {
      CHECK(std::string(e.what()).find("2.5") != std::string::npos);
    }
  }
}

TEST_SUITE("effective_subprincipal") {
  TEST_CASE("model A vanishes at the well bottom") {
    const auto t = subprincipal_terms(geometry::make_model("A"), 1, 0.0, critical().nu_c);
    CHECK(std::abs(t.value()) < 1e-6);
    CHECK(std::abs(t.principal - critical().mu_c) < 1e-8);
  }

  TEST_CASE("model B equals the averaged correction operator at the well bottom") {
    const auto model = geometry::make_model("B");
    const auto prediction = harmonic_prediction(model, critical());
    const auto t = subprincipal_terms(model, 1, 0.0, critical().nu_c);
    const double expected = std::pow(prediction.delta_c, 2.0 / 3.0) * prediction.L_expectation;
    CHECK(std::abs(t.value() - expected) < 1e-5);
  }

  TEST_CASE("odd moments vanish for the even ground state") {
    for (double nu : {-2.0, 0.0, critical().nu_c, 2.5}) {
      const auto m = montgomery_moments(1, nu);
      CHECK(std::abs(m.curvature_moment) < 1e-8);
      CHECK(std::abs(m.kappa_moment) < 1e-8);
    }
  }

  TEST_CASE("imaginary parts vanish at every node of model A") {
    const auto model = geometry::make_model("A");
    auto g = effective_principal(model, 1, linspace(-2, 2, 9), linspace(-2, 3, 11));
    g = effective_subprincipal(model, g);
    REQUIRE(g.has_subprincipal());
    CHECK(g.im_cross.cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(g.im_bracket.cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(g.subprincipal.cwiseAbs().maxCoeff() <= 1e-6);
  }

  TEST_CASE("large nu: degeneracy propagates from the Montgomery solver") {
    CHECK_THROWS_AS(montgomery_moments(1, 7.0), DegeneracyError);
    const auto& g = model_a_grid();
    const auto filled = effective_subprincipal(geometry::make_model("A"), g);
    CHECK(filled.truncation_note.find("held constant") != std::string::npos);
  }

  TEST_CASE("subprincipal needs a principal symbol") {
    CHECK_THROWS_AS(effective_subprincipal(geometry::make_model("A"), EffectiveSymbolGrid{}),
                    PreconditionError);
  }
}

TEST_SUITE("harmonic_prediction") {
  TEST_CASE("model A Hessian is diagonal with the expected entries") {
    const auto p = harmonic_prediction(geometry::make_model("A"), critical());
    const double norm = std::hypot(p.hxx, p.hxixi);
    CHECK(std::abs(p.hxxi) <= 1e-6 * norm);
    const double hxx_expected = (2.0 / 3.0) * p.delta_second * std::pow(p.delta_c, -1.0 / 3.0) * p.mu_c;
    CHECK(std::abs(p.hxx / hxx_expected - 1) < 1e-4);
    CHECK(std::abs(p.hxixi / critical().curvature - 1) < 1e-4);
    CHECK(p.alpha == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(p.delta_c == 1.0);
    CHECK(std::abs(p.x_c) < 1e-12);
    CHECK(p.c1_closed_form > 0.0);
    CHECK(p.c1_hessian > 0.0);
    // The two candidates differ by sqrt(3/2) delta_c^(-1/3).
    CHECK(p.c1_closed_form / p.c1_hessian == doctest::Approx(std::sqrt(1.5)).epsilon(1e-6));
    CHECK(p.L_expectation == 0.0);
  }

  TEST_CASE("Hessian is diagonal on every catalog model") {
    for (const auto& m : geometry::builtin_models()) {
      const auto p = harmonic_prediction(m, critical());
      CHECK_MESSAGE(std::abs(p.hxxi) <= 1e-6 * std::hypot(p.hxx, p.hxixi), m.name);
    }
  }

  TEST_CASE("tables, CSV and JSON") {
    const auto p = harmonic_prediction(geometry::make_model("A"), critical(), {0.05, 0.01}, 3);
    REQUIRE(p.lambda_closed_form.size() == 2);
    const auto& row = p.lambda_hessian.at(0.01);
    REQUIRE(row.size() == 3);
    const double hbar = std::cbrt(0.01);
    CHECK(row[1] - row[0] == doctest::Approx(2 * hbar * p.c1_hessian));
    const auto csv = lambda_table_csv(p);
    CHECK(csv.rfind("h,n,lambda_closed_form,lambda_hessian\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    const auto doc = to_json(p);
    CHECK(doc.at("c1_hessian").get<double>() == p.c1_hessian);
    CHECK(doc.at("lambda_closed_form").size() == 2);
  }

  TEST_CASE("flat delta has no well") {
    CHECK_THROWS_AS(harmonic_prediction(geometry::make_model("A", {{"a", 0.0}}), critical()),
                    PreconditionError);
  }
}

TEST_SUITE("quantize_1d") {
  TEST_CASE("harmonic symbol gives hbar (2n + 1)") {
    const double hbar = 0.1;
    const auto g = symbol_from_function(harmonic(), linspace(-6, 6, 13), linspace(-6, 6, 13));
    const auto op = quantize_1d(g, 0, hbar, 256);
    const auto s = quantized_spectrum(op, 11);
    for (int n = 0; n <= 10; ++n) CHECK(std::abs(s.eigenvalues[n] - hbar * (2 * n + 1)) < 1e-6);
    CHECK(op.symmetry_defect < 1e-10);
    CHECK((op.matrix - op.matrix.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("constant symbol gives a multiple of the identity") {
    const auto g = symbol_from_function([](double, double) { return 3.0; }, linspace(-1, 1, 3),
                                        linspace(-50, 50, 3));
    const auto op = quantize_1d(g, 0, 0.2, 64);
    const Eigen::MatrixXcd expected = 3.0 * Eigen::MatrixXcd::Identity(64, 64);
    CHECK((op.matrix - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("order one adds hbar times the subprincipal") {
    const auto g = symbol_from_function(harmonic(), linspace(-6, 6, 13), linspace(-6, 6, 13),
                                        [](double, double) { return 0.5; });
    const auto s0 = quantized_spectrum(quantize_1d(g, 0, 0.1, 128), 3);
    const auto s1 = quantized_spectrum(quantize_1d(g, 1, 0.1, 128), 3);
    for (int n = 0; n < 3; ++n) CHECK(s1.eigenvalues[n] - s0.eigenvalues[n] == doctest::Approx(0.05));
  }

  TEST_CASE("model A ground state against the harmonic approximation at h = 0.01" *
            doctest::may_fail()) {
    const auto p = harmonic_prediction(geometry::make_model("A"), critical());
    const double hbar = std::cbrt(0.01);
    const auto s = quantized_spectrum(quantize_1d(model_a_grid(), 0, hbar, 64), 1);
    const double shift = s.eigenvalues[0] - critical().mu_c;
    const double oracle = hbar * std::sqrt(p.hxx * p.hxixi) / 2;
    MESSAGE("quantized shift " << shift << ", harmonic " << oracle);
    CHECK(std::abs(shift / oracle - 1) < 0.10);
  }

  TEST_CASE("eigenvalues are invariant under mode doubling") {
    const double hbar = 0.05, top = critical().mu_c + 0.2;
    const auto a = quantized_spectrum(quantize_1d(model_a_grid(), 0, hbar, 128, {top}), 0, 0, top);
    const auto b = quantized_spectrum(quantize_1d(model_a_grid(), 0, hbar, 256, {top}), 0, 0, top);
    REQUIRE(a.eigenvalues.size() == b.eigenvalues.size());
    REQUIRE(a.eigenvalues.size() >= 4);
    for (std::size_t n = 0; n < a.eigenvalues.size(); ++n) {
      CHECK(std::abs(a.eigenvalues[n] - b.eigenvalues[n]) <= 1e-8);
    }
  }

  TEST_CASE("coverage, aliasing and lattice errors") {
    const auto g = symbol_from_function(harmonic(), linspace(-6, 6, 13), linspace(-6, 6, 13));
    QuantizeOptions high;
    high.energy_top = 30.0;
    CHECK_THROWS_AS(quantize_1d(g, 0, 0.1, 128, high), RangeError);
    const auto coarse = symbol_from_function(harmonic(), linspace(-6, 6, 13), linspace(-2, 2, 5));
    QuantizeOptions low;
    low.energy_top = 1.0;
    CHECK_THROWS_AS(quantize_1d(coarse, 0, 1.0, 8, low), ResolutionError);
    CHECK_THROWS_AS(quantize_1d(g, 0, 1.0, 64), RangeError);
    CHECK_THROWS_AS(quantize_1d(g, 1, 0.1, 64), PreconditionError);
    CHECK_THROWS_AS(quantize_1d(g, 0, 0.1, 63), PreconditionError);
  }
}

TEST_SUITE("action_profile") {
  TEST_CASE("disc area of the harmonic symbol") {
    const auto g = symbol_from_function(harmonic(), linspace(-2, 2, 400), linspace(-2, 2, 400));
    for (double e : {0.5, 1.0, 2.0}) {
      double period = 0.0;
      CHECK(std::abs(sublevel_area(g, e, &period) - M_PI * e) < 1e-6);
      CHECK(period == doctest::Approx(M_PI).epsilon(1e-6));
    }
    const auto profile = action_profile(g, {0.5, 2.0}, 7);
    CHECK(profile.monotone);
    for (std::size_t i = 0; i < profile.energy_grid.size(); ++i) {
      CHECK(std::abs(profile.J_grid_values[i] - profile.J_values[i]) < 1e-3 * profile.J_values[i]);
    }
  }

  TEST_CASE("doubling the energy doubles the harmonic action") {
    const auto g = symbol_from_function(harmonic(), linspace(-3, 3, 61), linspace(-3, 3, 61));
    for (double e : {0.3, 0.7, 1.9}) {
      CHECK(sublevel_area(g, 2 * e) == doctest::Approx(2 * sublevel_area(g, e)).epsilon(1e-10));
    }
  }

  TEST_CASE("model A action is increasing and its slope is the orbit period") {
    const double mu = critical().mu_c;
    const auto profile = action_profile(model_a_grid(), {mu + 0.05, mu + 0.15}, 21);
    CHECK(profile.monotone);
    for (std::size_t i = 0; i < profile.energy_grid.size(); ++i) {
      CHECK(profile.J_values[i] >= 0.0);
      const double slope = profile.dJ(profile.energy_grid[i]);
      CHECK(std::abs(slope / profile.periods[i] - 1) < 0.01);
    }
    CHECK_THROWS_AS(profile.J(mu), RangeError);
    CHECK(to_json(profile).at("J_values").size() == 21);
  }

  TEST_CASE("coverage and regularity errors") {
    const auto g = symbol_from_function(harmonic(), linspace(-1, 1, 41), linspace(-1, 1, 41));
    CHECK_THROWS_AS(sublevel_area(g, 2.0), RangeError);
    // Stationary inflection at x = 1 on the level a = 1/12.
    const auto flat = symbol_from_function(
        [](double x, double xi) { return xi * xi + x * x * x * x / 4 - 2 * x * x * x / 3 + x * x / 2; },
        linspace(-2, 3, 101), linspace(-2, 2, 81));
    try {
      sublevel_area(flat, 1.0 / 12.0);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("regularity") != std::string::npos);
    }
  }
}

TEST_SUITE("bohr_sommerfeld") {
  TEST_CASE("linear action gives the harmonic ladder") {
    ActionProfile p;
    p.energy_grid = linspace(0.05, 3.0, 60);
    for (double e : p.energy_grid) p.J_values.push_back(M_PI * e);
    p.monotone = true;
    const auto s = bohr_sommerfeld_spectrum(p, 0.1);
    REQUIRE(s.eigenvalues.size() == 15);
    for (std::size_t n = 0; n < s.eigenvalues.size(); ++n) {
      CHECK(s.indices[n] == static_cast<int>(n));
      CHECK(std::abs(s.eigenvalues[n] - 0.1 * (2 * n + 1)) < 1e-12);
    }
  }

  TEST_CASE("window between quantization levels is empty") {
    ActionProfile p;
    p.energy_grid = linspace(0.31, 0.39, 5);
    for (double e : p.energy_grid) p.J_values.push_back(M_PI * e);
    p.monotone = true;
    CHECK(bohr_sommerfeld_spectrum(p, 0.1).eigenvalues.empty());
    p.monotone = false;
    CHECK_THROWS_AS(bohr_sommerfeld_spectrum(p, 0.1), PreconditionError);
  }

  TEST_CASE("model A: error against quantization scales like hbar^2") {
    const double mu = critical().mu_c;
    const auto profile = action_profile(model_a_grid(), {mu + 0.05, mu + 0.15}, 41);
    double constant[2];
    int k = 0;
    for (double hbar : {0.05, 0.025}) {
      const auto bs = bohr_sommerfeld_spectrum(profile, hbar);
      REQUIRE(!bs.eigenvalues.empty());
      const auto q = quantized_spectrum(quantize_1d(model_a_grid(), 0, hbar, 128), 20);
      constant[k++] = max_pair_error(bs, q) / (hbar * hbar);
    }
    MESSAGE("C(0.05) = " << constant[0] << ", C(0.025) = " << constant[1]);
    CHECK(constant[0] <= 1.25 * constant[1]);
    CHECK(constant[1] <= 1.25 * constant[0]);
  }

  TEST_CASE("eigenvalue counts agree with quantization in the window") {
    const double mu = critical().mu_c;
    const double e1 = mu + 0.05, e2 = mu + 0.15;
    const auto profile = action_profile(model_a_grid(), {e1, e2}, 41);
    for (double hbar : {0.05, 0.04, 0.025}) {
      const auto bs = bohr_sommerfeld_spectrum(profile, hbar);
      const auto q = quantized_spectrum(quantize_1d(model_a_grid(), 0, hbar, 128), 0, 0, e2);
      const auto in_window = std::count_if(q.eigenvalues.begin(), q.eigenvalues.end(),
                                           [&](double e) { return e >= e1; });
      CHECK_MESSAGE(static_cast<long>(bs.eigenvalues.size()) == in_window, "hbar " << hbar);
    }
  }

  TEST_CASE("model B: first-order shift of the ground state equals hbar times the subprincipal") {
    const auto model = geometry::make_model("B");
    auto g = effective_principal(model, 1, linspace(-2.5, 2.5, 41), linspace(-7.0, 7.0, 71));
    g = effective_subprincipal(model, g);
    const double sub = subprincipal_terms(model, 1, 0.0, critical().nu_c).value();
    for (double hbar : {0.05, 0.025}) {
      const auto s0 = quantized_spectrum(quantize_1d(g, 0, hbar, 128), 1);
      const auto s1 = quantized_spectrum(quantize_1d(g, 1, hbar, 128), 1);
      const double shift = s1.eigenvalues[0] - s0.eigenvalues[0];
      CHECK(std::abs(shift - hbar * sub) <= 0.15 * std::abs(hbar * sub) + 1e-10);
    }
  }
}

TEST_SUITE("serialization") {
  TEST_CASE("symbol grid JSON") {
    const auto g = symbol_from_function(harmonic(), linspace(-1, 1, 3), linspace(-1, 1, 4),
                                        [](double, double) { return 0.0; });
    const auto doc = to_json(g);
    CHECK(doc.at("schema") == "maglab.effective_symbol");
    CHECK(doc.at("principal").size() == 3);
    CHECK(doc.at("principal")[0].size() == 4);
    CHECK(doc.at("subprincipal")[2][3].get<double>() == 0.0);
    CHECK(doc.at("principal")[2][3].get<double>() == 2.0);
  }
}
