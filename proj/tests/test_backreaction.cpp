#include <doctest.h>

#include <cmath>

#include "kgpair/backreaction.hpp"

using namespace kgpair;

namespace {

const PhysicalConstants kAU;

}  // namespace

TEST_CASE("field energy of a uniform field") {
  const Grid g(16, 4.0);
  const Eigen::VectorXd e = Eigen::VectorXd::Constant(16, 3.0);
  CHECK(field_energy(e, g) == doctest::Approx(9.0 * 4.0 / (8 * M_PI)));
}

TEST_CASE("charge sheet gives a piecewise constant field") {
  const Grid g(64, 8.0);
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(64);
  rho[32] = 2.0 / g.spacing();  // total 2 at x = 0
  const InducedField f = induced_field(rho, g, kAU);
  CHECK(f.charge == doctest::Approx(2.0 * kAU.charge));
  const double jump = 4 * M_PI * kAU.charge * 2.0;
  const double tol = std::abs(jump);
  CHECK(f.field[10] == doctest::Approx(-0.5 * jump));
  CHECK(f.field[50] == doctest::Approx(0.5 * jump));
  CHECK(f.field[32] == doctest::Approx(0.0).scale(tol));
  // Gauss law between any two points
  const double dx = g.spacing();
  for (int i = 1; i < 64; ++i) {
    CHECK(f.field[i] - f.field[i - 1] ==
          doctest::Approx(4 * M_PI * kAU.charge * 0.5 * (rho[i] + rho[i - 1]) * dx).scale(tol));
  }
}

TEST_CASE("negative density is clamped") {
  const Grid g(16, 4.0);
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(16);
  rho[4] = 1.0;
  rho[10] = -1e-3;
  const InducedField f = induced_field(rho, g, kAU);
  CHECK(f.peak == 1.0);
  CHECK(f.most_negative == doctest::Approx(-1e-3));
  CHECK(f.charge == doctest::Approx(kAU.charge * g.spacing()));
}

TEST_CASE("initial field energy of the smooth box") {
  const double lc = kAU.compton_length();
  const double mc2 = kAU.rest_energy();
  const Grid g(256, 32.0 * lc);
  const double w = 0.2 * lc;
  auto energy = [&](double V0) {
    FieldConfig cfg;
    cfg.scalar = SmoothBox{V0, 2.2 * lc, w};
    return initial_field_energy(cfg, g, kAU);
  };
  // two well separated edges, each carrying the integral of sech^4 (4/3 w)
  const double V0 = -2.25 * mc2;
  const double q2 = kAU.charge * kAU.charge;
  const double closed = V0 * V0 / (4 * w * w * q2) * (2 * 4.0 / 3.0 * w) / (8 * M_PI);
  CHECK(energy(V0) == doctest::Approx(closed).epsilon(1e-6));
  CHECK(energy(2 * V0) == doctest::Approx(4 * energy(V0)).epsilon(1e-12));
  CHECK(energy(0.0) == 0.0);
}

TEST_CASE("initial field energy includes the magnetic step") {
  const double lc = kAU.compton_length();
  const double mc2 = kAU.rest_energy();
  const Grid g(256, 64.0 * lc);
  const double wE = 0.3 * lc;
  const double wB = 2.2 * lc;
  const double A0 = 2.64 * kAU.c;
  FieldConfig cfg;
  cfg.scalar = SmoothStep{3.0 * mc2, wE};
  cfg.vector = SmoothStepY{A0, wB};
  const double q2 = kAU.charge * kAU.charge;
  const double electric = 9.0 * mc2 * mc2 / (4 * wE * wE * q2) * (4.0 / 3.0 * wE);
  const double magnetic = kAU.c * kAU.c * A0 * A0 / (4 * wB * wB) * (4.0 / 3.0 * wB);
  CHECK(initial_field_energy(cfg, g, kAU) ==
        doctest::Approx((electric + magnetic) / (8 * M_PI)).epsilon(1e-6));
}

namespace {

BackReactionProblem small_problem() {
  const double lc = kAU.compton_length();
  return BackReactionProblem{Grid(128, 32.0 * lc),
                             SmoothBox{-2.25 * kAU.rest_energy(), 2.2 * lc, 0.2 * lc}, kAU,
                             DerivativeScheme::Spectral, {}};
}

}  // namespace

TEST_CASE("disabled back reaction is the fixed-strength run") {
  const BackReactionProblem p = small_problem();
  BackReactionOptions o;
  o.dt = 0.2 * kAU.time_unit();
  o.t_max = 40.0 * kAU.time_unit();
  o.record_every = 10;
  o.enabled = false;
  const EvolutionRecord r = run_backreaction(p, o);

  const Eigen::VectorXd shape = sample_scalar(SmoothBox{1.0, p.box.width, p.box.edge}, p.grid);
  ScaledPotentialPropagator prop(p.grid, kAU, {}, p.scheme, shape, o.dt);
  const FreeModeBasis b = build_free_basis(p.grid, kAU);
  Eigen::MatrixXcd modes = b.negative;
  std::vector<double> n{particle_number(b, modes)};
  for (int s = 1; s <= 200; ++s) {
    prop.step(modes, p.box.V0);
    if (s % 10 == 0) n.push_back(creation_amplitudes(b, modes).squaredNorm());
  }
  REQUIRE(r.number.size() == n.size());
  for (size_t i = 0; i < n.size(); ++i) {
    CHECK(r.number[i] == n[i]);
    CHECK(r.V0[i] == p.box.V0);
    CHECK(r.E_in[i] == 0.0);
  }
}

TEST_CASE("energy bookkeeping with back reaction") {
  const BackReactionProblem p = small_problem();
  BackReactionOptions o;
  o.dt = 0.2 * kAU.time_unit();
  o.t_max = 150.0 * kAU.time_unit();
  o.record_every = 5;
  set_quiet(true);
  const EvolutionRecord r = run_backreaction(p, o);
  set_quiet(false);
  FieldConfig cfg;
  cfg.scalar = p.box;
  const double e0 = initial_field_energy(cfg, p.grid, kAU);
  CHECK(r.E_ex.front() == doctest::Approx(e0));
  bool reduced = false;
  for (size_t i = 0; i < r.times.size(); ++i) {
    CHECK(r.number[i] >= 0.0);
    CHECK(r.E_ex[i] >= 0.0);
    if (r.E_in[i] <= e0) CHECK(r.E_in[i] + r.E_ex[i] == doctest::Approx(e0).epsilon(1e-12));
    CHECK(r.V0[i] == doctest::Approx(p.box.V0 * std::sqrt(r.E_ex[i] / e0)));
    CHECK(std::abs(r.V0[i]) <= std::abs(p.box.V0));
    if (std::abs(r.V0[i]) < 0.99 * std::abs(p.box.V0)) reduced = true;
  }
  CHECK(reduced);
}

TEST_CASE("back reaction rejects bad options") {
  BackReactionOptions o;
  CHECK_THROWS_AS(run_backreaction(small_problem(), o), ConfigError);
}
