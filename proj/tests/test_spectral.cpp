#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "kgpair/spectral.hpp"

using namespace kgpair;

namespace {

const PhysicalConstants kAU;

Tolerances toy_tolerances() {
  Tolerances t;
  t.im_eps = 1e-10;
  t.pair_eps = 1e-10;
  return t;
}

Eigen::MatrixXcd toy(double a, double b) {
  Eigen::MatrixXcd h(2, 2);
  h << a, b, -b, -a;
  return h;
}

// Coarser grids than the bundled configs.
SpectrumProblem box_problem(int points = 256, double length = 64.0) {
  const double lc = kAU.compton_length();
  return SpectrumProblem{Grid(points, length * lc), FamilySpec::box(2.2 * lc, 0.2 * lc), kAU,
                         DerivativeScheme::Spectral, Tolerances::defaults(kAU)};
}

SpectrumProblem step_problem(int points = 256, double length = 32.0, double A0 = 2.64) {
  const double lc = kAU.compton_length();
  return SpectrumProblem{Grid(points, length * lc),
                         FamilySpec::step_with_b(0.3 * lc, 2.2 * lc, A0 * kAU.c, kAU), kAU,
                         DerivativeScheme::Spectral, Tolerances::defaults(kAU)};
}

}  // namespace

TEST_CASE("toy pseudo-Hermitian matrix with real spectrum") {
  const BiorthogonalSpectrum s = eigensolve(toy(2.0, 1.0), toy_tolerances());
  REQUIRE(s.size() == 2);
  CHECK(s.energies[0].real() == doctest::Approx(-std::sqrt(3.0)));
  CHECK(s.energies[1].real() == doctest::Approx(std::sqrt(3.0)));
  CHECK(std::abs(s.energies[0].imag()) < 1e-14);
  CHECK(!s.complex_energy[0]);
  CHECK(s.partner[0] == -1);
  CHECK(s.biorthogonality_residual < 1e-12);
}

TEST_CASE("toy pseudo-Hermitian matrix with a conjugate pair") {
  const BiorthogonalSpectrum s = eigensolve(toy(1.0, 2.0), toy_tolerances());
  CHECK(std::abs(s.energies[0] - Complex(0, -std::sqrt(3.0))) < 1e-12);
  CHECK(std::abs(s.energies[1] - Complex(0, std::sqrt(3.0))) < 1e-12);
  CHECK(s.complex_energy[0]);
  CHECK(s.partner[0] == 1);
  CHECK(s.partner[1] == 0);
  CHECK(s.conjugate_closed());
  // complex eigenvectors carry zero pseudo-norm
  const Eigen::VectorXcd v = s.right.col(0).normalized();
  CHECK(std::abs(std::norm(v[0]) - std::norm(v[1])) < 1e-12);
  CHECK(left_eigen_residual(toy(1.0, 2.0), s) < 1e-12);
}

TEST_CASE("exceptional point is reported as non-diagonalizable") {
  CHECK_THROWS_AS(eigensolve(toy(1.0, 1.0), toy_tolerances()), NonDiagonalizableError);
}

TEST_CASE("left and right eigenvectors of an assembled Hamiltonian") {
  const SpectrumProblem p = box_problem(64, 16.0);
  const FVHamiltonian h = p.hamiltonian(-2.25 * kAU.rest_energy());
  const BiorthogonalSpectrum s = eigensolve(h, p.tolerances);
  CHECK(s.biorthogonality_residual < 1e-10);
  CHECK(s.conjugate_closed());
  CHECK((h.matrix * s.right - s.right * s.energies.asDiagonal()).norm() <
        1e-10 * h.matrix.norm() * s.right.norm());
  CHECK(left_eigen_residual(h.matrix, s) < 1e-10);
  for (Eigen::Index i = 1; i < s.size(); ++i) {
    const Complex a = s.energies[i - 1];
    const Complex b = s.energies[i];
    CHECK((a.real() < b.real() || (a.real() == b.real() && a.imag() <= b.imag())));
  }
  // zero pseudo-norm for complex states, nonzero for real ones
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const Eigen::VectorXcd v = s.right.col(i).normalized();
    const double n = std::abs(v.dot(apply_eta(v)));
    if (s.complex_energy[i]) {
      CHECK(n < 1e-8);
    }
  }
}

TEST_CASE("continuum edges") {
  const double mc2 = kAU.rest_energy();
  const ContinuumEdges box = continuum_edges(FamilySpec::box(1.0, 0.1).at(-2.0 * mc2), kAU);
  CHECK(box.lower == doctest::Approx(-mc2));
  CHECK(box.upper == doctest::Approx(mc2));
  const SpectrumProblem p = step_problem();
  const double V0 = 3.2 * mc2;
  const ContinuumEdges e = continuum_edges(p.family.at(V0), kAU);
  const double c2 = kAU.c * kAU.c;
  const double py = p.family.transverse.p_y;
  const double dy = py - kAU.charge * p.family.A0;
  CHECK(e.upper == doctest::Approx(std::sqrt(c2 * py * py + mc2 * mc2)));
  CHECK(e.lower == doctest::Approx(V0 - std::sqrt(c2 * dy * dy + mc2 * mc2)));
  CHECK(!e.overlapping());
  CHECK(continuum_edges(p.family.at(3.4 * mc2), kAU).overlapping());
}

TEST_CASE("overlap threshold reduces to twice the rest energy") {
  CHECK(overlap_threshold({}, 0.0, kAU) == 2.0 * kAU.rest_energy());
  const double mc2 = kAU.rest_energy();
  const double qA0 = kAU.charge * 2.64 * kAU.c;
  const double expect = 2.0 * std::sqrt(kAU.c * kAU.c * 0.25 * qA0 * qA0 + mc2 * mc2);
  CHECK(overlap_threshold({0.5 * qA0, 0.0}, qA0, kAU) == doctest::Approx(expect));
  CHECK(expect / mc2 == doctest::Approx(3.31204).epsilon(1e-5));
}

TEST_CASE("free field has no bound states and is regime-less") {
  const Grid g(64, 16.0 * kAU.compton_length());
  const FieldConfig cfg;
  const Tolerances tol = Tolerances::defaults(kAU);
  const LabeledSpectrum s =
      classify_states(eigensolve(assemble(g, cfg, kAU), tol), g, cfg, kAU, tol);
  CHECK(s.states_of(StateKind::Bound).empty());
  CHECK(s.bound_pair_count() == 0);
  CHECK(regime_classify(s, FieldFamily::BoxOnly, tol) == Regime::Free);
}

TEST_CASE("box regimes at the caption strengths") {
  const SpectrumProblem p = box_problem();
  const double mc2 = kAU.rest_energy();
  const std::pair<double, Regime> cases[] = {
      {-2.17, Regime::I}, {-2.195, Regime::II}, {-2.22, Regime::III}, {-2.25, Regime::IV}};
  for (auto [v, r] : cases) {
    CAPTURE(v);
    const LabeledSpectrum s = p.solve(v * mc2);
    CHECK(regime_classify(s, FieldFamily::BoxOnly, p.tolerances) == r);
  }
  const LabeledSpectrum one = p.solve(-2.17 * mc2);
  bool near_lower = false;
  for (auto i : one.states_of(StateKind::Bound)) {
    CHECK(one.spectrum.energies[i].real() < mc2);
    if (one.spectrum.energies[i].real() < -0.95 * mc2) near_lower = true;
  }
  CHECK(!one.states_of(StateKind::Bound).empty());
  CHECK(!near_lower);
  const LabeledSpectrum three = p.solve(-2.22 * mc2);
  CHECK(three.bound_pair_count() == 1);
}

TEST_CASE("step with magnetic field regimes") {
  const SpectrumProblem p = step_problem();
  const double mc2 = kAU.rest_energy();
  const std::tuple<double, Regime, int> cases[] = {{2.6, Regime::I, 0},
                                                   {2.9, Regime::II, 1},
                                                   {3.07, Regime::III, 0},
                                                   {3.2, Regime::IV, 2}};
  for (auto [v, r, pairs] : cases) {
    CAPTURE(v);
    const LabeledSpectrum s = p.solve(v * mc2);
    CHECK(regime_classify(s, FieldFamily::StepWithB, p.tolerances) == r);
    CHECK(s.bound_pair_count() == pairs);
  }
  const LabeledSpectrum five = p.solve(3.4 * mc2);
  CHECK(five.continuum_overlap);
  CHECK(regime_classify(five, FieldFamily::StepWithB, p.tolerances) == Regime::V);
}

TEST_CASE("pseudodegenerate pairs share one imaginary part") {
  const SpectrumProblem p = step_problem();
  const LabeledSpectrum s = p.solve(3.2 * kAU.rest_energy());
  std::vector<double> im;
  for (auto i : s.states_of(StateKind::BoundPair)) im.push_back(std::abs(s.spectrum.energies[i].imag()));
  REQUIRE(im.size() == 4);
  for (double v : im) CHECK(std::abs(v - im[0]) < 1e-6 * im[0]);
}

TEST_CASE("sweep tracks regimes in order and zero field stays free") {
  const SpectrumProblem p = box_problem();
  const double mc2 = kAU.rest_energy();
  std::vector<double> vs;
  for (int i = 0; i <= 8; ++i) vs.push_back((-2.10 - 0.025 * i) * mc2);
  const auto pts = sweep(p, vs, 2);
  REQUIRE(pts.size() == vs.size());
  std::vector<Regime> seen;
  for (const auto& pt : pts) {
    if (seen.empty() || seen.back() != pt.regime) seen.push_back(pt.regime);
  }
  CHECK(seen == std::vector<Regime>{Regime::I, Regime::II, Regime::III, Regime::IV});
  // every tracked state has a curve id and ids are unique per point
  for (const auto& pt : pts) {
    std::vector<int> ids;
    for (const auto& s : pt.states) {
      CHECK(s.curve >= 0);
      ids.push_back(s.curve);
    }
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
  }

  SpectrumProblem zero = box_problem(64, 16.0);
  const auto flat = sweep(zero, {0.0});
  CHECK(flat.size() == 1);
  for (const auto& pt : flat) CHECK(pt.regime == Regime::Free);
}

TEST_CASE("critical points") {
  const SpectrumProblem p = box_problem();
  const double mc2 = kAU.rest_energy();
  const CriticalPoint c =
      find_critical(p, -2.15 * mc2, -2.30 * mc2, Transition::Coalescence, 1e-3 * mc2);
  CHECK(std::abs(c.upper - c.lower) < 1e-3 * mc2);
  CHECK(std::abs(c.V0) / mc2 > 2.195);
  CHECK(std::abs(c.V0) / mc2 < 2.22);
  CHECK_THROWS_AS(find_critical(p, -2.10 * mc2, -2.15 * mc2, Transition::Coalescence, 1e-3 * mc2),
                  ConfigError);

  // no vector potential: the two continua meet at V0 = 2 m c^2
  const SpectrumProblem flat = step_problem(128, 32.0, 0.0);
  const CriticalPoint o = find_critical(flat, 1.8 * mc2, 2.2 * mc2, Transition::Overlap, 1e-3 * mc2);
  const double dp = 2 * M_PI * kAU.hbar / flat.grid.length();
  const double spacing = std::sqrt(dp * dp * kAU.c * kAU.c + mc2 * mc2) - mc2;
  CHECK(std::abs(o.V0 - 2.0 * mc2) < spacing);
}

TEST_CASE("biorthogonal densities") {
  const SpectrumProblem p = step_problem();
  const double dx = p.grid.spacing();

  const LabeledSpectrum real = p.solve(2.6 * kAU.rest_energy());
  const auto bound = real.states_of(StateKind::Bound);
  REQUIRE(!bound.empty());
  for (auto i : bound) {
    const Eigen::VectorXcd rho = biorthogonal_density(real, i, p.grid);
    CHECK(std::abs(rho.sum() * dx - 1.0) < 1e-12);
    CHECK(rho.imag().cwiseAbs().maxCoeff() < 1e-10 * rho.real().cwiseAbs().maxCoeff());
  }
  const auto cont = real.states_of(StateKind::Continuum);
  REQUIRE(!cont.empty());
  CHECK_THROWS_AS(biorthogonal_density(real, cont.front(), p.grid), ConfigError);

  const LabeledSpectrum pair = p.solve(2.9 * kAU.rest_energy());
  const auto pr = pair.states_of(StateKind::BoundPair);
  REQUIRE(pr.size() == 2);
  const Eigen::VectorXcd rho = biorthogonal_density(pair, pr[0], p.grid);
  CHECK(rho.imag().cwiseAbs().maxCoeff() > 1e-3 * rho.cwiseAbs().maxCoeff());
  const int n = p.grid.size();
  const double left = rho.head(n / 2).cwiseAbs().sum();
  const double right = rho.tail(n / 2).cwiseAbs().sum();
  CHECK(left > 0.1 * (left + right));
  CHECK(right > 0.1 * (left + right));
}

TEST_CASE("densities of the two pseudodegenerate pairs mirror each other") {
  const SpectrumProblem p = step_problem();
  const LabeledSpectrum s = p.solve(3.2 * kAU.rest_energy());
  const auto pr = s.states_of(StateKind::BoundPair);
  REQUIRE(pr.size() == 4);
  const Grid& g = p.grid;
  // pr[0], pr[1] form the lower pair, pr[2], pr[3] the upper one
  const Eigen::VectorXcd a = biorthogonal_density(s, pr[0], g);
  const Eigen::VectorXcd b3 = biorthogonal_density(s, pr[3], g);
  const Eigen::VectorXcd b2 = biorthogonal_density(s, pr[2], g);
  double d3 = 0.0, d2 = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    d3 = std::max(d3, std::abs(a[i] - b3[g.mirror_index(i)]));
    d2 = std::max(d2, std::abs(a[i] - std::conj(b2[g.mirror_index(i)])));
  }
  const double scale = a.cwiseAbs().maxCoeff();
  CHECK(std::min(d2, d3) < 1e-6 * scale);
}
