#include <doctest.h>

#include <cmath>

#include "kgpair/dynamics.hpp"

using namespace kgpair;

namespace {

const PhysicalConstants kAU;

Grid small_grid(int n = 32, double length = 8.0) {
  return Grid(n, length * kAU.compton_length());
}

// Gaussian packet in the upper component plus a little in the lower one.
Eigen::MatrixXcd packet(const Grid& g) {
  const double lc = kAU.compton_length();
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(2 * g.size(), 2);
  for (int i = 0; i < g.size(); ++i) {
    const double x = g.position(i) / lc;
    s(2 * i, 0) = std::exp(-x * x) * std::exp(Complex(0, 0.5 * x));
    s(2 * i + 1, 0) = 0.2 * std::exp(-x * x);
    s(2 * i, 1) = std::exp(-0.5 * (x - 1) * (x - 1));
  }
  return s;
}

EvolutionRecord synthetic(double t_end, int samples, const std::function<double(double)>& n) {
  EvolutionRecord r;
  for (int i = 0; i <= samples; ++i) {
    const double t = t_end * i / samples;
    r.times.push_back(t);
    r.number.push_back(n(t));
    r.log_number.push_back(std::log(n(t)));
  }
  return r;
}

SpectrumProblem box_problem() {
  const double lc = kAU.compton_length();
  return SpectrumProblem{Grid(256, 64.0 * lc), FamilySpec::box(2.2 * lc, 0.2 * lc), kAU,
                         DerivativeScheme::Spectral, Tolerances::defaults(kAU)};
}

}  // namespace

TEST_CASE("free modes diagonalize the free Hamiltonian") {
  const Grid g = small_grid();
  const TransverseMomenta tr{0.3 * kAU.c, -0.2 * kAU.c};
  for (auto scheme : {DerivativeScheme::Spectral, DerivativeScheme::FiniteDifference3}) {
    const FreeModeBasis b = build_free_basis(g, kAU, tr, scheme);
    FieldConfig cfg;
    cfg.transverse = tr;
    const Eigen::MatrixXcd h = assemble(g, cfg, kAU, scheme).matrix;
    for (int p = 0; p < g.size(); ++p) {
      const double e = b.energies[p];
      CHECK((h * b.positive.col(p) - e * b.positive.col(p)).norm() < 1e-10 * e * b.positive.col(p).norm());
      CHECK((h * b.negative.col(p) + e * b.negative.col(p)).norm() < 1e-10 * e * b.negative.col(p).norm());
    }
    if (scheme == DerivativeScheme::Spectral) {
      const double mc2 = kAU.rest_energy();
      for (int p = 0; p < g.size(); ++p) {
        const double pp = b.momenta[p];
        const double k2 = pp * pp + tr.p_y * tr.p_y + tr.p_z * tr.p_z;
        CHECK(b.energies[p] == doctest::Approx(std::sqrt(k2 * kAU.c * kAU.c + mc2 * mc2)));
      }
    }
  }
}

TEST_CASE("zero-momentum mode is the bare upper component") {
  const Grid g = small_grid();
  const FreeModeBasis b = build_free_basis(g, kAU);
  const int zero = g.size() / 2;
  CHECK(b.momenta[zero] == 0.0);
  CHECK(b.energies[zero] == doctest::Approx(kAU.rest_energy()));
  const double amp = 1.0 / std::sqrt(g.length());
  for (int i = 0; i < g.size(); ++i) {
    CHECK(std::abs(b.positive(2 * i, zero) - amp) < 1e-12 * amp);
    CHECK(std::abs(b.positive(2 * i + 1, zero)) < 1e-12 * amp);
  }
}

TEST_CASE("free modes are pseudo-orthonormal and complete") {
  const Grid g = small_grid();
  const FreeModeBasis b = build_free_basis(g, kAU);
  const double dx = g.spacing();
  const Eigen::Index n = g.size();
  CHECK((pseudo_gram(b.positive, b.positive, dx) - Eigen::MatrixXcd::Identity(n, n)).norm() < 1e-10);
  CHECK((pseudo_gram(b.negative, b.negative, dx) + Eigen::MatrixXcd::Identity(n, n)).norm() < 1e-10);
  CHECK(pseudo_gram(b.positive, b.negative, dx).norm() < 1e-10);
  const Eigen::MatrixXcd id = dx * (b.positive * apply_eta(b.positive).adjoint() -
                                    b.negative * apply_eta(b.negative).adjoint());
  CHECK((id - Eigen::MatrixXcd::Identity(2 * n, 2 * n)).norm() < 1e-10);
}

TEST_CASE("creation amplitudes agree with the direct overlap") {
  const Grid g = small_grid();
  const FreeModeBasis b = build_free_basis(g, kAU);
  const Eigen::MatrixXcd s = packet(g);
  const Eigen::MatrixXcd direct = pseudo_gram(b.positive, s, g.spacing());
  CHECK((creation_amplitudes(b, s) - direct).norm() < 1e-12 * direct.norm());
  CHECK(particle_number(b, s) == doctest::Approx(direct.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("no pairs without a field") {
  const Grid g = small_grid();
  const FreeModeBasis b = build_free_basis(g, kAU);
  CHECK(particle_number(b, b.negative) < 1e-20);
  CHECK(particle_density(b, b.negative).cwiseAbs().maxCoeff() < 1e-20);
  const BiorthogonalSpectrum s = eigensolve(assemble(g, FieldConfig{}, kAU), Tolerances::defaults(kAU));
  for (double t : {0.0, 1e-3, 0.5}) {
    CHECK(particle_number(b, propagate_static(s, b.negative, t, kAU.hbar)) < 1e-18);
  }
}

TEST_CASE("static propagation of eigenstates") {
  const SpectrumProblem p = box_problem();
  const Grid g(64, 16.0 * kAU.compton_length());
  const FieldConfig cfg = p.family.at(-2.25 * kAU.rest_energy());
  const BiorthogonalSpectrum s = eigensolve(assemble(g, cfg, kAU), Tolerances::defaults(kAU));
  const Eigen::MatrixXcd init = packet(g);
  CHECK((propagate_static(s, init, 0.0, kAU.hbar) - init).norm() < 1e-10 * init.norm());

  const double t = 3.0 * kAU.time_unit();
  for (Eigen::Index i = 0; i < s.size(); i += 7) {
    if (s.complex_energy[i]) continue;
    const Eigen::VectorXcd psi = s.right.col(i);
    const Eigen::VectorXcd got = propagate_static(s, psi, t, kAU.hbar);
    const Complex phase = std::exp(Complex(0, -s.energies[i].real() * t / kAU.hbar));
    CHECK((got - phase * psi).norm() < 1e-9 * psi.norm());
  }
  // phi_i(t) psi_i(t) is constant for a growing state
  Eigen::Index grow = -1;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s.complex_energy[i] && s.energies[i].imag() > 0.0) grow = i;
  }
  REQUIRE(grow >= 0);
  const Eigen::VectorXcd psi = propagate_static(s, s.right.col(grow), 40.0 * kAU.time_unit(), kAU.hbar);
  const Complex z = std::exp(Complex(0, s.energies[grow].real() * 40.0 * kAU.time_unit() / kAU.hbar) +
                             Complex(-s.energies[grow].imag() * 40.0 * kAU.time_unit() / kAU.hbar, 0));
  const Complex product = (s.left.row(grow) * z * psi).value();
  CHECK(std::abs(product - 1.0) < 1e-10);
}

TEST_CASE("Crank-Nicolson is second order") {
  const Grid g = small_grid(32, 8.0);
  FieldConfig cfg;
  cfg.scalar = SmoothBox{-1.2 * kAU.rest_energy(), 2.2 * kAU.compton_length(), 0.4 * kAU.compton_length()};
  const Eigen::MatrixXcd h = assemble(g, cfg, kAU).matrix;
  const BiorthogonalSpectrum s = eigensolve(h, Tolerances::defaults(kAU));
  const Eigen::MatrixXcd init = packet(g);
  const double tu = kAU.time_unit();

  // single step
  std::vector<double> local;
  for (double dt : {0.02 * tu, 0.01 * tu, 0.005 * tu}) {
    const Eigen::MatrixXcd exact = propagate_static(s, init, dt, kAU.hbar);
    local.push_back((CrankNicolson(h, dt, kAU.hbar).step(init) - exact).norm());
  }
  CHECK(local[0] / local[1] == doctest::Approx(8.0).epsilon(0.1));
  CHECK(local[1] / local[2] == doctest::Approx(8.0).epsilon(0.1));

  // to t = 10 hbar / m c^2
  const double t_end = 10.0 * tu;
  const Eigen::MatrixXcd exact = propagate_static(s, init, t_end, kAU.hbar);
  std::vector<double> global;
  for (int steps : {1000, 2000, 4000}) {
    const CrankNicolson cn(h, t_end / steps, kAU.hbar);
    Eigen::MatrixXcd x = init;
    for (int i = 0; i < steps; ++i) x = cn.step(x);
    global.push_back((x - exact).cwiseAbs().maxCoeff());
  }
  CHECK(global[0] / global[1] == doctest::Approx(4.0).epsilon(0.1));
  CHECK(global[1] / global[2] == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("time-dependent step and factored propagators agree") {
  const Grid g = small_grid(64, 16.0);
  const double lc = kAU.compton_length();
  const double mc2 = kAU.rest_energy();
  const Eigen::VectorXd shape = sample_scalar(SmoothBox{1.0, 2.2 * lc, 0.2 * lc}, g);
  const TransverseMomenta tr{0.1 * kAU.c, 0.0};
  const double dt = 0.05 * kAU.time_unit();
  ScaledPotentialPropagator prop(g, kAU, tr, DerivativeScheme::Spectral, shape, dt);
  CHECK(prop.support_size() > 0);
  CHECK(prop.support_size() < 2 * g.size());

  FieldConfig cfg;
  cfg.scalar = SmoothBox{-2.0 * mc2, 2.2 * lc, 0.2 * lc};
  cfg.transverse = tr;
  const Eigen::MatrixXcd h = assemble(g, cfg, kAU).matrix;
  CHECK((prop.hamiltonian(-2.0 * mc2) - h).norm() < 1e-12 * h.norm());

  Eigen::MatrixXcd a = packet(g);
  Eigen::MatrixXcd b = a;
  Eigen::MatrixXcd c = a;
  const CrankNicolson cn(h, dt, kAU.hbar);
  const HamiltonianProvider provider = [&](double) { return h; };
  for (int i = 0; i < 20; ++i) {
    prop.step(a, -2.0 * mc2);
    b = cn.step(b);
    c = step_time_dependent(provider, c, i * dt, dt, kAU.hbar);
  }
  CHECK((a - b).norm() < 1e-10 * b.norm());
  CHECK((c - b).norm() < 1e-10 * b.norm());

  // a changing strength rebuilds the correction
  Eigen::MatrixXcd d = packet(g);
  Eigen::MatrixXcd e = d;
  for (int i = 0; i < 5; ++i) {
    const double v = -mc2 * (1.0 + 0.1 * i);
    prop.step(d, v);
    e = CrankNicolson(prop.hamiltonian(v), dt, kAU.hbar).step(e);
  }
  CHECK((d - e).norm() < 1e-10 * e.norm());
}

TEST_CASE("Crank-Nicolson conserves the pseudo-Gram matrix") {
  const Grid g = small_grid(32, 8.0);
  const FreeModeBasis b = build_free_basis(g, kAU);
  FieldConfig cfg;
  cfg.scalar = SmoothBox{-1.5 * kAU.rest_energy(), 2.2 * kAU.compton_length(), 0.2 * kAU.compton_length()};
  const CrankNicolson cn(assemble(g, cfg, kAU).matrix, 0.1 * kAU.time_unit(), kAU.hbar);
  Eigen::MatrixXcd x = b.negative;
  const Eigen::MatrixXcd g0 = pseudo_gram(x, x, g.spacing());
  for (int i = 0; i < 200; ++i) x = cn.step(x);
  CHECK((pseudo_gram(x, x, g.spacing()) - g0).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("regime III pair creation") {
  const double mc2 = kAU.rest_energy();
  const SpectrumProblem p = box_problem();
  const LabeledSpectrum ls = p.solve(-2.22 * mc2);
  const FreeModeBasis basis = build_free_basis(p.grid, kAU);
  double im = 0.0;
  for (auto i : ls.states_of(StateKind::BoundPair)) im = std::max(im, ls.spectrum.energies[i].imag());
  REQUIRE(im > 0.0);
  const double rate = 2.0 * im / kAU.hbar;

  EvolutionOptions o;
  o.t_max = default_run_length(ls.spectrum, kAU);
  CHECK(o.t_max == doctest::Approx(12.0 / rate));
  o.samples = 600;
  o.density_times = {0.0, o.t_max};
  const EvolutionRecord r = evolve_static(ls.spectrum, basis, o);
  REQUIRE(r.times.size() == 601);
  CHECK(r.number.front() < 1e-10);
  for (double n : r.number) CHECK(n >= 0.0);

  const GrowthFit fit = fit_growth_rate(r);
  CHECK(std::abs(fit.rate - rate) < 0.05 * rate);

  // N exp(-Gamma t) settles over the last quarter
  const size_t q = 3 * r.times.size() / 4;
  const double first = r.number[q] * std::exp(-rate * r.times[q]);
  const double last = r.number.back() * std::exp(-rate * r.times.back());
  CHECK(std::abs(last - first) < 0.05 * last);

  REQUIRE(r.densities.size() == 2);
  CHECK(r.densities[0].rho.cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::VectorXd& rho = r.densities[1].rho;
  const double dx = p.grid.spacing();
  CHECK(rho.sum() * dx == doctest::Approx(r.number.back()).epsilon(1e-8));
  const double lc = kAU.compton_length();
  double inside = 0.0;
  for (int i = 0; i < p.grid.size(); ++i) {
    if (std::abs(p.grid.position(i)) <= (1.1 + 1.0) * lc) inside += rho[i] * dx;
  }
  CHECK(inside >= 0.8 * rho.sum() * dx);
}

TEST_CASE("static evolution matches explicit propagation") {
  const Grid g = small_grid(32, 16.0);
  FieldConfig cfg;
  cfg.scalar = SmoothBox{-2.25 * kAU.rest_energy(), 2.2 * kAU.compton_length(), 0.2 * kAU.compton_length()};
  const BiorthogonalSpectrum s = eigensolve(assemble(g, cfg, kAU), Tolerances::defaults(kAU));
  const FreeModeBasis b = build_free_basis(g, kAU);
  const StaticEvolution ev(s, b);
  for (double t : {0.0, 5.0, 30.0}) {
    const double tt = t * kAU.time_unit();
    const Eigen::MatrixXcd x = propagate_static(s, b.negative, tt, kAU.hbar);
    const double n = particle_number(b, x);
    if (t == 0.0) {
      CHECK(ev.number(tt) < 1e-10);
    } else {
      CHECK(ev.number(tt) == doctest::Approx(n).epsilon(1e-8));
    }
    CHECK((ev.negative_modes(tt) - x).norm() <= 1e-10 * x.norm());
    CHECK(std::abs(ev.density(tt).sum() * g.spacing() - n) <= 1e-8 * n + 1e-12);
  }
}

TEST_CASE("growth fit on synthetic records") {
  const double g = 0.3;
  const EvolutionRecord pure = synthetic(40.0, 400, [&](double t) { return std::exp(2 * g * t); });
  const GrowthFit f = fit_growth_rate(pure);
  CHECK(f.rate == doctest::Approx(2 * g).epsilon(1e-12));
  CHECK(f.standard_error < 1e-10);

  const double w = 2.0;
  const EvolutionRecord wobble = synthetic(
      40.0, 4000, [&](double t) { return std::exp(2 * g * t) * (1 + 0.05 * std::sin(w * t)); });
  const double period = 2 * M_PI / w;
  const GrowthFit fw = fit_growth_rate(wobble, FitWindow{20.0, 20.0 + 3 * period});
  CHECK(std::abs(fw.rate - 2 * g) < 0.01 * 2 * g);

  CHECK_THROWS_AS(fit_growth_rate(pure, FitWindow{0.0, 0.5}), ConfigError);
  const auto running = running_growth_rate(pure, 20);
  CHECK(std::isnan(running.front()));
  CHECK(running.back() == doctest::Approx(2 * g));
}

TEST_CASE("default fit window") {
  const EvolutionRecord r = synthetic(100.0, 1000, [](double t) {
    return (1.0 + std::sin(t)) * 0.1 + std::exp(0.2 * t);
  });
  const FitWindow w = default_fit_window(r);
  CHECK(w.end == doctest::Approx(100.0));
  CHECK(w.begin >= 50.0 - 1e-9);
}

TEST_CASE("oscillation frequency") {
  const double w = 1.7;
  const EvolutionRecord r = synthetic(200.0, 4000, [&](double t) {
    const double s = std::sin(0.5 * w * t);
    return s * s + 1e-3;
  });
  const auto f = oscillation_frequency(r);
  REQUIRE(f.has_value());
  CHECK(*f == doctest::Approx(w).epsilon(0.01));

  const double gamma = 0.05;
  const EvolutionRecord grow = synthetic(200.0, 4000, [&](double t) {
    return std::exp(gamma * t) * (1.0 + 0.3 * std::cos(w * t));
  });
  const auto fg = oscillation_frequency(grow, gamma);
  REQUIRE(fg.has_value());
  CHECK(*fg == doctest::Approx(w).epsilon(0.01));

  const EvolutionRecord flat = synthetic(200.0, 4000, [](double) { return 1.0; });
  CHECK(!oscillation_frequency(flat).has_value());
}
