#include "kgpair/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include <Eigen/LU>

#include "lapack.hpp"

namespace kgpair {

namespace {

constexpr double kMaxCondition = 1e12;
constexpr double kSpeciesCut = 1e-6;

struct IncludedState {
  SweepState state;
  Eigen::VectorXcd right;  // kept for bound states only
  Eigen::RowVectorXcd left;
};

struct SweepEntry {
  Regime regime = Regime::Free;
  std::vector<IncludedState> states;
};

SweepEntry sweep_entry(const SpectrumProblem& problem, double V0) {
  SweepEntry e;
  LabeledSpectrum s;
  try {
    s = problem.solve(V0);
  } catch (const NonDiagonalizableError&) {
    e.regime = Regime::Boundary;
    return e;
  }
  e.regime = regime_classify(s, problem.family.family, problem.tolerances);
  for (Eigen::Index i = 0; i < s.spectrum.size(); ++i) {
    if (s.kind[i] == StateKind::Continuum) continue;
    IncludedState st;
    st.state.energy = s.spectrum.energies[i];
    st.state.kind = s.kind[i];
    st.state.species = s.species[i];
    if (s.kind[i] != StateKind::Resonance) {
      st.right = s.spectrum.right.col(i);
      st.left = s.spectrum.left.row(i);
    }
    e.states.push_back(std::move(st));
  }
  return e;
}

struct Track {
  int curve;
  Complex energy;
  Complex velocity;  // dE/dV0
  Eigen::RowVectorXcd left;
};

void link_curves(std::vector<SweepPoint>& points, std::vector<SweepEntry>& entries) {
  int next_curve = 0;
  std::vector<Track> tracks;
  for (size_t p = 0; p < entries.size(); ++p) {
    auto& states = entries[p].states;
    const double dV = p > 0 ? points[p].V0 - points[p - 1].V0 : 0.0;
    std::vector<int> assigned(states.size(), -1);
    std::vector<bool> used(tracks.size(), false);

    struct Candidate {
      double cost;
      size_t track;
      size_t state;
    };
    std::vector<Candidate> candidates;
    for (size_t a = 0; a < tracks.size(); ++a) {
      const Complex pred = tracks[a].energy + tracks[a].velocity * dV;
      const double limit = 10.0 * std::abs(dV) * std::max(1.0, std::abs(tracks[a].velocity));
      for (size_t j = 0; j < states.size(); ++j) {
        const double cost = std::abs(pred - states[j].state.energy);
        if (cost <= limit) candidates.push_back({cost, a, j});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
      if (x.cost != y.cost) return x.cost < y.cost;
      if (x.track != y.track) return x.track < y.track;
      return x.state < y.state;
    });

    auto overlap = [&](size_t a, size_t j) {
      if (tracks[a].left.size() == 0 || states[j].right.size() == 0) return 0.0;
      return std::abs((tracks[a].left * states[j].right).value());
    };

    for (const auto& c : candidates) {
      if (used[c.track] || assigned[c.state] >= 0) continue;
      // Near-ties go to the state with the larger eigenvector overlap.
      size_t best = c.state;
      const double tie = 1e-9 * std::abs(states[c.state].state.energy) + 1e-3 * c.cost;
      for (const auto& d : candidates) {
        if (d.track != c.track || assigned[d.state] >= 0 || d.state == best) continue;
        if (d.cost - c.cost <= tie && overlap(c.track, d.state) > overlap(c.track, best)) {
          best = d.state;
        }
      }
      used[c.track] = true;
      assigned[best] = static_cast<int>(c.track);
    }

    std::vector<Track> next;
    for (size_t j = 0; j < states.size(); ++j) {
      Track t;
      if (assigned[j] >= 0) {
        const Track& old = tracks[static_cast<size_t>(assigned[j])];
        t.curve = old.curve;
        t.velocity = dV != 0.0 ? (states[j].state.energy - old.energy) / dV : Complex(0.0);
      } else {
        t.curve = next_curve++;
        t.velocity = 0.0;
      }
      t.energy = states[j].state.energy;
      t.left = states[j].left;
      states[j].state.curve = t.curve;
      points[p].states.push_back(states[j].state);
      next.push_back(std::move(t));
    }
    tracks = std::move(next);
    states.clear();
  }
}

}  // namespace

bool BiorthogonalSpectrum::conjugate_closed() const {
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (complex_energy[static_cast<size_t>(i)] && partner[static_cast<size_t>(i)] < 0) {
      return false;
    }
  }
  return true;
}

BiorthogonalSpectrum eigensolve(const Eigen::MatrixXcd& h, const Tolerances& tol) {
  tol.validate();
  const detail::EigenDecomposition dec = detail::general_eigen(h);
  const Eigen::Index n = dec.values.size();
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const Complex ea = dec.values[a];
    const Complex eb = dec.values[b];
    if (ea.real() != eb.real()) return ea.real() < eb.real();
    return ea.imag() < eb.imag();
  });

  BiorthogonalSpectrum s;
  s.energies.resize(n);
  s.right.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    s.energies[j] = dec.values[order[static_cast<size_t>(j)]];
    s.right.col(j) = dec.vectors.col(order[static_cast<size_t>(j)]);
  }

  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(s.right);
  s.left = lu.inverse();
  const double norm_r = s.right.cwiseAbs().colwise().sum().maxCoeff();
  const double norm_l = s.left.cwiseAbs().colwise().sum().maxCoeff();
  s.condition = norm_r * norm_l;
  if (!s.left.allFinite() || !(s.condition < kMaxCondition)) {
    throw NonDiagonalizableError(
        "non-diagonalizable near exceptional point (eigenvector condition " +
        std::to_string(s.condition) + ")");
  }
  s.biorthogonality_residual =
      (s.left * s.right - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();

  s.partner.assign(static_cast<size_t>(n), -1);
  s.complex_energy.assign(static_cast<size_t>(n), false);
  std::vector<Eigen::Index> cplx;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(s.energies[i].imag()) > tol.im_eps) {
      s.complex_energy[static_cast<size_t>(i)] = true;
      cplx.push_back(i);
    }
  }
  for (Eigen::Index i : cplx) {
    Eigen::Index best = -1;
    double dist = tol.pair_eps;
    for (Eigen::Index j : cplx) {
      if (j == i) continue;
      const double d = std::abs(s.energies[j] - std::conj(s.energies[i]));
      if (d < dist) {
        dist = d;
        best = j;
      }
    }
    s.partner[static_cast<size_t>(i)] = best;
  }
  return s;
}

BiorthogonalSpectrum eigensolve(const FVHamiltonian& h, const Tolerances& tol) {
  return eigensolve(h.matrix, tol);
}

double left_eigen_residual(const Eigen::MatrixXcd& h, const BiorthogonalSpectrum& s) {
  Eigen::MatrixXcd y = apply_eta(s.left.adjoint());
  y.colwise().normalize();
  const Eigen::MatrixXcd r = h * y - y * s.energies.conjugate().asDiagonal();
  const double hnorm = h.cwiseAbs().colwise().sum().maxCoeff();
  return r.colwise().norm().maxCoeff() / hnorm;
}

ContinuumEdges continuum_edges(const FieldConfig& cfg, const PhysicalConstants& k) {
  const Asymptotes v = scalar_asymptotes(cfg.scalar);
  const Asymptotes a = vector_asymptotes(cfg.vector);
  auto rest = [&](double A) {
    const double py = cfg.transverse.p_y - k.charge * A;
    const double pz = cfg.transverse.p_z;
    return std::sqrt(k.c * k.c * (py * py + pz * pz) + k.rest_energy() * k.rest_energy());
  };
  const double el = rest(a.left);
  const double er = rest(a.right);
  return ContinuumEdges{std::max(v.left - el, v.right - er), std::min(v.left + el, v.right + er)};
}

double overlap_threshold(const TransverseMomenta& t, double qA0, const PhysicalConstants& k) {
  const double mc2 = k.rest_energy();
  const double c2 = k.c * k.c;
  const double pz2 = t.p_z * t.p_z;
  const double dy = t.p_y - qA0;
  return std::sqrt(c2 * (t.p_y * t.p_y + pz2) + mc2 * mc2) +
         std::sqrt(c2 * (dy * dy + pz2) + mc2 * mc2);
}

double localization(const Eigen::Ref<const Eigen::VectorXcd>& psi, const Grid& grid) {
  const double r = 0.25 * grid.length();
  double inside = 0.0;
  double total = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    const double w = std::norm(psi[2 * i]) + std::norm(psi[2 * i + 1]);
    total += w;
    if (std::abs(grid.position(i)) <= r) inside += w;
  }
  return total > 0.0 ? inside / total : 0.0;
}

std::vector<Eigen::Index> LabeledSpectrum::states_of(StateKind k) const {
  std::vector<Eigen::Index> out;
  for (size_t i = 0; i < kind.size(); ++i) {
    if (kind[i] == k) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

int LabeledSpectrum::bound_pair_count() const {
  return static_cast<int>(states_of(StateKind::BoundPair).size()) / 2;
}

LabeledSpectrum classify_states(BiorthogonalSpectrum spectrum, const Grid& grid,
                                const FieldConfig& cfg, const PhysicalConstants& k,
                                const Tolerances& tol) {
  LabeledSpectrum out;
  const Eigen::Index n = spectrum.size();
  if (spectrum.right.rows() != 2 * grid.size()) {
    throw ConfigError("classify_states: spectrum does not match the grid");
  }
  out.edges = continuum_edges(cfg, k);
  out.kind.resize(static_cast<size_t>(n));
  out.species.resize(static_cast<size_t>(n));
  out.localization.resize(n);
  out.eta_norm.resize(n);

  double max_anti = -std::numeric_limits<double>::infinity();
  double min_part = std::numeric_limits<double>::infinity();
  bool resonance = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto col = spectrum.right.col(i);
    const double up = col(Eigen::seqN(0, grid.size(), 2)).squaredNorm();
    const double lo = col(Eigen::seqN(1, grid.size(), 2)).squaredNorm();
    out.eta_norm[i] = (up - lo) / (up + lo);
    out.localization[i] = localization(col, grid);
    const bool localized = out.localization[i] >= tol.loc_threshold;
    const size_t u = static_cast<size_t>(i);
    if (spectrum.complex_energy[u]) {
      out.kind[u] = localized ? StateKind::BoundPair : StateKind::Resonance;
      out.species[u] = Species::Unassignable;
      resonance = resonance || !localized;
      continue;
    }
    const double e = spectrum.energies[i].real();
    const bool in_gap =
        !out.edges.overlapping() && e > out.edges.lower && e < out.edges.upper;
    out.kind[u] = (in_gap && localized) ? StateKind::Bound : StateKind::Continuum;
    if (out.eta_norm[i] > kSpeciesCut) {
      out.species[u] = Species::Particle;
    } else if (out.eta_norm[i] < -kSpeciesCut) {
      out.species[u] = Species::Antiparticle;
    } else {
      out.species[u] = Species::Unassignable;
    }
    if (out.kind[u] == StateKind::Continuum) {
      if (out.species[u] == Species::Antiparticle) max_anti = std::max(max_anti, e);
      if (out.species[u] == Species::Particle) min_part = std::min(min_part, e);
    }
  }
  out.continuum_overlap = resonance || max_anti >= min_part;
  out.spectrum = std::move(spectrum);
  return out;
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Free: return "free";
    case Regime::I: return "I";
    case Regime::II: return "II";
    case Regime::III: return "III";
    case Regime::IV: return "IV";
    case Regime::V: return "V";
    case Regime::Boundary: return "boundary";
    case Regime::Unclassifiable: return "unclassifiable";
  }
  return "unclassifiable";
}

std::string_view to_string(StateKind k) {
  switch (k) {
    case StateKind::Bound: return "bound";
    case StateKind::BoundPair: return "bound_pair";
    case StateKind::Continuum: return "continuum";
    case StateKind::Resonance: return "resonance";
  }
  return "continuum";
}

std::string_view to_string(Species s) {
  switch (s) {
    case Species::Particle: return "particle";
    case Species::Antiparticle: return "antiparticle";
    case Species::Unassignable: return "unassignable";
  }
  return "unassignable";
}

std::string_view to_string(Transition t) {
  switch (t) {
    case Transition::Emergence: return "emergence";
    case Transition::Coalescence: return "coalescence";
    case Transition::Anticoalescence: return "anticoalescence";
    case Transition::Overlap: return "overlap";
  }
  return "emergence";
}

Regime regime_classify(const LabeledSpectrum& s, FieldFamily family, const Tolerances& tol) {
  const auto bound = s.states_of(StateKind::Bound);
  const auto pair_members = s.states_of(StateKind::BoundPair);
  const int pairs = s.bound_pair_count();
  const auto& e = s.spectrum.energies;

  // Opposite-species bound levels that have (almost) met.
  for (size_t a = 0; a < bound.size(); ++a) {
    for (size_t b = a + 1; b < bound.size(); ++b) {
      const auto sa = s.species[static_cast<size_t>(bound[a])];
      const auto sb = s.species[static_cast<size_t>(bound[b])];
      if (sa != sb && std::abs(e[bound[a]] - e[bound[b]]) < 100.0 * tol.pair_eps) {
        return Regime::Boundary;
      }
    }
  }
  if (pair_members.size() % 2 != 0) return Regime::Unclassifiable;

  if (family == FieldFamily::BoxOnly) {
    if (s.states_of(StateKind::Resonance).size() > 0) return Regime::Unclassifiable;
    if (pairs == 0) {
      if (bound.empty()) return Regime::Free;
      for (auto i : bound) {
        if (s.species[static_cast<size_t>(i)] == Species::Antiparticle) return Regime::II;
      }
      return Regime::I;
    }
    if (pairs == 1) {
      return e[pair_members.front()].real() > s.edges.lower ? Regime::III : Regime::IV;
    }
    return Regime::Unclassifiable;
  }

  if (s.continuum_overlap) return Regime::V;
  if (pairs == 1) return Regime::II;
  if (pairs == 2) return Regime::IV;
  if (pairs > 2) return Regime::Unclassifiable;
  if (bound.empty()) return Regime::Free;
  // After anticoalescence the levels come back inverted: a particle-like
  // level sits below an antiparticle-like one.
  for (auto i : bound) {
    for (auto j : bound) {
      if (s.species[static_cast<size_t>(i)] == Species::Particle &&
          s.species[static_cast<size_t>(j)] == Species::Antiparticle &&
          e[i].real() < e[j].real()) {
        return Regime::III;
      }
    }
  }
  return Regime::I;
}

FVHamiltonian SpectrumProblem::hamiltonian(double V0) const {
  return assemble(grid, family.at(V0), constants, scheme);
}

LabeledSpectrum SpectrumProblem::solve(double V0) const {
  const FVHamiltonian h = hamiltonian(V0);
  return classify_states(eigensolve(h, tolerances), grid, h.fields, constants, tolerances);
}

std::vector<SweepPoint> sweep(const SpectrumProblem& problem, const std::vector<double>& V0s,
                              int threads) {
  for (size_t i = 1; i < V0s.size(); ++i) {
    const double d0 = V0s[1] - V0s[0];
    const double d = V0s[i] - V0s[i - 1];
    if (d == 0.0 || (d > 0.0) != (d0 > 0.0)) {
      throw ConfigError("sweep needs a strictly monotone V0 list");
    }
  }
  std::vector<SweepPoint> points(V0s.size());
  std::vector<SweepEntry> entries(V0s.size());
  for (size_t i = 0; i < V0s.size(); ++i) points[i].V0 = V0s[i];

  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (size_t i = next++; i < V0s.size(); i = next++) {
      try {
        entries[i] = sweep_entry(problem, V0s[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int nt = std::max(1, std::min<int>(threads, static_cast<int>(V0s.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  for (size_t i = 0; i < V0s.size(); ++i) points[i].regime = entries[i].regime;
  link_curves(points, entries);
  return points;
}

CriticalPoint find_critical(const SpectrumProblem& problem, double from, double to,
                            Transition which, double resolution) {
  if (!(resolution > 0.0)) throw ConfigError("find_critical: resolution must be positive");
  CriticalPoint out;
  auto solve = [&](double V0) {
    ++out.evaluations;
    return problem.solve(V0);
  };
  const LabeledSpectrum start = solve(from);
  const int pairs0 = start.bound_pair_count();

  auto predicate = [&](const LabeledSpectrum& s) {
    switch (which) {
      case Transition::Emergence: {
        if (s.bound_pair_count() > 0) return true;
        for (auto i : s.states_of(StateKind::Bound)) {
          if (s.species[static_cast<size_t>(i)] == Species::Antiparticle) return true;
        }
        return false;
      }
      case Transition::Coalescence: return s.bound_pair_count() > pairs0;
      case Transition::Anticoalescence: return s.bound_pair_count() < pairs0;
      case Transition::Overlap: return s.continuum_overlap;
    }
    return false;
  };

  if (predicate(start)) {
    throw ConfigError("find_critical: transition '" + std::string(to_string(which)) +
                      "' already present at the start of the bracket");
  }
  if (!predicate(solve(to))) {
    throw ConfigError("find_critical: bracket does not straddle the '" +
                      std::string(to_string(which)) + "' transition");
  }
  double a = from;
  double b = to;
  while (std::abs(b - a) >= resolution) {
    const double mid = 0.5 * (a + b);
    bool after = false;
    try {
      after = predicate(solve(mid));
    } catch (const NonDiagonalizableError&) {
      a = b = mid;
      break;
    }
    (after ? b : a) = mid;
  }
  out.lower = std::min(a, b);
  out.upper = std::max(a, b);
  out.V0 = 0.5 * (a + b);
  return out;
}

Eigen::VectorXcd biorthogonal_density(const LabeledSpectrum& s, Eigen::Index i,
                                      const Grid& grid) {
  if (i < 0 || i >= s.spectrum.size()) throw ConfigError("biorthogonal_density: bad index");
  const StateKind k = s.kind[static_cast<size_t>(i)];
  if (k != StateKind::Bound && k != StateKind::BoundPair) {
    throw ConfigError("biorthogonal_density: state " + std::to_string(i) +
                      " is not a bound state");
  }
  const auto psi = s.spectrum.right.col(i);
  const auto phi = s.spectrum.left.row(i);
  Eigen::VectorXcd rho(grid.size());
  for (int x = 0; x < grid.size(); ++x) {
    rho[x] = phi[2 * x] * psi[2 * x] + phi[2 * x + 1] * psi[2 * x + 1];
  }
  return rho / (rho.sum() * grid.spacing());
}

}  // namespace kgpair
