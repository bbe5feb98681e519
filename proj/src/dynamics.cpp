#include "kgpair/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/FFT>

#include "fourier.hpp"

namespace kgpair {

namespace {

std::atomic<bool> g_step_warned{false};

Eigen::Matrix2d free_block(double kinetic, const PhysicalConstants& k) {
  const double kappa = kinetic / (2.0 * k.mass);
  const double mc2 = k.rest_energy();
  Eigen::Matrix2d h;
  h << kappa + mc2, kappa, -kappa, -kappa - mc2;
  return h;
}

std::vector<double> transverse_kinetic_symbols(const Grid& grid, const PhysicalConstants& k,
                                               const TransverseMomenta& t,
                                               DerivativeScheme scheme) {
  const Eigen::VectorXd p = grid.momenta(k.hbar);
  std::vector<double> out(static_cast<size_t>(grid.size()));
  for (int i = 0; i < grid.size(); ++i) {
    out[static_cast<size_t>(i)] =
        kinetic_symbol(p[i], grid, k.hbar, scheme) + t.p_y * t.p_y + t.p_z * t.p_z;
  }
  return out;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
};

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double ssr = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      ssr += r * r;
    }
    f.stderr_slope = std::sqrt(ssr / (n - 2.0) / sxx);
  }
  return f;
}

}  // namespace

FreeModeBasis build_free_basis(const Grid& grid, const PhysicalConstants& k,
                               const TransverseMomenta& transverse, DerivativeScheme scheme) {
  k.validate();
  FreeModeBasis b{grid, k, transverse, scheme, {}, {}, {}, {}, {}};
  const int n = grid.size();
  const double mc2 = k.rest_energy();
  b.momenta = grid.momenta(k.hbar);
  const auto kin = transverse_kinetic_symbols(grid, k, transverse, scheme);
  b.energies.resize(n);
  b.spinors.resize(n, 2);
  b.positive.resize(2 * n, n);
  b.negative.resize(2 * n, n);
  const double norm = 1.0 / std::sqrt(grid.length());
  for (int m = 0; m < n; ++m) {
    const double e = std::sqrt(mc2 * mc2 + kin[static_cast<size_t>(m)] * k.c * k.c);
    const double s = 1.0 / std::sqrt(4.0 * mc2 * e);
    const double u = (mc2 + e) * s;
    const double l = (mc2 - e) * s;
    b.energies[m] = e;
    b.spinors(m, 0) = u;
    b.spinors(m, 1) = l;
    for (int i = 0; i < n; ++i) {
      const Complex wave = norm * std::polar(1.0, b.momenta[m] * grid.position(i) / k.hbar);
      b.positive(2 * i, m) = u * wave;
      b.positive(2 * i + 1, m) = l * wave;
      b.negative(2 * i, m) = l * wave;
      b.negative(2 * i + 1, m) = u * wave;
    }
  }
  return b;
}

Eigen::MatrixXcd creation_amplitudes(const FreeModeBasis& basis, const Eigen::MatrixXcd& evolved) {
  const int n = basis.grid.size();
  if (evolved.rows() != 2 * n) throw ConfigError("creation_amplitudes: state size mismatch");
  detail::PeriodicFFT fft(basis.grid);
  Eigen::MatrixXcd c(n, evolved.cols());
  Eigen::VectorXcd up(n), lo(n);
  for (Eigen::Index j = 0; j < evolved.cols(); ++j) {
    fft.forward(evolved.col(j).data(), 2, up.data(), 1);
    fft.forward(evolved.col(j).data() + 1, 2, lo.data(), 1);
    c.col(j) = basis.spinors.col(0).cwiseProduct(up) - basis.spinors.col(1).cwiseProduct(lo);
  }
  return c;
}

double particle_number(const FreeModeBasis& basis, const Eigen::MatrixXcd& evolved) {
  return creation_amplitudes(basis, evolved).squaredNorm();
}

Eigen::VectorXd density_from_amplitudes(const FreeModeBasis& basis,
                                        const Eigen::MatrixXcd& amplitudes) {
  const int n = basis.grid.size();
  if (amplitudes.rows() != n) throw ConfigError("density: amplitude size mismatch");
  detail::PeriodicFFT fft(basis.grid);
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(n);
  Eigen::VectorXcd tmp(n), up(n), lo(n);
  for (Eigen::Index j = 0; j < amplitudes.cols(); ++j) {
    tmp = basis.spinors.col(0).cwiseProduct(amplitudes.col(j));
    fft.inverse(tmp.data(), 1, up.data(), 1);
    tmp = basis.spinors.col(1).cwiseProduct(amplitudes.col(j));
    fft.inverse(tmp.data(), 1, lo.data(), 1);
    rho += up.cwiseAbs2() - lo.cwiseAbs2();
  }
  return rho;
}

Eigen::VectorXd particle_density(const FreeModeBasis& basis, const Eigen::MatrixXcd& evolved) {
  return density_from_amplitudes(basis, creation_amplitudes(basis, evolved));
}

Eigen::MatrixXcd propagate_static(const BiorthogonalSpectrum& s, const Eigen::MatrixXcd& states,
                                  double t, double hbar) {
  const Eigen::Index n = s.size();
  if (s.right.rows() != n || s.right.cols() != n || s.left.rows() != n || s.left.cols() != n) {
    throw ConfigError("propagate_static: incomplete spectrum");
  }
  if (states.rows() != n) throw ConfigError("propagate_static: state size mismatch");
  Eigen::VectorXcd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = std::exp(Complex(0.0, -t / hbar) * s.energies[i]);
  return s.right * (z.asDiagonal() * (s.left * states));
}

Eigen::MatrixXcd step_time_dependent(const HamiltonianProvider& h, const Eigen::MatrixXcd& states,
                                     double t, double dt, double hbar) {
  const Eigen::MatrixXcd hm = h(t + 0.5 * dt);
  if (hm.rows() != states.rows() || hm.cols() != hm.rows()) {
    throw ConfigError("step_time_dependent: Hamiltonian/state size mismatch");
  }
  const double stiffness = dt * hm.cwiseAbs().colwise().sum().maxCoeff() / hbar;
  if (stiffness > 0.5 && !g_step_warned.exchange(true)) {
    warn("Crank-Nicolson step with dt ||H|| / hbar = " + std::to_string(stiffness) +
         " > 0.5; high-energy modes are phase-inaccurate");
  }
  const Eigen::MatrixXcd a =
      Eigen::MatrixXcd::Identity(hm.rows(), hm.cols()) + Complex(0.0, 0.5 * dt / hbar) * hm;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
  const Eigen::MatrixXcd y = lu.solve(states);
  if (!y.allFinite()) throw NumericError("step_time_dependent: linear solve failed");
  return 2.0 * y - states;
}

CrankNicolson::CrankNicolson(const Eigen::MatrixXcd& h, double dt, double hbar)
    : lu_(Eigen::MatrixXcd::Identity(h.rows(), h.cols()) + Complex(0.0, 0.5 * dt / hbar) * h) {}

Eigen::MatrixXcd CrankNicolson::step(const Eigen::MatrixXcd& states) const {
  return 2.0 * lu_.solve(states) - states;
}

ScaledPotentialPropagator::ScaledPotentialPropagator(const Grid& grid, const PhysicalConstants& k,
                                                     const TransverseMomenta& transverse,
                                                     DerivativeScheme scheme,
                                                     const Eigen::VectorXd& shape, double dt)
    : grid_(grid), constants_(k), scheme_(scheme), transverse_(transverse), shape_(shape),
      dt_(dt), prepared_v_(0.0), fft_(std::make_unique<detail::PeriodicFFT>(grid)) {
  const int n = grid.size();
  if (shape.size() != n) throw ConfigError("propagator: shape does not match the grid");
  if (!(dt > 0.0)) throw ConfigError("propagator: dt must be positive");
  const double a = 0.5 * dt / k.hbar;
  const auto kin = transverse_kinetic_symbols(grid, k, transverse, scheme);
  inverse_blocks_.resize(static_cast<size_t>(n));
  for (int m = 0; m < n; ++m) {
    const Eigen::Matrix2cd blk = Eigen::Matrix2cd::Identity() +
                                 Complex(0.0, a) * free_block(kin[static_cast<size_t>(m)], k).cast<Complex>();
    inverse_blocks_[static_cast<size_t>(m)] = blk.inverse();
  }

  // Position-space kernel of M_free^{-1}: entry (i, c; j, d) = g_cd(i - j).
  std::vector<Eigen::Matrix2cd> kernel(static_cast<size_t>(n), Eigen::Matrix2cd::Zero());
  for (int d = 0; d < n; ++d) {
    Eigen::Matrix2cd acc = Eigen::Matrix2cd::Zero();
    for (int m = 0; m < n; ++m) {
      const double phase = 2.0 * M_PI * grid.mode_number(m) * static_cast<double>(d) / n;
      acc += std::polar(1.0, phase) * inverse_blocks_[static_cast<size_t>(m)];
    }
    kernel[static_cast<size_t>(d)] = acc / static_cast<double>(n);
  }

  const double cut = 1e-16 * shape.cwiseAbs().maxCoeff();
  std::vector<int> points;
  for (int i = 0; i < n; ++i) {
    if (std::abs(shape[i]) > cut) points.push_back(i);
  }
  const Eigen::Index r = 2 * static_cast<Eigen::Index>(points.size());
  support_.resize(static_cast<size_t>(r));
  support_shape_.resize(r);
  for (size_t s = 0; s < points.size(); ++s) {
    for (int c = 0; c < 2; ++c) {
      support_[2 * s + c] = fv_index(points[s], c);
      support_shape_[static_cast<Eigen::Index>(2 * s + c)] = shape[points[s]];
    }
  }
  q_.resize(2 * n, r);
  for (Eigen::Index s = 0; s < r; ++s) {
    const int j = static_cast<int>(support_[static_cast<size_t>(s)] / 2);
    const int d = static_cast<int>(support_[static_cast<size_t>(s)] % 2);
    for (int i = 0; i < n; ++i) {
      const auto& g = kernel[static_cast<size_t>((i - j + n) % n)];
      q_(2 * i, s) = g(0, d);
      q_(2 * i + 1, s) = g(1, d);
    }
  }
  g_ = q_(support_, Eigen::all);
}

ScaledPotentialPropagator::~ScaledPotentialPropagator() = default;

void ScaledPotentialPropagator::prepare(double v) {
  if (prepared_ && v == prepared_v_) return;
  const Eigen::Index r = static_cast<Eigen::Index>(support_.size());
  const Complex iav(0.0, 0.5 * dt_ / constants_.hbar * v);
  const Eigen::VectorXcd d = iav * support_shape_.cast<Complex>();
  const Eigen::MatrixXcd inner = Eigen::MatrixXcd::Identity(r, r) + d.asDiagonal() * g_;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(inner);
  w_ = lu.solve(Eigen::MatrixXcd(d.asDiagonal()));
  if (!w_.allFinite()) throw NumericError("propagator: singular Woodbury system");
  prepared_v_ = v;
  prepared_ = true;
}

void ScaledPotentialPropagator::step(Eigen::MatrixXcd& states, double v) {
  const int n = grid_.size();
  if (states.rows() != 2 * n) throw ConfigError("propagator: state size mismatch");
  Eigen::MatrixXcd z(2 * n, states.cols());
  Eigen::VectorXcd up(n), lo(n);
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    fft_->forward(states.col(j).data(), 2, up.data(), 1);
    fft_->forward(states.col(j).data() + 1, 2, lo.data(), 1);
    for (int m = 0; m < n; ++m) {
      const auto& b = inverse_blocks_[static_cast<size_t>(m)];
      const Complex u = b(0, 0) * up[m] + b(0, 1) * lo[m];
      const Complex l = b(1, 0) * up[m] + b(1, 1) * lo[m];
      up[m] = u;
      lo[m] = l;
    }
    fft_->inverse(up.data(), 1, z.col(j).data(), 2);
    fft_->inverse(lo.data(), 1, z.col(j).data() + 1, 2);
  }
  if (v != 0.0 && !support_.empty()) {
    prepare(v);
    const Eigen::MatrixXcd zs = z(support_, Eigen::all);
    z.noalias() -= q_ * (w_ * zs);
  }
  states = 2.0 * z - states;
}

Eigen::MatrixXcd ScaledPotentialPropagator::hamiltonian(double v) const {
  const int n = grid_.size();
  Eigen::MatrixXd kin = kinetic_operator(grid_, constants_.hbar, scheme_);
  kin.diagonal().array() += transverse_.p_y * transverse_.p_y + transverse_.p_z * transverse_.p_z;
  kin /= 2.0 * constants_.mass;
  const double mc2 = constants_.rest_energy();
  Eigen::MatrixXd h(2 * n, 2 * n);
  const auto upper = Eigen::seqN(0, n, 2);
  const auto lower = Eigen::seqN(1, n, 2);
  h(upper, upper) = kin;
  h(upper, lower) = kin;
  h(lower, upper) = -kin;
  h(lower, lower) = -kin;
  for (int i = 0; i < n; ++i) {
    h(2 * i, 2 * i) += v * shape_[i] + mc2;
    h(2 * i + 1, 2 * i + 1) += v * shape_[i] - mc2;
  }
  return h.cast<Complex>();
}

StaticEvolution::StaticEvolution(const BiorthogonalSpectrum& s, const FreeModeBasis& basis)
    : spectrum_(&s), basis_(&basis) {
  if (s.right.rows() != 2 * basis.grid.size() || s.left.rows() != s.right.cols()) {
    throw ConfigError("StaticEvolution: spectrum does not match the basis");
  }
  a_ = creation_amplitudes(basis, s.right);
  b_ = s.left * basis.negative;
  const Eigen::MatrixXcd g = a_.adjoint() * a_;
  const Eigen::MatrixXcd k = b_ * b_.adjoint();
  m_ = g.cwiseProduct(k.transpose());
}

Eigen::VectorXcd StaticEvolution::phases(double t, double& log_scale) const {
  const double hbar = basis_->constants.hbar;
  const Eigen::VectorXcd& e = spectrum_->energies;
  log_scale = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < e.size(); ++i) log_scale = std::max(log_scale, e[i].imag() * t / hbar);
  Eigen::VectorXcd z(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    z[i] = std::exp(Complex(e[i].imag() * t / hbar - log_scale, -e[i].real() * t / hbar));
  }
  return z;
}

double StaticEvolution::log_number(double t) const {
  double scale = 0.0;
  const Eigen::VectorXcd z = phases(t, scale);
  const double q = z.dot(m_ * z).real();
  if (!(q > 0.0)) return -std::numeric_limits<double>::infinity();
  return 2.0 * scale + std::log(q);
}

double StaticEvolution::number(double t) const { return std::exp(log_number(t)); }

Eigen::MatrixXcd StaticEvolution::negative_modes(double t) const {
  double scale = 0.0;
  Eigen::VectorXcd z = phases(t, scale);
  z *= std::exp(scale);
  return spectrum_->right * (z.asDiagonal() * b_);
}

Eigen::MatrixXcd StaticEvolution::amplitudes(double t) const {
  double scale = 0.0;
  Eigen::VectorXcd z = phases(t, scale);
  z *= std::exp(scale);
  return a_ * (z.asDiagonal() * b_);
}

Eigen::VectorXd StaticEvolution::density(double t) const {
  return density_from_amplitudes(*basis_, amplitudes(t));
}

double default_run_length(const BiorthogonalSpectrum& s, const PhysicalConstants& k) {
  const double cap = 2000.0 * k.time_unit();
  const double im = s.energies.imag().cwiseAbs().maxCoeff();
  double tol = 1e-8 * k.rest_energy();
  if (im <= tol) return cap;
  return std::min(12.0 / (2.0 * im / k.hbar), cap);
}

EvolutionRecord evolve_static(const BiorthogonalSpectrum& s, const FreeModeBasis& basis,
                              const EvolutionOptions& options) {
  if (!(options.t_max > 0.0) || options.samples < 1) {
    throw ConfigError("evolve_static: need t_max > 0 and at least one sample interval");
  }
  StaticEvolution ev(s, basis);
  EvolutionRecord r;
  for (int k = 0; k <= options.samples; ++k) {
    const double t = options.t_max * k / options.samples;
    const double ln = ev.log_number(t);
    r.times.push_back(t);
    r.log_number.push_back(ln);
    r.number.push_back(std::exp(ln));
  }
  for (double t : options.density_times) r.densities.push_back({t, ev.density(t)});
  return r;
}

FitWindow default_fit_window(const EvolutionRecord& r) {
  if (r.times.empty()) throw ConfigError("empty evolution record");
  const double t0 = r.times.front();
  const double t1 = r.times.back();
  FitWindow w{t0 + 0.5 * (t1 - t0), t1};
  const auto& ln = r.log_number;
  for (size_t k = 1; k + 1 < ln.size(); ++k) {
    if (ln[k] > ln[k - 1] && ln[k] >= ln[k + 1]) {
      const double threshold = ln[k] + std::log(10.0);
      for (size_t j = k + 1; j < ln.size(); ++j) {
        if (ln[j] > threshold) {
          w.begin = std::max(w.begin, r.times[j]);
          break;
        }
      }
      break;
    }
  }
  return w;
}

GrowthFit fit_growth_rate(const EvolutionRecord& r, std::optional<FitWindow> window) {
  const FitWindow w = window ? *window : default_fit_window(r);
  std::vector<double> x, y;
  for (size_t k = 0; k < r.times.size(); ++k) {
    if (r.times[k] < w.begin || r.times[k] > w.end) continue;
    if (!std::isfinite(r.log_number[k])) {
      throw NumericError("fit_growth_rate: N(t) must be positive on the fit window");
    }
    x.push_back(r.times[k]);
    y.push_back(r.log_number[k]);
  }
  if (x.size() < 10) {
    throw ConfigError("fit_growth_rate: window holds " + std::to_string(x.size()) +
                      " samples, need at least 10");
  }
  const LinearFit f = least_squares(x, y);
  return GrowthFit{f.slope, f.intercept, f.stderr_slope, w, static_cast<int>(x.size())};
}

std::vector<double> running_growth_rate(const EvolutionRecord& r, int window_samples) {
  const size_t n = r.times.size();
  const size_t w = static_cast<size_t>(std::max(3, window_samples));
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  for (size_t k = w - 1; k < n; ++k) {
    std::vector<double> x(r.times.begin() + static_cast<long>(k + 1 - w),
                          r.times.begin() + static_cast<long>(k + 1));
    std::vector<double> y(r.log_number.begin() + static_cast<long>(k + 1 - w),
                          r.log_number.begin() + static_cast<long>(k + 1));
    if (std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); })) {
      out[k] = least_squares(x, y).slope;
    }
  }
  return out;
}

std::optional<double> oscillation_frequency(const EvolutionRecord& r,
                                            std::optional<double> growth_rate,
                                            std::optional<FitWindow> window) {
  if (r.times.size() < 16) return std::nullopt;
  FitWindow w{r.times.front(), r.times.back()};
  if (window) {
    w = *window;
  } else if (growth_rate) {
    w.begin = 0.5 * (r.times.front() + r.times.back());
  }
  std::vector<double> t, y;
  for (size_t k = 0; k < r.times.size(); ++k) {
    if (r.times[k] < w.begin || r.times[k] > w.end) continue;
    const double ln = r.log_number[k] - (growth_rate ? *growth_rate * r.times[k] : 0.0);
    t.push_back(r.times[k]);
    y.push_back(std::isfinite(ln) ? std::exp(ln) : 0.0);
  }
  const size_t n = t.size();
  if (n < 16) return std::nullopt;
  const double dt = (t.back() - t.front()) / static_cast<double>(n - 1);
  for (size_t k = 1; k < n; ++k) {
    if (std::abs(t[k] - t[k - 1] - dt) > 1e-6 * dt) {
      throw ConfigError("oscillation_frequency: samples must be uniform in time");
    }
  }
  const LinearFit trend = least_squares(t, y);
  size_t m = 1;
  while (m < 16 * n) m <<= 1;
  std::vector<double> buf(m, 0.0);
  double energy = 0.0;
  for (size_t k = 0; k < n; ++k) {
    const double hann = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(k) / (n - 1));
    buf[k] = hann * (y[k] - trend.intercept - trend.slope * t[k]);
    energy += buf[k] * buf[k];
  }
  if (!(energy > 0.0)) return std::nullopt;
  Eigen::FFT<double> fft;
  std::vector<Complex> spec;
  fft.fwd(spec, buf);
  const double span = dt * static_cast<double>(n - 1);
  const size_t kmin = static_cast<size_t>(std::ceil(2.0 * static_cast<double>(m) * dt / span));
  const size_t kmax = m / 2;
  if (kmin + 2 >= kmax) return std::nullopt;
  std::vector<double> mag(kmax + 1);
  for (size_t k = 0; k <= kmax; ++k) mag[k] = std::abs(spec[k]);
  size_t peak = kmin;
  for (size_t k = kmin; k < kmax; ++k) {
    if (mag[k] > mag[peak]) peak = k;
  }
  std::vector<double> rest(mag.begin() + static_cast<long>(kmin), mag.begin() + static_cast<long>(kmax));
  std::nth_element(rest.begin(), rest.begin() + static_cast<long>(rest.size() / 2), rest.end());
  const double median = rest[rest.size() / 2];
  if (!(mag[peak] > 10.0 * median) || peak == kmin) return std::nullopt;
  const double a = std::log(mag[peak - 1]);
  const double b = std::log(mag[peak]);
  const double c = std::log(mag[peak + 1]);
  const double denom = a - 2.0 * b + c;
  const double delta = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
  return 2.0 * M_PI * (static_cast<double>(peak) + delta) / (static_cast<double>(m) * dt);
}

}  // namespace kgpair
