#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "picn/field.hpp"
#include "picn/problem.hpp"
#include "picn/rng.hpp"
#include "picn/stencil.hpp"
#include "picn/training.hpp"

namespace picn {

struct ErrorMetrics {
  double rel_l2 = 0.0;
  double rmse = 0.0;
  double max_abs = 0.0;
  int n = 0;
  bool absolute_fallback = false;  // reference norm was zero; rel_l2 holds the absolute L2
};

inline ErrorMetrics error_metrics(std::span<const double> pred, std::span<const double> ref) {
  if (pred.size() != ref.size())
    throw std::invalid_argument("error_metrics: size mismatch");
  ErrorMetrics m;
  m.n = static_cast<int>(pred.size());
  if (m.n == 0) return m;
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - ref[i];
    num += d * d;
    den += ref[i] * ref[i];
    m.max_abs = std::max(m.max_abs, std::abs(d));
  }
  m.rmse = std::sqrt(num / m.n);
  if (den > 0.0) {
    m.rel_l2 = std::sqrt(num / den);
  } else {
    m.rel_l2 = std::sqrt(num);
    m.absolute_fallback = true;
  }
  return m;
}

inline ErrorMetrics error_metrics(const FieldTensor& pred, const FieldTensor& ref) {
  if (!pred.same_shape(ref)) throw std::invalid_argument("error_metrics: shape mismatch");
  return error_metrics(std::span<const double>(pred.data(), pred.size()),
                       std::span<const double>(ref.data(), ref.size()));
}

// ---------------------------------------------------------------------------
// Power spectra
// ---------------------------------------------------------------------------

struct SpectrumBin {
  double freq_x = 0.0;  // cycles per unit length
  double freq_y = 0.0;
  double power = 0.0;
};

/// Discrete power spectrum normalized so the bin powers sum to the mean
/// squared field value. 1D spectra carry signed frequencies; 2D spectra are
/// folded onto the non-negative frequency quadrant.
struct PowerSpectrum {
  bool two_d = false;
  std::vector<SpectrumBin> bins;
  double total_power = 0.0;
};

namespace detail {

inline std::vector<std::complex<double>> dft_axis(const std::vector<std::complex<double>>& in,
                                                  int count, int length, int stride,
                                                  int block) {
  // Transforms `count` signals of `length` samples laid out with `stride`
  // between samples and `block` between signals.
  std::vector<std::complex<double>> twiddle(length);
  for (int j = 0; j < length; ++j) {
    const double ang = -2.0 * M_PI * j / length;
    twiddle[j] = std::complex<double>(std::cos(ang), std::sin(ang));
  }
  std::vector<std::complex<double>> out(in.size());
  for (int s = 0; s < count; ++s) {
    const std::complex<double>* src = in.data() + s * block;
    std::complex<double>* dst = out.data() + s * block;
    for (int k = 0; k < length; ++k) {
      std::complex<double> acc(0.0, 0.0);
      for (int j = 0; j < length; ++j) acc += src[j * stride] * twiddle[(j * k) % length];
      dst[k * stride] = acc;
    }
  }
  return out;
}

}  // namespace detail

inline PowerSpectrum power_spectrum(const FieldTensor& f, double dx, double dy = 1.0) {
  const int rows = f.rows(), cols = f.cols();
  if (rows < 1 || cols < 1) throw std::invalid_argument("power_spectrum: empty field");
  std::vector<std::complex<double>> data(f.size());
  for (int i = 0; i < f.size(); ++i) data[i] = std::complex<double>(f.data()[i], 0.0);

  PowerSpectrum s;
  if (rows == 1) {
    const auto X = detail::dft_axis(data, 1, cols, 1, 0);
    const double norm = static_cast<double>(cols) * cols;
    const double span = cols * dx;
    for (int idx = 0; idx < cols; ++idx) {
      const int ks = idx - cols / 2;
      const int k = (ks % cols + cols) % cols;
      const double p = std::norm(X[k]) / norm;
      s.bins.push_back(SpectrumBin{ks / span, 0.0, p});
      s.total_power += p;
    }
    return s;
  }

  s.two_d = true;
  auto X = detail::dft_axis(data, rows, cols, 1, cols);    // along x
  X = detail::dft_axis(X, cols, rows, cols, 1);            // along y
  const double norm = static_cast<double>(rows) * rows * static_cast<double>(cols) * cols;
  const double span_x = cols * dx, span_y = rows * dy;
  FieldTensor folded(rows / 2 + 1, cols / 2 + 1);
  for (int kr = 0; kr < rows; ++kr) {
    const int ksr = kr <= rows / 2 ? kr : kr - rows;
    for (int kc = 0; kc < cols; ++kc) {
      const int ksc = kc <= cols / 2 ? kc : kc - cols;
      const double p = std::norm(X[kr * cols + kc]) / norm;
      folded(std::abs(ksr), std::abs(ksc)) += p;
      s.total_power += p;
    }
  }
  for (int a = 0; a <= rows / 2; ++a)
    for (int b = 0; b <= cols / 2; ++b)
      s.bins.push_back(SpectrumBin{b / span_x, a / span_y, folded(a, b)});
  return s;
}

/// Spectrum of the pointwise error field pred - ref.
inline PowerSpectrum error_spectrum(const FieldTensor& pred, const FieldTensor& ref, double dx,
                                    double dy = 1.0) {
  if (!pred.same_shape(ref)) throw std::invalid_argument("error_spectrum: shape mismatch");
  FieldTensor diff(pred.rows(), pred.cols());
  for (int i = 0; i < pred.size(); ++i) diff.data()[i] = pred.data()[i] - ref.data()[i];
  return power_spectrum(diff, dx, dy);
}

/// Sum of bin powers whose radial frequency lies in [f_lo, f_hi].
inline double band_power(const PowerSpectrum& s, double f_lo, double f_hi) {
  double sum = 0.0;
  for (const auto& b : s.bins) {
    const double f = std::hypot(b.freq_x, b.freq_y);
    if (f >= f_lo && f <= f_hi) sum += b.power;
  }
  return sum;
}

/// Smallest radial frequency below which the given fraction of the total
/// power is captured.
inline double bandwidth(const PowerSpectrum& s, double fraction) {
  struct Entry {
    double f, p;
  };
  std::vector<Entry> entries;
  entries.reserve(s.bins.size());
  for (const auto& b : s.bins) entries.push_back({std::hypot(b.freq_x, b.freq_y), b.power});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.f < b.f; });
  const double target = fraction * s.total_power;
  double acc = 0.0;
  for (const auto& e : entries) {
    acc += e.p;
    if (acc >= target) return e.f;
  }
  return entries.empty() ? 0.0 : entries.back().f;
}

// ---------------------------------------------------------------------------
// Noise and synthetic observations
// ---------------------------------------------------------------------------

/// Adds iid N(0, sigma^2) noise in place; sigma == 0 leaves values untouched.
inline void add_gaussian_noise(std::span<double> values, double sigma, std::uint64_t seed) {
  if (sigma == 0.0) return;
  Rng rng(seed);
  for (double& v : values) v += sigma * rng.gaussian();
}

struct ObservationSet {
  std::vector<Observation> points;  // noisy values used for fitting
  std::vector<double> clean;        // noise-free values at the same points
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Samples the problem's reference field on its observation grid and applies
/// Gaussian noise. Points are emitted row-major (y outer, x inner).
inline ObservationSet make_observations(const ProblemDef& problem, double sigma,
                                        std::uint64_t seed) {
  const FieldFn& ref = problem.error_reference();
  if (!ref) throw std::invalid_argument("make_observations: problem has no reference field");
  problem.obs_grid.validate();
  ObservationSet set;
  set.sigma = sigma;
  set.seed = seed;
  for (int i = 0; i < problem.obs_grid.ny; ++i)
    for (int j = 0; j < problem.obs_grid.nx; ++j) {
      const double x = problem.obs_grid.x(j), y = problem.obs_grid.y(i);
      set.points.push_back(Observation{x, y, ref(x, y, 0)});
      set.clean.push_back(set.points.back().value);
    }
  std::vector<double> noisy(set.clean);
  add_gaussian_noise(noisy, sigma, seed);
  for (size_t k = 0; k < noisy.size(); ++k) set.points[k].value = noisy[k];
  return set;
}

// ---------------------------------------------------------------------------
// Inverse coefficient estimation and physics-regularized denoising
// ---------------------------------------------------------------------------

struct EstimateResult {
  TrainResult train;
  ObservationSet obs;
  std::vector<double> lambda;  // final operator coefficients
};

/// Fits the model and unfrozen operator coefficients against noisy
/// observations of the reference field.
inline EstimateResult estimate_parameters(ProblemDef problem, double sigma,
                                          std::uint64_t noise_seed, const TrainingConfig& cfg,
                                          const TrainCallbacks& callbacks = {}) {
  EstimateResult r;
  r.obs = make_observations(problem, sigma, noise_seed);
  problem.observations = r.obs.points;
  r.train = train(problem, cfg, callbacks);
  r.lambda = r.train.lambda.values;
  return r;
}

struct DenoiseResult {
  TrainResult train;
  ObservationSet obs;
  double rmse_noisy = 0.0;           // noisy observations vs clean values
  double rmse_recon = 0.0;           // reconstruction vs clean reference, grid nodes
  double lap_energy_noisy = 0.0;     // mean squared Laplacian of the noisy field
  double lap_energy_recon = 0.0;     // mean squared Laplacian of the reconstruction
};

namespace detail {

inline double mean_squared_laplacian(const FieldTensor& f, double dx, double dy) {
  if (f.rows() < 3 || f.cols() < 3) return 0.0;
  const StencilKernel k = laplace_kernel(dx, dy);
  const FieldTensor lap = apply_stencil(f, k);
  double sum = 0.0;
  for (int i = 0; i < lap.size(); ++i) sum += lap.data()[i] * lap.data()[i];
  return sum / lap.size();
}

}  // namespace detail

/// Recovers a smooth field from noisy observations by balancing the data fit
/// against the governing-operator residual.
inline DenoiseResult denoise(ProblemDef problem, double sigma, std::uint64_t noise_seed,
                             const TrainingConfig& cfg, const TrainCallbacks& callbacks = {}) {
  DenoiseResult r;
  r.obs = make_observations(problem, sigma, noise_seed);
  problem.observations = r.obs.points;
  r.train = train(problem, cfg, callbacks);

  {
    std::vector<double> noisy;
    for (const auto& p : r.obs.points) noisy.push_back(p.value);
    r.rmse_noisy = error_metrics(noisy, r.obs.clean).rmse;
  }
  {
    const FieldFn& ref = problem.error_reference();
    const FieldTensor& recon = r.train.u_hat[0];
    std::vector<double> pred, clean;
    for (int i = 0; i < problem.grid.ny; ++i)
      for (int j = 0; j < problem.grid.nx; ++j) {
        pred.push_back(recon(i, j));
        clean.push_back(ref(problem.grid.x(j), problem.grid.y(i), 0));
      }
    r.rmse_recon = error_metrics(pred, clean).rmse;
  }
  {
    FieldTensor noisy_field(problem.obs_grid.ny, problem.obs_grid.nx);
    for (int i = 0; i < noisy_field.size(); ++i)
      noisy_field.data()[i] = r.obs.points[i].value;
    r.lap_energy_noisy =
        detail::mean_squared_laplacian(noisy_field, problem.obs_grid.dx(), problem.obs_grid.dy());
    r.lap_energy_recon =
        detail::mean_squared_laplacian(r.train.u_hat[0], problem.grid.dx(), problem.grid.dy());
  }
  return r;
}

}  // namespace picn
