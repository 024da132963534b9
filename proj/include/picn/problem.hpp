#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "picn/field.hpp"
#include "picn/geometry.hpp"
#include "picn/model.hpp"
#include "picn/training_config.hpp"

namespace picn {

inline constexpr int kMaxChannels = 2;
inline constexpr int kMaxEquations = 2;
inline constexpr int kMaxLambda = 2;

/// Field quantities a residual may read at a collocation point.
enum Quantity : int { kU = 0, kUx, kUy, kUxx, kUyy, kUxy, kQuantityCount };

constexpr unsigned quantity_bit(int q) { return 1u << q; }

inline const char* quantity_name(int q) {
  static const char* names[kQuantityCount] = {"u", "u_x", "u_y", "u_xx", "u_yy", "u_xy"};
  if (q < 0 || q >= kQuantityCount) throw std::invalid_argument("quantity_name: bad index");
  return names[q];
}

struct ChannelQuantities {
  double u = 0.0, ux = 0.0, uy = 0.0, uxx = 0.0, uyy = 0.0, uxy = 0.0;

  double& by(int q) {
    switch (q) {
      case kU: return u;
      case kUx: return ux;
      case kUy: return uy;
      case kUxx: return uxx;
      case kUyy: return uyy;
      case kUxy: return uxy;
    }
    throw std::invalid_argument("ChannelQuantities::by: bad quantity");
  }
  double by(int q) const { return const_cast<ChannelQuantities*>(this)->by(q); }
};

/// Inputs to the residual callback at one collocation point.
struct ResidualPoint {
  double x = 0.0, y = 0.0;
  std::array<ChannelQuantities, kMaxChannels> ch{};
};

/// One equation's value and analytic partials w.r.t. every field quantity of
/// every channel and every operator coefficient.
struct EquationEval {
  double value = 0.0;
  std::array<ChannelQuantities, kMaxChannels> d_ch{};
  std::array<double, kMaxLambda> d_lambda{};
};

using ResidualFn =
    std::function<void(const ResidualPoint&, const double* lambda, EquationEval* out)>;

/// Pointwise PDE residual: evaluates all equations and their partials at one
/// point. `used` is the mask of quantities the callback reads.
struct ResidualSpec {
  int channels = 1;
  int equations = 1;
  int n_lambda = 0;
  unsigned used = quantity_bit(kU);
  ResidualFn eval;
};

struct Observation {
  double x = 0.0, y = 0.0;
  double value = 0.0;
};

enum class EvalDomain { GridNodes, InteriorNodes, Uniform1D };

struct EvalSpec {
  EvalDomain domain = EvalDomain::GridNodes;
  int count = 1000;  // Uniform1D only
};

using FieldFn = std::function<double(double x, double y, int channel)>;

/// A ready-to-train problem: domain + grid + residual + boundary samples +
/// paper-default hyperparameters. `exact`, when set, zeroes the residual;
/// `reference` is the field errors are reported against (defaults to exact,
/// but may exist without being a residual zero, e.g. a clean field under a
/// mis-specified operator).
struct ProblemDef {
  std::string name;
  std::string description;
  DomainShape domain = DomainShape::rectangle(0.0, 1.0, 0.0, 1.0);
  GridSpec grid;
  int kernel_p = 3, kernel_q = 3;
  Activation activation = Activation::Tanh;
  ResidualSpec residual;
  std::vector<BoundarySample> boundary;
  FieldFn exact;      // optional
  FieldFn reference;  // optional; defaults to exact
  std::vector<double> lambda0;
  std::vector<char> lambda_frozen;
  std::vector<Observation> observations;
  GridSpec obs_grid;  // lattice the default observations sample
  TrainingConfig training;
  EvalSpec eval;

  int channels() const { return residual.channels; }
  const FieldFn& error_reference() const { return reference ? reference : exact; }
  int hidden_rows() const { return grid.ny + kernel_p - 1; }
  int hidden_cols() const { return grid.nx + kernel_q - 1; }
};

/// Evaluate the residual equations at caller-supplied points. `provided` must
/// cover every quantity the residual reads.
struct PointBundle {
  double x = 0.0, y = 0.0;
  std::array<ChannelQuantities, kMaxChannels> ch{};
  unsigned provided = 0;
};

inline std::vector<std::array<double, kMaxEquations>> evaluate_residual(
    const ProblemDef& problem, std::span<const PointBundle> points,
    std::span<const double> lambda) {
  const ResidualSpec& spec = problem.residual;
  if (!spec.eval) throw std::invalid_argument("evaluate_residual: missing residual callback");
  if (static_cast<int>(lambda.size()) < spec.n_lambda)
    throw std::invalid_argument("evaluate_residual: too few operator coefficients");
  std::vector<std::array<double, kMaxEquations>> out;
  out.reserve(points.size());
  EquationEval eq[kMaxEquations];
  for (const PointBundle& b : points) {
    if ((b.provided & spec.used) != spec.used) {
      for (int q = 0; q < kQuantityCount; ++q)
        if ((spec.used & quantity_bit(q)) && !(b.provided & quantity_bit(q)))
          throw std::invalid_argument(std::string("evaluate_residual: residual reads ") +
                                      quantity_name(q) + " but the bundle does not provide it");
    }
    ResidualPoint rp;
    rp.x = b.x;
    rp.y = b.y;
    rp.ch = b.ch;
    for (int e = 0; e < spec.equations; ++e) eq[e] = EquationEval{};
    spec.eval(rp, lambda.data(), eq);
    std::array<double, kMaxEquations> vals{};
    for (int e = 0; e < spec.equations; ++e) vals[e] = eq[e].value;
    out.push_back(vals);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Builtin problems
// ---------------------------------------------------------------------------

using ProblemParams = std::map<std::string, double>;

/// Clean coefficient-estimation field: solves u_xx + ratio * u_yy = 0.
inline double aniso_reference_field(double x, double y, double ratio) {
  return std::sin(x) * std::sinh(y / std::sqrt(ratio));
}

/// Clean field for the mis-specified denoising study.
inline double explicit_reference_field(double x, double y) {
  return std::sin(x + 5.0 * y) + std::exp(-x);
}

namespace detail {

inline double get_param(const ProblemParams& params, const std::string& key, double fallback,
                        const std::vector<std::string>& known, const std::string& problem) {
  for (const auto& [k, v] : params) {
    bool ok = false;
    for (const auto& name : known) ok = ok || k == name;
    if (!ok)
      throw std::invalid_argument("get_problem: problem '" + problem +
                                  "' does not accept parameter '" + k + "'");
  }
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

inline BcAssign dirichlet_from(const FieldFn& f, int channels) {
  return [f, channels](double x, double y, double, double) {
    std::vector<BoundaryConditionSpec> out;
    for (int c = 0; c < channels; ++c)
      out.push_back(BoundaryConditionSpec{BcKind::Dirichlet, c, f(x, y, c)});
    return out;
  };
}

/// Expand a bounding box outward to the spacing lattice and build the grid.
inline GridSpec grid_from_spacing(const BoundingBox& box, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("grid_from_spacing: spacing must be > 0");
  GridSpec g;
  g.x_min = std::floor(box.x_min / h) * h;
  g.x_max = std::ceil(box.x_max / h) * h;
  g.y_min = std::floor(box.y_min / h) * h;
  g.y_max = std::ceil(box.y_max / h) * h;
  g.nx = static_cast<int>(std::lround((g.x_max - g.x_min) / h)) + 1;
  g.ny = static_cast<int>(std::lround((g.y_max - g.y_min) / h)) + 1;
  g.validate();
  return g;
}

inline void attach_clean_observations(ProblemDef& p) {
  p.observations.clear();
  const FieldFn& ref = p.error_reference();
  for (int i = 0; i < p.obs_grid.ny; ++i)
    for (int j = 0; j < p.obs_grid.nx; ++j)
      p.observations.push_back(Observation{p.obs_grid.x(j), p.obs_grid.y(i),
                                           ref(p.obs_grid.x(j), p.obs_grid.y(i), 0)});
}

// --- forward sweep, 1D: sin(u^2) + u' = f on [0, 3*pi], u(0) = 0 ------------

inline ProblemDef make_sweep1d() {
  ProblemDef p;
  p.name = "sweep1d";
  p.description = "1D frequency sweep: sin(u^2) + u' = f, exact u = sin(t^2)";
  const double t_max = 3.0 * std::numbers::pi;
  p.domain = DomainShape::rectangle(0.0, t_max, 0.0, 0.0);
  p.grid = GridSpec{0.0, t_max, 0.0, 0.0, 998, 1};
  p.kernel_p = 1;
  p.kernel_q = 3;
  p.exact = [](double x, double, int) { return std::sin(x * x); };
  p.residual.channels = 1;
  p.residual.equations = 1;
  p.residual.used = quantity_bit(kU) | quantity_bit(kUx);
  p.residual.eval = [](const ResidualPoint& pt, const double*, EquationEval* out) {
    const double u = pt.ch[0].u;
    const double f = std::sin(std::pow(std::sin(pt.x * pt.x), 2)) +
                     2.0 * pt.x * std::cos(pt.x * pt.x);
    out[0].value = std::sin(u * u) + pt.ch[0].ux - f;
    out[0].d_ch[0].u = 2.0 * u * std::cos(u * u);
    out[0].d_ch[0].ux = 1.0;
  };
  p.boundary = {BoundarySample{0.0, 0.0, -1.0, 0.0, BcKind::Dirichlet, 0, 0.0}};
  p.training.learning_rate = 1e-3;
  p.training.epochs = 20000;
  set_weight_ratio(p.training, 9.0, 1.0);
  p.training.log_every = 100;
  p.eval = EvalSpec{EvalDomain::Uniform1D, 1000};
  return p;
}

// --- forward sweep, 2D: sin(u^2) + lap(u) = f, exact u = sin(x^2 + y^2) -----

inline void sweep2d_residual(const ResidualPoint& pt, EquationEval* out) {
  const double u = pt.ch[0].u;
  const double s = pt.x * pt.x + pt.y * pt.y;
  const double f = std::sin(std::pow(std::sin(s), 2)) + 4.0 * std::cos(s) - 4.0 * s * std::sin(s);
  out[0].value = std::sin(u * u) + pt.ch[0].uxx + pt.ch[0].uyy - f;
  out[0].d_ch[0].u = 2.0 * u * std::cos(u * u);
  out[0].d_ch[0].uxx = 1.0;
  out[0].d_ch[0].uyy = 1.0;
}

inline ProblemDef make_sweep2d() {
  ProblemDef p;
  p.name = "sweep2d";
  p.description = "2D frequency sweep: sin(u^2) + lap(u) = f, exact u = sin(x^2+y^2)";
  p.domain = DomainShape::rectangle(0.0, 10.0, 0.0, 6.0);
  p.grid = GridSpec{0.0, 10.0, 0.0, 6.0, 198, 118};
  p.exact = [](double x, double y, int) { return std::sin(x * x + y * y); };
  p.residual.channels = 1;
  p.residual.used = quantity_bit(kU) | quantity_bit(kUxx) | quantity_bit(kUyy);
  p.residual.eval = [](const ResidualPoint& pt, const double*, EquationEval* out) {
    sweep2d_residual(pt, out);
  };
  p.boundary = boundary_samples(p.domain, 636, dirichlet_from(p.exact, 1));
  p.training.learning_rate = 1e-2;
  p.training.epochs = 5000;
  // Boundary-dominant weights: with the residual term dominant (999:1 the
  // other way) this problem plateaus around 34% relative error because the
  // many interior solutions of the bare equation drown out the boundary pull;
  // at 1:999 it reaches ~9% within the same budget.
  set_weight_ratio(p.training, 1.0, 999.0);
  p.training.log_every = 50;
  p.eval = EvalSpec{EvalDomain::GridNodes, 0};
  return p;
}

// --- oscillatory nonlinear ODE: u' + sin(u') + u = q, u = e^-x sin(m*pi*x^2) -

inline ProblemDef make_sine_ode(int m) {
  if (m < 1) throw std::invalid_argument("sine_ode: m must be >= 1");
  ProblemDef p;
  p.name = "sine_ode";
  p.description = "nonlinear ODE u' + sin(u') + u = q, exact u = e^-x sin(m*pi*x^2)";
  p.domain = DomainShape::rectangle(0.0, 3.0, 0.0, 0.0);
  p.grid = GridSpec{0.0, 3.0, 0.0, 0.0, 198, 1};
  p.kernel_p = 1;
  p.kernel_q = 3;
  const double mp = m * std::numbers::pi;
  p.exact = [mp](double x, double, int) { return std::exp(-x) * std::sin(mp * x * x); };
  p.residual.channels = 1;
  p.residual.used = quantity_bit(kU) | quantity_bit(kUx);
  p.residual.eval = [mp](const ResidualPoint& pt, const double*, EquationEval* out) {
    const double x = pt.x;
    const double uex = std::exp(-x) * std::sin(mp * x * x);
    const double dex = std::exp(-x) * (2.0 * mp * x * std::cos(mp * x * x) - std::sin(mp * x * x));
    const double q = dex + std::sin(dex) + uex;
    out[0].value = pt.ch[0].ux + std::sin(pt.ch[0].ux) + pt.ch[0].u - q;
    out[0].d_ch[0].ux = 1.0 + std::cos(pt.ch[0].ux);
    out[0].d_ch[0].u = 1.0;
  };
  p.boundary = {BoundarySample{0.0, 0.0, -1.0, 0.0, BcKind::Dirichlet, 0, 0.0}};
  p.training.learning_rate = 1e-2;
  p.training.epochs = 30000;
  set_weight_ratio(p.training, 9.0, 1.0);
  p.training.log_every = 200;
  p.eval = EvalSpec{EvalDomain::Uniform1D, 1000};
  return p;
}

// --- mixed Dirichlet/Neumann BVP, same operator as sweep2d ------------------

inline ProblemDef make_mixed_bvp() {
  ProblemDef p;
  p.name = "mixed_bvp";
  p.description = "sin(u^2) + lap(u) = f with a Neumann edge at x = 0";
  p.domain = DomainShape::rectangle(0.0, 5.0, 0.0, 3.0);
  p.grid = GridSpec{0.0, 5.0, 0.0, 3.0, 98, 58};
  p.exact = [](double x, double y, int) { return std::sin(x * x + y * y); };
  p.residual.channels = 1;
  p.residual.used = quantity_bit(kU) | quantity_bit(kUxx) | quantity_bit(kUyy);
  p.residual.eval = [](const ResidualPoint& pt, const double*, EquationEval* out) {
    sweep2d_residual(pt, out);
  };
  // The x = 0 edge carries du/dn = -2x cos(x^2+y^2) (the outward normal
  // derivative of the exact solution); every other edge is Dirichlet.
  p.boundary = boundary_samples(
      p.domain, 320, [](double x, double y, double nx, double) {
        std::vector<BoundaryConditionSpec> out;
        if (nx < -0.5)
          out.push_back(BoundaryConditionSpec{BcKind::Neumann, 0,
                                              -2.0 * x * std::cos(x * x + y * y)});
        else
          out.push_back(
              BoundaryConditionSpec{BcKind::Dirichlet, 0, std::sin(x * x + y * y)});
        return out;
      });
  p.training.learning_rate = 1e-3;
  p.training.epochs = 30000;
  // Boundary-dominant weights: residual-dominant settings (99:1) leave the
  // Dirichlet edges underfit and stall near 22% relative error even after
  // 300k epochs; at 1:9 the run converges to ~1.5% by 20k epochs and the
  // Neumann loss collapses by six orders of magnitude.
  set_weight_ratio(p.training, 1.0, 9.0);
  p.training.log_every = 200;
  p.eval = EvalSpec{EvalDomain::GridNodes, 0};
  return p;
}

// --- cubic Schrodinger system, two real channels u, v ------------------------
// u_t + v_xx + v - (u^2+v^2) v = 0
// v_t - u_xx - u + (u^2+v^2) u = 0, exact u = cos(x-t), v = sin(x-t).
// The time axis is the grid's y axis.

inline ProblemDef make_schrodinger() {
  ProblemDef p;
  p.name = "schrodinger";
  p.description = "cubic Schrodinger system, exact (u, v) = (cos(x-t), sin(x-t))";
  const double pi = std::numbers::pi;
  p.domain = DomainShape::rectangle(0.0, pi, 0.0, pi);
  p.grid = GridSpec{0.0, pi, 0.0, pi, 8, 8};
  p.exact = [](double x, double t, int c) {
    return c == 0 ? std::cos(x - t) : std::sin(x - t);
  };
  p.residual.channels = 2;
  p.residual.equations = 2;
  p.residual.used =
      quantity_bit(kU) | quantity_bit(kUy) | quantity_bit(kUxx);
  p.residual.eval = [](const ResidualPoint& pt, const double*, EquationEval* out) {
    const double u = pt.ch[0].u, v = pt.ch[1].u;
    const double mag = u * u + v * v;
    out[0].value = pt.ch[0].uy + pt.ch[1].uxx + v - mag * v;
    out[0].d_ch[0].uy = 1.0;
    out[0].d_ch[1].uxx = 1.0;
    out[0].d_ch[1].u = 1.0 - u * u - 3.0 * v * v;
    out[0].d_ch[0].u = -2.0 * u * v;
    out[1].value = pt.ch[1].uy - pt.ch[0].uxx - u + mag * u;
    out[1].d_ch[1].uy = 1.0;
    out[1].d_ch[0].uxx = -1.0;
    out[1].d_ch[0].u = -1.0 + 3.0 * u * u + v * v;
    out[1].d_ch[1].u = 2.0 * u * v;
  };
  p.boundary = boundary_samples(p.domain, 40, dirichlet_from(p.exact, 2));
  p.training.learning_rate = 1e-3;
  p.training.epochs = 30000;
  set_weight_ratio(p.training, 1.0, 9.0);
  p.training.log_every = 200;
  p.eval = EvalSpec{EvalDomain::GridNodes, 0};
  return p;
}

// --- transport equation on an 8-spike star domain ----------------------------
// u_x + u u_y = f, exact u = cos(x + k x y + k y^2), rho(th) = 1 + cos^2(4 th).

inline ProblemDef make_star(double k) {
  ProblemDef p;
  p.name = "star";
  p.description = "u_x + u u_y = f on the star domain, exact u = cos(x + k x y + k y^2)";
  p.domain = DomainShape::polar([](double th) {
    const double c = std::cos(4.0 * th);
    return 1.0 + c * c;
  });
  p.grid = detail::grid_from_spacing(bounding_box(p.domain), 0.02);
  p.exact = [k](double x, double y, int) { return std::cos(x + k * x * y + k * y * y); };
  p.residual.channels = 1;
  p.residual.used = quantity_bit(kU) | quantity_bit(kUx) | quantity_bit(kUy);
  p.residual.eval = [k](const ResidualPoint& pt, const double*, EquationEval* out) {
    const double phi = pt.x + k * pt.x * pt.y + k * pt.y * pt.y;
    const double f = -std::sin(phi) * (k * pt.y + 1.0) -
                     std::sin(phi) * std::cos(phi) * (k * pt.x + 2.0 * k * pt.y);
    out[0].value = pt.ch[0].ux + pt.ch[0].u * pt.ch[0].uy - f;
    out[0].d_ch[0].ux = 1.0;
    out[0].d_ch[0].u = pt.ch[0].uy;
    out[0].d_ch[0].uy = pt.ch[0].u;
  };
  p.boundary = boundary_samples(p.domain, 800, dirichlet_from(p.exact, 1));
  p.training.learning_rate = 1e-3;
  p.training.epochs = 30000;
  // At 1:9 this transport problem locks into a wrong interior solution (51%
  // relative error, flat from epoch 12k at any learning rate); weighting the
  // boundary data harder (1:99) takes it to ~1% within 30k epochs.
  set_weight_ratio(p.training, 1.0, 99.0);
  p.training.log_every = 200;
  p.eval = EvalSpec{EvalDomain::InteriorNodes, 0};
  return p;
}

// --- sin(u^2) + lap(u) = f on the bird domain --------------------------------
// rho(th) = e^sin(th) sin^2(3 th) + e^cos(th) cos^2(3 th), exact u = cos(kx + ky).

inline ProblemDef make_bird(double k) {
  ProblemDef p;
  p.name = "bird";
  p.description = "sin(u^2) + lap(u) = f on the bird domain, exact u = cos(k x + k y)";
  p.domain = DomainShape::polar([](double th) {
    const double s3 = std::sin(3.0 * th), c3 = std::cos(3.0 * th);
    return std::exp(std::sin(th)) * s3 * s3 + std::exp(std::cos(th)) * c3 * c3;
  });
  p.grid = detail::grid_from_spacing(bounding_box(p.domain), 0.02);
  p.exact = [k](double x, double y, int) { return std::cos(k * x + k * y); };
  p.residual.channels = 1;
  p.residual.used = quantity_bit(kU) | quantity_bit(kUxx) | quantity_bit(kUyy);
  p.residual.eval = [k](const ResidualPoint& pt, const double*, EquationEval* out) {
    const double u = pt.ch[0].u;
    const double c = std::cos(k * (pt.x + pt.y));
    const double f = std::sin(c * c) - 2.0 * k * k * c;
    out[0].value = std::sin(u * u) + pt.ch[0].uxx + pt.ch[0].uyy - f;
    out[0].d_ch[0].u = 2.0 * u * std::cos(u * u);
    out[0].d_ch[0].uxx = 1.0;
    out[0].d_ch[0].uyy = 1.0;
  };
  p.boundary = boundary_samples(p.domain, 800, dirichlet_from(p.exact, 1));
  p.training.learning_rate = 1e-4;
  p.training.epochs = 30000;
  set_weight_ratio(p.training, 1.0, 99.0);
  p.training.log_every = 200;
  p.eval = EvalSpec{EvalDomain::InteriorNodes, 0};
  return p;
}

// --- anisotropic convection-diffusion on a 5-petal starfish domain -----------
// u_xx + 5 u_yy + k sin(u) u_x = f, exact u = sin(0.5 + x + k x y + k y^2),
// rho(th) = 1 + 0.5 cos^2(2.5 th).

inline ProblemDef make_starfish(double k) {
  ProblemDef p;
  p.name = "starfish";
  p.description =
      "u_xx + 5 u_yy + k sin(u) u_x = f on the starfish domain, exact u = sin(0.5 + x + kxy + ky^2)";
  p.domain = DomainShape::polar([](double th) {
    const double c = std::cos(2.5 * th);
    return 1.0 + 0.5 * c * c;
  });
  p.grid = detail::grid_from_spacing(bounding_box(p.domain), 0.02);
  p.exact = [k](double x, double y, int) {
    return std::sin(0.5 + x + k * x * y + k * y * y);
  };
  p.residual.channels = 1;
  p.residual.used =
      quantity_bit(kU) | quantity_bit(kUx) | quantity_bit(kUxx) | quantity_bit(kUyy);
  p.residual.eval = [k](const ResidualPoint& pt, const double*, EquationEval* out) {
    const double x = pt.x, y = pt.y;
    const double psi = 0.5 + x + k * x * y + k * y * y;
    const double f =
        -(1.0 + 2.0 * k * y + k * k * (5.0 * x * x + 20.0 * x * y + 21.0 * y * y)) *
            std::sin(psi) +
        k * std::cos(psi) * (10.0 + (1.0 + k * y) * std::sin(std::sin(psi)));
    const double u = pt.ch[0].u;
    out[0].value = pt.ch[0].uxx + 5.0 * pt.ch[0].uyy + k * std::sin(u) * pt.ch[0].ux - f;
    out[0].d_ch[0].uxx = 1.0;
    out[0].d_ch[0].uyy = 5.0;
    out[0].d_ch[0].ux = k * std::sin(u);
    out[0].d_ch[0].u = k * std::cos(u) * pt.ch[0].ux;
  };
  p.boundary = boundary_samples(p.domain, 800, dirichlet_from(p.exact, 1));
  p.training.learning_rate = 1e-4;
  p.training.epochs = 60000;
  set_weight_ratio(p.training, 1.0, 99.0);
  p.training.log_every = 400;
  p.eval = EvalSpec{EvalDomain::InteriorNodes, 0};
  return p;
}

// --- anisotropy-ratio estimation from observations ---------------------------
// lambda1 u_xx + lambda2 u_yy = 0 fit to observations of sin(x) sinh(y/sqrt(5));
// lambda1 frozen at 1, lambda2 trainable (true ratio 5).

inline ProblemDef make_aniso_inverse() {
  ProblemDef p;
  p.name = "aniso_inverse";
  p.description = "estimate lambda2/lambda1 of lambda1 u_xx + lambda2 u_yy = 0 from observations";
  p.domain = DomainShape::rectangle(0.0, 1.0, 0.0, 1.0);
  // Output grid 18x18 (hidden 20x20): fewer trainable parameters (412) than
  // observations (441), so the data overdetermine the field and the residual
  // cannot be zeroed by sub-grid wiggles at a wrong coefficient — this is what
  // makes the coefficient identifiable.  Observations live on their own finer
  // 0.05-spaced lattice and are matched through bilinear interpolation.
  p.grid = GridSpec{0.0, 1.0, 0.0, 1.0, 18, 18};
  p.activation = Activation::Identity;
  p.exact = [](double x, double y, int) { return aniso_reference_field(x, y, 5.0); };
  p.residual.channels = 1;
  p.residual.n_lambda = 2;
  p.residual.used = quantity_bit(kUxx) | quantity_bit(kUyy);
  p.residual.eval = [](const ResidualPoint& pt, const double* lambda, EquationEval* out) {
    out[0].value = lambda[0] * pt.ch[0].uxx + lambda[1] * pt.ch[0].uyy;
    out[0].d_ch[0].uxx = lambda[0];
    out[0].d_ch[0].uyy = lambda[1];
    out[0].d_lambda[0] = pt.ch[0].uxx;
    out[0].d_lambda[1] = pt.ch[0].uyy;
  };
  p.lambda0 = {1.0, 1.0};
  p.lambda_frozen = {1, 0};
  p.obs_grid = GridSpec{0.0, 1.0, 0.0, 1.0, 21, 21};
  detail::attach_clean_observations(p);
  p.training.learning_rate = 2e-4;
  p.training.epochs = 150000;
  // The coefficient's useful gradient is ~1e-6 and sits under oscillation
  // noise from the field parameters; averaging the gradient over ~1000 steps
  // (beta1 = 0.999) extracts that drift and lets the coefficient reach the
  // loss minimum (ratio 5.009 for every init seed).  With the stock 0.9 it
  // stalls near 1.4 indefinitely.
  p.training.beta1 = 0.999;
  set_weight_ratio(p.training, 1.0, 99.0);
  p.training.log_every = 200;
  p.eval = EvalSpec{EvalDomain::GridNodes, 0};
  return p;
}

// --- physics-regularized denoising -------------------------------------------
// known:        1 u_xx + 5 u_yy = 0 (both coefficients frozen)
// misspecified: k1 u_xx + k2 u_yy = 1 (both trainable) on a field that does
//               not solve it; the operator only acts as a smoothness prior.

inline ProblemDef make_denoise(bool misspecified) {
  ProblemDef p;
  p.name = misspecified ? "denoise_misspec" : "denoise";
  p.description = misspecified
                      ? "denoise observations under the trainable prior k1 u_xx + k2 u_yy = 1"
                      : "denoise observations under the known prior u_xx + 5 u_yy = 0";
  p.domain = DomainShape::rectangle(0.0, 1.0, 0.0, 1.0);
  p.grid = GridSpec{0.0, 1.0, 0.0, 1.0, 21, 21};
  p.activation = Activation::Identity;
  p.residual.channels = 1;
  p.residual.n_lambda = 2;
  p.residual.used = quantity_bit(kUxx) | quantity_bit(kUyy);
  if (misspecified) {
    p.reference = [](double x, double y, int) { return explicit_reference_field(x, y); };
    p.residual.eval = [](const ResidualPoint& pt, const double* lambda, EquationEval* out) {
      out[0].value = lambda[0] * pt.ch[0].uxx + lambda[1] * pt.ch[0].uyy - 1.0;
      out[0].d_ch[0].uxx = lambda[0];
      out[0].d_ch[0].uyy = lambda[1];
      out[0].d_lambda[0] = pt.ch[0].uxx;
      out[0].d_lambda[1] = pt.ch[0].uyy;
    };
    p.lambda0 = {1.0, 1.0};
    p.lambda_frozen = {0, 0};
  } else {
    p.exact = [](double x, double y, int) { return aniso_reference_field(x, y, 5.0); };
    p.residual.eval = [](const ResidualPoint& pt, const double* lambda, EquationEval* out) {
      out[0].value = lambda[0] * pt.ch[0].uxx + lambda[1] * pt.ch[0].uyy;
      out[0].d_ch[0].uxx = lambda[0];
      out[0].d_ch[0].uyy = lambda[1];
      out[0].d_lambda[0] = pt.ch[0].uxx;
      out[0].d_lambda[1] = pt.ch[0].uyy;
    };
    p.lambda0 = {1.0, 5.0};
    p.lambda_frozen = {1, 1};
  }
  p.obs_grid = GridSpec{0.0, 1.0, 0.0, 1.0, 21, 21};
  detail::attach_clean_observations(p);
  p.training.learning_rate = 1e-3;
  // With the prior known exactly, reconstruction error under heavy noise is
  // U-shaped in training length: the physics term denoises fastest early on,
  // and past ~12k epochs the network starts refitting the noise (the
  // stationary point of this loss keeps a noise floor near 0.17 at every
  // weight ratio).  8k epochs sits in the flat bottom of that U.  The
  // trainable prior has no such window — its coefficients need ~20k epochs to
  // settle before the field can follow.
  p.training.epochs = misspecified ? 20000 : 8000;
  set_weight_ratio(p.training, 1.0, 99.0);
  p.training.log_every = 200;
  p.eval = EvalSpec{EvalDomain::GridNodes, 0};
  return p;
}

}  // namespace detail

inline const std::vector<std::string>& builtin_problem_names() {
  static const std::vector<std::string> names = {
      "sweep1d",  "sweep2d", "sine_ode", "mixed_bvp",     "schrodinger",
      "star",     "bird",    "starfish", "aniso_inverse", "denoise"};
  return names;
}

/// Build a builtin problem. Recognized parameters: sine_ode takes m (1, 2 or
/// 3 in the reference study); star/bird/starfish take the wavenumber k
/// (default 5). "denoise_misspec" names the trainable-prior variant of
/// "denoise".
inline ProblemDef get_problem(const std::string& name, const ProblemParams& params = {}) {
  auto no_params = [&](const char* problem) {
    if (!params.empty())
      throw std::invalid_argument(std::string("get_problem: problem '") + problem +
                                  "' does not accept parameter '" + params.begin()->first + "'");
  };
  if (name == "sweep1d") {
    no_params("sweep1d");
    return detail::make_sweep1d();
  }
  if (name == "sweep2d") {
    no_params("sweep2d");
    return detail::make_sweep2d();
  }
  if (name == "sine_ode") {
    const double m = detail::get_param(params, "m", 1.0, {"m"}, name);
    if (m != std::floor(m)) throw std::invalid_argument("sine_ode: m must be an integer");
    return detail::make_sine_ode(static_cast<int>(m));
  }
  if (name == "mixed_bvp") {
    no_params("mixed_bvp");
    return detail::make_mixed_bvp();
  }
  if (name == "schrodinger") {
    no_params("schrodinger");
    return detail::make_schrodinger();
  }
  if (name == "star") return detail::make_star(detail::get_param(params, "k", 5.0, {"k"}, name));
  if (name == "bird") return detail::make_bird(detail::get_param(params, "k", 5.0, {"k"}, name));
  if (name == "starfish")
    return detail::make_starfish(detail::get_param(params, "k", 5.0, {"k"}, name));
  if (name == "aniso_inverse") {
    no_params("aniso_inverse");
    return detail::make_aniso_inverse();
  }
  if (name == "denoise") {
    no_params("denoise");
    return detail::make_denoise(false);
  }
  if (name == "denoise_misspec") {
    no_params("denoise_misspec");
    return detail::make_denoise(true);
  }
  std::string known;
  for (const auto& n : builtin_problem_names()) known += (known.empty() ? "" : ", ") + n;
  throw std::invalid_argument("get_problem: unknown problem '" + name +
                              "'; builtin problems: " + known);
}

/// Shrink a problem to a few dozen parameters for finite-difference gradient
/// verification: 1D grids become 1x18 (hidden 1x20), 2D grids 6x6 (hidden
/// 8x8) over the same boxes; boundary samples and observations are strided
/// down. Everything else (residual, domain, weights) is untouched.
inline ProblemDef make_reduced(const ProblemDef& full) {
  ProblemDef p = full;
  if (p.grid.one_dimensional()) {
    p.grid.nx = 18;
  } else {
    p.grid.nx = 6;
    p.grid.ny = 6;
  }
  auto stride_to = [](auto& vec, size_t want) {
    if (vec.size() <= want || want == 0) return;
    std::remove_reference_t<decltype(vec)> kept;
    const size_t step = (vec.size() + want - 1) / want;
    for (size_t i = 0; i < vec.size(); i += step) kept.push_back(vec[i]);
    vec = std::move(kept);
  };
  stride_to(p.boundary, 12);
  stride_to(p.observations, 25);
  return p;
}

}  // namespace picn
