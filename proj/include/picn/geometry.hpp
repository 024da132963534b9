#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <variant>
#include <vector>

#include "picn/field.hpp"

namespace picn {

struct BoundingBox {
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
};

struct RectangleDomain {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
};

/// Star-shaped region rho <= radius(theta) about the origin.
struct PolarDomain {
  std::function<double(double)> radius;
};

/// Solver domain: either an axis-aligned rectangle or a polar star-shaped
/// region described by its boundary radius function.
struct DomainShape {
  std::variant<RectangleDomain, PolarDomain> shape;

  static DomainShape rectangle(double x_min, double x_max, double y_min, double y_max) {
    if (!(x_max > x_min) || !(y_max >= y_min))
      throw std::invalid_argument("DomainShape::rectangle: degenerate bounds");
    return DomainShape{RectangleDomain{x_min, x_max, y_min, y_max}};
  }

  static DomainShape polar(std::function<double(double)> radius) {
    if (!radius) throw std::invalid_argument("DomainShape::polar: missing radius function");
    return DomainShape{PolarDomain{std::move(radius)}};
  }

  bool is_polar() const { return std::holds_alternative<PolarDomain>(shape); }
};

/// Tight axis-aligned bounding box; polar boxes are found by dense sampling
/// of the boundary curve.
inline BoundingBox bounding_box(const DomainShape& d) {
  if (const auto* r = std::get_if<RectangleDomain>(&d.shape))
    return {r->x_min, r->x_max, r->y_min, r->y_max};
  const auto& p = std::get<PolarDomain>(d.shape);
  BoundingBox box{1e300, -1e300, 1e300, -1e300};
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double th = 2.0 * std::numbers::pi * k / n;
    const double rho = p.radius(th);
    if (!(rho >= 0.0)) throw std::invalid_argument("bounding_box: negative boundary radius");
    const double x = rho * std::cos(th), y = rho * std::sin(th);
    box.x_min = std::min(box.x_min, x);
    box.x_max = std::max(box.x_max, x);
    box.y_min = std::min(box.y_min, y);
    box.y_max = std::max(box.y_max, y);
  }
  return box;
}

/// Point membership. Rectangle: closed bounds. Polar: rho(point) <= radius(theta).
inline bool inside(const DomainShape& d, double x, double y) {
  if (const auto* r = std::get_if<RectangleDomain>(&d.shape))
    return x >= r->x_min && x <= r->x_max && y >= r->y_min && y <= r->y_max;
  const auto& p = std::get<PolarDomain>(d.shape);
  const double rho = std::hypot(x, y);
  if (rho == 0.0) return true;
  return rho <= p.radius(std::atan2(y, x));
}

enum class BcKind { Dirichlet, Neumann };

/// One boundary constraint: a position on the boundary curve, the outward
/// unit normal there, and the target for one field channel.
struct BoundarySample {
  double x = 0.0, y = 0.0;
  double nx = 0.0, ny = 0.0;
  BcKind kind = BcKind::Dirichlet;
  int channel = 0;
  double target = 0.0;
};

/// Per-position boundary conditions: kind + target for each constrained channel.
struct BoundaryConditionSpec {
  BcKind kind = BcKind::Dirichlet;
  int channel = 0;
  double target = 0.0;
};

using BcAssign =
    std::function<std::vector<BoundaryConditionSpec>(double x, double y, double nx, double ny)>;

namespace detail {

inline void polar_point_and_normal(const PolarDomain& p, double theta, double& x, double& y,
                                   double& nx, double& ny) {
  const double rho = p.radius(theta);
  x = rho * std::cos(theta);
  y = rho * std::sin(theta);
  // Tangent from a central difference of the boundary curve, rotated -90
  // degrees and normalized; flipped if it points inward.
  const double h = 1e-6;
  const double rp = p.radius(theta + h), rm = p.radius(theta - h);
  const double xp = rp * std::cos(theta + h), yp = rp * std::sin(theta + h);
  const double xm = rm * std::cos(theta - h), ym = rm * std::sin(theta - h);
  double tx = (xp - xm) / (2.0 * h), ty = (yp - ym) / (2.0 * h);
  const double norm = std::hypot(tx, ty);
  if (!(norm > 0.0)) throw std::runtime_error("boundary_samples: degenerate boundary tangent");
  nx = ty / norm;
  ny = -tx / norm;
  if (nx * x + ny * y < 0.0) {
    nx = -nx;
    ny = -ny;
  }
}

}  // namespace detail

/// `count` samples spread over the boundary: uniform arc length around a
/// rectangle's perimeter (corners avoided by a half-step offset, normals
/// axis-aligned), uniform theta for polar domains. Each position expands to
/// one sample per boundary condition the assignment returns for it.
inline std::vector<BoundarySample> boundary_samples(const DomainShape& d, int count,
                                                    const BcAssign& assign) {
  if (count < 1) throw std::invalid_argument("boundary_samples: count must be >= 1");
  if (!assign) throw std::invalid_argument("boundary_samples: missing assignment");
  std::vector<BoundarySample> out;
  out.reserve(count);
  auto emit = [&](double x, double y, double nx, double ny) {
    for (const auto& bc : assign(x, y, nx, ny))
      out.push_back(BoundarySample{x, y, nx, ny, bc.kind, bc.channel, bc.target});
  };
  if (const auto* r = std::get_if<RectangleDomain>(&d.shape)) {
    const double lx = r->x_max - r->x_min, ly = r->y_max - r->y_min;
    const double perim = 2.0 * (lx + ly);
    for (int k = 0; k < count; ++k) {
      double s = (k + 0.5) * perim / count;
      if (s < lx) {
        emit(r->x_min + s, r->y_min, 0.0, -1.0);
      } else if ((s -= lx) < ly) {
        emit(r->x_max, r->y_min + s, 1.0, 0.0);
      } else if ((s -= ly) < lx) {
        emit(r->x_max - s, r->y_max, 0.0, 1.0);
      } else {
        s -= lx;
        emit(r->x_min, r->y_max - s, -1.0, 0.0);
      }
    }
  } else {
    const auto& p = std::get<PolarDomain>(d.shape);
    for (int k = 0; k < count; ++k) {
      const double theta = 2.0 * std::numbers::pi * k / count;
      double x, y, nx, ny;
      detail::polar_point_and_normal(p, theta, x, y, nx, ny);
      emit(x, y, nx, ny);
    }
  }
  return out;
}

/// Bilinear interpolation stencil: grid cell anchor (i,j) = node at the low-x,
/// low-y cell corner plus the four corner weights (w00 anchor, w01 +x,
/// w10 +y, w11 +x+y). Weights sum to 1.
struct InterpStencil {
  int i = 0, j = 0;
  double w00 = 0.0, w01 = 0.0, w10 = 0.0, w11 = 0.0;
};

/// Build the interpolation stencil for a point inside the grid rectangle.
/// Points on the max edges clamp to the last cell; points further than 1e-9
/// (relative to one cell) outside the rectangle are an error. 1D grids
/// (ny == 1) interpolate along x only.
inline InterpStencil interp_stencil(const GridSpec& grid, double x, double y) {
  grid.validate();
  const double dx = grid.dx();
  const double tol_x = 1e-9 * std::max(1.0, std::abs(dx) * grid.nx);
  if (x < grid.x_min - tol_x || x > grid.x_max + tol_x)
    throw std::invalid_argument("interp_stencil: x outside grid rectangle");
  InterpStencil s;
  double fx = (x - grid.x_min) / dx;
  int j = static_cast<int>(std::floor(fx));
  j = std::max(0, std::min(j, grid.nx - 2));
  double tx = fx - j;
  tx = std::max(0.0, std::min(tx, 1.0));
  double ty = 0.0;
  int i = 0;
  if (grid.ny > 1) {
    const double dy = grid.dy();
    const double tol_y = 1e-9 * std::max(1.0, std::abs(dy) * grid.ny);
    if (y < grid.y_min - tol_y || y > grid.y_max + tol_y)
      throw std::invalid_argument("interp_stencil: y outside grid rectangle");
    double fy = (y - grid.y_min) / dy;
    i = static_cast<int>(std::floor(fy));
    i = std::max(0, std::min(i, grid.ny - 2));
    ty = fy - i;
    ty = std::max(0.0, std::min(ty, 1.0));
  } else if (std::abs(y - grid.y_min) > 1e-9 * std::max(1.0, std::abs(grid.y_min))) {
    throw std::invalid_argument("interp_stencil: y off the 1D grid line");
  }
  s.i = i;
  s.j = j;
  s.w00 = (1.0 - tx) * (1.0 - ty);
  s.w01 = tx * (1.0 - ty);
  s.w10 = (1.0 - tx) * ty;
  s.w11 = tx * ty;
  return s;
}

inline double interp_apply(const FieldTensor& f, const InterpStencil& s) {
  double v = s.w00 * f(s.i, s.j) + s.w01 * f(s.i, s.j + 1);
  if (f.rows() > 1) v += s.w10 * f(s.i + 1, s.j) + s.w11 * f(s.i + 1, s.j + 1);
  return v;
}

struct InterpContribution {
  int i = 0, j = 0;
  double value = 0.0;
};

/// The four weighted node-gradient contributions of one interpolated value.
inline std::array<InterpContribution, 4> interp_backward(const InterpStencil& s,
                                                         double upstream) {
  return {InterpContribution{s.i, s.j, s.w00 * upstream},
          InterpContribution{s.i, s.j + 1, s.w01 * upstream},
          InterpContribution{s.i + 1, s.j, s.w10 * upstream},
          InterpContribution{s.i + 1, s.j + 1, s.w11 * upstream}};
}

/// Accumulate the interpolation adjoint directly into a gradient field.
inline void interp_scatter(FieldTensor& grad, const InterpStencil& s, double upstream) {
  grad(s.i, s.j) += s.w00 * upstream;
  grad(s.i, s.j + 1) += s.w01 * upstream;
  if (grad.rows() > 1) {
    grad(s.i + 1, s.j) += s.w10 * upstream;
    grad(s.i + 1, s.j + 1) += s.w11 * upstream;
  }
}

}  // namespace picn
