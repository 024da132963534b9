#pragma once

// Reference implementations and hand-derived calculus used as test oracles.
// Everything here is written independently of the library internals it
// checks: correlation by four explicit loops, derivatives derived on paper
// per problem, plain finite differencing.

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <picn/field.hpp>
#include <picn/problem.hpp>

namespace oracle {

inline picn::FieldTensor correlate(const picn::FieldTensor& f, const picn::FieldTensor& k) {
  const int out_r = f.rows() - k.rows() + 1;
  const int out_c = f.cols() - k.cols() + 1;
  if (out_r < 1 || out_c < 1) throw std::invalid_argument("oracle::correlate: kernel too large");
  picn::FieldTensor out(out_r, out_c);
  for (int i = 0; i < out_r; ++i)
    for (int j = 0; j < out_c; ++j) {
      double acc = 0.0;
      for (int a = 0; a < k.rows(); ++a)
        for (int b = 0; b < k.cols(); ++b) acc += f(i + a, j + b) * k(a, b);
      out(i, j) = acc;
    }
  return out;
}

inline double inner(const picn::FieldTensor& a, const picn::FieldTensor& b) {
  double acc = 0.0;
  for (int i = 0; i < a.size(); ++i) acc += a.data()[i] * b.data()[i];
  return acc;
}

inline picn::FieldTensor random_field(int rows, int cols, std::mt19937& gen, double lo = -1.0,
                                      double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  picn::FieldTensor f(rows, cols);
  for (int i = 0; i < f.size(); ++i) f.data()[i] = dist(gen);
  return f;
}

/// Central finite difference of a scalar functional at *slot.
inline double fd(double* slot, const std::function<double()>& value, double h = 1e-6) {
  const double saved = *slot;
  *slot = saved + h;
  const double up = value();
  *slot = saved - h;
  const double down = value();
  *slot = saved;
  return (up - down) / (2.0 * h);
}

/// Analytic solution and derivatives for one channel, derived by hand.
struct Bundle {
  std::function<double(double, double)> u, ux, uy, uxx, uyy, uxy;
};

inline std::function<double(double, double)> zero_fn() {
  return [](double, double) { return 0.0; };
}

/// Per-channel bundles for the builtin problems that carry an exact
/// solution. `param` is m for sine_ode and k for star/bird/starfish.
inline std::vector<Bundle> bundles(const std::string& name, double param = 0.0) {
  using std::cos;
  using std::cosh;
  using std::exp;
  using std::sin;
  using std::sinh;
  if (name == "sweep1d") {
    Bundle b;
    b.u = [](double x, double) { return sin(x * x); };
    b.ux = [](double x, double) { return 2.0 * x * cos(x * x); };
    b.uxx = [](double x, double) { return 2.0 * cos(x * x) - 4.0 * x * x * sin(x * x); };
    b.uy = zero_fn();
    b.uyy = zero_fn();
    b.uxy = zero_fn();
    return {b};
  }
  if (name == "sweep2d" || name == "mixed_bvp") {
    Bundle b;
    auto s = [](double x, double y) { return x * x + y * y; };
    b.u = [s](double x, double y) { return sin(s(x, y)); };
    b.ux = [s](double x, double y) { return 2.0 * x * cos(s(x, y)); };
    b.uy = [s](double x, double y) { return 2.0 * y * cos(s(x, y)); };
    b.uxx = [s](double x, double y) { return 2.0 * cos(s(x, y)) - 4.0 * x * x * sin(s(x, y)); };
    b.uyy = [s](double x, double y) { return 2.0 * cos(s(x, y)) - 4.0 * y * y * sin(s(x, y)); };
    b.uxy = [s](double x, double y) { return -4.0 * x * y * sin(s(x, y)); };
    return {b};
  }
  if (name == "sine_ode") {
    const double a = param * std::numbers::pi;
    Bundle b;
    b.u = [a](double x, double) { return exp(-x) * sin(a * x * x); };
    b.ux = [a](double x, double) {
      return exp(-x) * (2.0 * a * x * cos(a * x * x) - sin(a * x * x));
    };
    b.uxx = [a](double x, double) {
      return exp(-x) * ((2.0 * a - 4.0 * a * x) * cos(a * x * x) +
                        (1.0 - 4.0 * a * a * x * x) * sin(a * x * x));
    };
    b.uy = zero_fn();
    b.uyy = zero_fn();
    b.uxy = zero_fn();
    return {b};
  }
  if (name == "schrodinger") {
    Bundle u, v;  // time is the y axis
    u.u = [](double x, double t) { return cos(x - t); };
    u.ux = [](double x, double t) { return -sin(x - t); };
    u.uy = [](double x, double t) { return sin(x - t); };
    u.uxx = [](double x, double t) { return -cos(x - t); };
    u.uyy = [](double x, double t) { return -cos(x - t); };
    u.uxy = [](double x, double t) { return cos(x - t); };
    v.u = [](double x, double t) { return sin(x - t); };
    v.ux = [](double x, double t) { return cos(x - t); };
    v.uy = [](double x, double t) { return -cos(x - t); };
    v.uxx = [](double x, double t) { return -sin(x - t); };
    v.uyy = [](double x, double t) { return -sin(x - t); };
    v.uxy = [](double x, double t) { return sin(x - t); };
    return {u, v};
  }
  if (name == "star") {
    const double k = param;
    auto phi = [k](double x, double y) { return x + k * x * y + k * y * y; };
    auto px = [k](double, double y) { return 1.0 + k * y; };
    auto py = [k](double x, double y) { return k * x + 2.0 * k * y; };
    Bundle b;
    b.u = [phi](double x, double y) { return cos(phi(x, y)); };
    b.ux = [phi, px](double x, double y) { return -sin(phi(x, y)) * px(x, y); };
    b.uy = [phi, py](double x, double y) { return -sin(phi(x, y)) * py(x, y); };
    b.uxx = [phi, px](double x, double y) {
      const double p = px(x, y);
      return -cos(phi(x, y)) * p * p;
    };
    b.uyy = [phi, py, k](double x, double y) {
      const double p = py(x, y);
      return -cos(phi(x, y)) * p * p - sin(phi(x, y)) * 2.0 * k;
    };
    b.uxy = [phi, px, py, k](double x, double y) {
      return -cos(phi(x, y)) * px(x, y) * py(x, y) - sin(phi(x, y)) * k;
    };
    return {b};
  }
  if (name == "bird") {
    const double k = param;
    Bundle b;
    b.u = [k](double x, double y) { return cos(k * (x + y)); };
    b.ux = [k](double x, double y) { return -k * sin(k * (x + y)); };
    b.uy = b.ux;
    b.uxx = [k](double x, double y) { return -k * k * cos(k * (x + y)); };
    b.uyy = b.uxx;
    b.uxy = b.uxx;
    return {b};
  }
  if (name == "starfish") {
    const double k = param;
    auto psi = [k](double x, double y) { return 0.5 + x + k * x * y + k * y * y; };
    auto px = [k](double, double y) { return 1.0 + k * y; };
    auto py = [k](double x, double y) { return k * x + 2.0 * k * y; };
    Bundle b;
    b.u = [psi](double x, double y) { return sin(psi(x, y)); };
    b.ux = [psi, px](double x, double y) { return cos(psi(x, y)) * px(x, y); };
    b.uy = [psi, py](double x, double y) { return cos(psi(x, y)) * py(x, y); };
    b.uxx = [psi, px](double x, double y) {
      const double p = px(x, y);
      return -sin(psi(x, y)) * p * p;
    };
    b.uyy = [psi, py, k](double x, double y) {
      const double p = py(x, y);
      return -sin(psi(x, y)) * p * p + cos(psi(x, y)) * 2.0 * k;
    };
    b.uxy = [psi, px, py, k](double x, double y) {
      return -sin(psi(x, y)) * px(x, y) * py(x, y) + cos(psi(x, y)) * k;
    };
    return {b};
  }
  if (name == "aniso_inverse" || name == "denoise") {
    const double r5 = std::sqrt(5.0);
    Bundle b;
    b.u = [r5](double x, double y) { return sin(x) * sinh(y / r5); };
    b.ux = [r5](double x, double y) { return cos(x) * sinh(y / r5); };
    b.uy = [r5](double x, double y) { return sin(x) * cosh(y / r5) / r5; };
    b.uxx = [r5](double x, double y) { return -sin(x) * sinh(y / r5); };
    b.uyy = [r5](double x, double y) { return sin(x) * sinh(y / r5) / 5.0; };
    b.uxy = [r5](double x, double y) { return cos(x) * cosh(y / r5) / r5; };
    return {b};
  }
  throw std::invalid_argument("oracle::bundles: no analytic bundle for " + name);
}

/// Fill a PointBundle with the analytic quantities a problem's residual uses.
inline picn::PointBundle sample_bundle(const std::vector<Bundle>& bs, unsigned used_mask,
                                       double x, double y) {
  picn::PointBundle pb;
  pb.x = x;
  pb.y = y;
  pb.provided = used_mask;
  for (size_t c = 0; c < bs.size(); ++c) {
    if (used_mask & picn::quantity_bit(picn::kU)) pb.ch[c].u = bs[c].u(x, y);
    if (used_mask & picn::quantity_bit(picn::kUx)) pb.ch[c].ux = bs[c].ux(x, y);
    if (used_mask & picn::quantity_bit(picn::kUy)) pb.ch[c].uy = bs[c].uy(x, y);
    if (used_mask & picn::quantity_bit(picn::kUxx)) pb.ch[c].uxx = bs[c].uxx(x, y);
    if (used_mask & picn::quantity_bit(picn::kUyy)) pb.ch[c].uyy = bs[c].uyy(x, y);
    if (used_mask & picn::quantity_bit(picn::kUxy)) pb.ch[c].uxy = bs[c].uxy(x, y);
  }
  return pb;
}

}  // namespace oracle
