#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "picn/field.hpp"
#include "picn/rng.hpp"
#include "picn/stencil.hpp"

namespace picn {

enum class Activation { Tanh, Identity, Sine };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
    case Activation::Sine: return "sine";
  }
  throw std::logic_error("activation_name: bad enum");
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  if (s == "sine") return Activation::Sine;
  throw std::invalid_argument("unknown activation '" + s + "' (expected tanh|identity|sine)");
}

/// Field generator: a trainable m x n hidden field plus scalar bias is passed
/// through one valid cross-correlation with a trainable p x q kernel, a scalar
/// output bias, and a pointwise activation. The prediction covers an
/// (m-p+1) x (n-q+1) grid.
struct PicnModel {
  int m = 0, n = 0;  // hidden field extents
  int p = 0, q = 0;  // output kernel extents
  Activation activation = Activation::Tanh;
  FieldTensor w_h;  // m x n
  double b_h = 0.0;
  FieldTensor w_o;  // p x q
  double b_o = 0.0;

  int out_rows() const { return m - p + 1; }
  int out_cols() const { return n - q + 1; }
  int parameter_count() const { return m * n + p * q + 2; }
};

struct ModelGradients {
  FieldTensor g_w_h;
  double g_b_h = 0.0;
  FieldTensor g_w_o;
  double g_b_o = 0.0;
};

struct ForwardPass {
  FieldTensor hidden;  // w_h + b_h
  FieldTensor pre;     // hidden (*) w_o + b_o
  FieldTensor u_hat;   // activation(pre)
};

/// Weights uniform in [-s, s] with s = sqrt(1/(p*q)); biases start at zero.
/// Sampling order (w_h row-major, then w_o row-major) is part of the
/// reproducibility contract.
inline PicnModel init_params(int m, int n, int p, int q, Activation activation,
                             std::uint64_t seed) {
  if (m < 1 || n < 1 || p < 1 || q < 1)
    throw std::invalid_argument("init_params: extents must be positive");
  if (p > m || q > n)
    throw std::invalid_argument("init_params: kernel larger than hidden field");
  if (p % 2 == 0 || q % 2 == 0)
    throw std::invalid_argument("init_params: kernel extents must be odd");
  PicnModel model;
  model.m = m;
  model.n = n;
  model.p = p;
  model.q = q;
  model.activation = activation;
  model.w_h = FieldTensor(m, n);
  model.w_o = FieldTensor(p, q);
  const double s = std::sqrt(1.0 / (p * q));
  Rng rng(seed);
  for (double& w : model.w_h.values()) w = rng.uniform(-s, s);
  for (double& w : model.w_o.values()) w = rng.uniform(-s, s);
  return model;
}

inline double activate(Activation a, double pre) {
  switch (a) {
    case Activation::Tanh: return std::tanh(pre);
    case Activation::Identity: return pre;
    case Activation::Sine: return std::sin(pre);
  }
  throw std::logic_error("activate: bad enum");
}

/// Derivative of the activation given both pre-activation and output value
/// (tanh reuses the output, the others use the pre-activation).
inline double activate_grad(Activation a, double pre, double value) {
  switch (a) {
    case Activation::Tanh: return 1.0 - value * value;
    case Activation::Identity: return 1.0;
    case Activation::Sine: return std::cos(pre);
  }
  throw std::logic_error("activate_grad: bad enum");
}

inline void forward_into(const PicnModel& model, ForwardPass& f) {
  if (f.hidden.rows() != model.m || f.hidden.cols() != model.n) {
    f.hidden = FieldTensor(model.m, model.n);
    f.pre = FieldTensor(model.out_rows(), model.out_cols());
    f.u_hat = FieldTensor(model.out_rows(), model.out_cols());
  }
  for (int i = 0; i < model.m; ++i)
    for (int j = 0; j < model.n; ++j) f.hidden(i, j) = model.w_h(i, j) + model.b_h;
  detail::correlate_valid(f.hidden, model.w_o, f.pre);
  const int sz = f.pre.size();
  for (int t = 0; t < sz; ++t) {
    const double pre = f.pre.data()[t] + model.b_o;
    f.pre.data()[t] = pre;
    f.u_hat.data()[t] = activate(model.activation, pre);
  }
}

inline ForwardPass forward(const PicnModel& model) {
  ForwardPass f;
  forward_into(model, f);
  return f;
}

/// Hand-derived backward pass for dL/d(parameters) given dL/d(u_hat).
/// The kernel gradient is the valid correlation of the hidden field with the
/// pre-activation gradient; the hidden-field gradient is the correlation
/// adjoint (full convolution with the rotated kernel).
inline void backward_into(const PicnModel& model, const ForwardPass& f,
                          const FieldTensor& dL_du_hat, ModelGradients& g) {
  if (!dL_du_hat.same_shape(f.u_hat))
    throw std::invalid_argument("backward: upstream gradient shape mismatch");
  if (g.g_w_h.rows() != model.m || g.g_w_h.cols() != model.n) {
    g.g_w_h = FieldTensor(model.m, model.n);
    g.g_w_o = FieldTensor(model.p, model.q);
  }
  FieldTensor dpre(f.pre.rows(), f.pre.cols());
  double g_b_o = 0.0;
  const int sz = dpre.size();
  for (int t = 0; t < sz; ++t) {
    const double d = dL_du_hat.data()[t] *
                     activate_grad(model.activation, f.pre.data()[t], f.u_hat.data()[t]);
    dpre.data()[t] = d;
    g_b_o += d;
  }
  g.g_b_o = g_b_o;
  detail::correlate_valid(f.hidden, dpre, g.g_w_o);
  g.g_w_h.fill(0.0);
  detail::correlate_valid_transpose_add(dpre, model.w_o, g.g_w_h);
  double g_b_h = 0.0;
  for (double v : g.g_w_h.values()) g_b_h += v;
  g.g_b_h = g_b_h;
}

inline ModelGradients backward(const PicnModel& model, const ForwardPass& f,
                               const FieldTensor& dL_du_hat) {
  ModelGradients g;
  backward_into(model, f, dL_du_hat, g);
  return g;
}

namespace detail {

inline void write_value(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

inline void write_tensor(std::ostream& os, const FieldTensor& t) {
  for (int i = 0; i < t.rows(); ++i) {
    for (int j = 0; j < t.cols(); ++j) {
      if (j) os << ' ';
      write_value(os, t(i, j));
    }
    os << '\n';
  }
}

}  // namespace detail

/// Checkpoint layout: one header line, one shape/activation line, then w_h
/// (row-major), b_h, w_o (row-major), b_o as 17-significant-digit decimals,
/// which round-trip binary doubles exactly.
inline void save_model(const PicnModel& model, std::ostream& os) {
  os << "picn-model 1\n";
  os << model.m << ' ' << model.n << ' ' << model.p << ' ' << model.q << ' '
     << activation_name(model.activation) << '\n';
  detail::write_tensor(os, model.w_h);
  detail::write_value(os, model.b_h);
  os << '\n';
  detail::write_tensor(os, model.w_o);
  detail::write_value(os, model.b_o);
  os << '\n';
}

inline void save_model(const PicnModel& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_model: cannot open '" + path + "'");
  save_model(model, os);
  if (!os) throw std::runtime_error("save_model: write failed for '" + path + "'");
}

inline PicnModel load_model(std::istream& is) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (!is || magic != "picn-model" || version != 1)
    throw std::runtime_error("load_model: not a picn-model v1 checkpoint");
  PicnModel model;
  std::string act;
  is >> model.m >> model.n >> model.p >> model.q >> act;
  if (!is || model.m < 1 || model.n < 1 || model.p < 1 || model.q < 1 ||
      model.p > model.m || model.q > model.n)
    throw std::runtime_error("load_model: bad shape header");
  model.activation = activation_from_name(act);
  model.w_h = FieldTensor(model.m, model.n);
  model.w_o = FieldTensor(model.p, model.q);
  for (double& v : model.w_h.values()) is >> v;
  is >> model.b_h;
  for (double& v : model.w_o.values()) is >> v;
  is >> model.b_o;
  if (!is) throw std::runtime_error("load_model: truncated checkpoint");
  return model;
}

inline PicnModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_model: cannot open '" + path + "'");
  return load_model(is);
}

}  // namespace picn
