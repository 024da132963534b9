#pragma once

#include <stdexcept>
#include <string>

#include "picn/field.hpp"

namespace picn {

/// Fixed finite-difference stencil applied by valid cross-correlation.
/// Coefficients are never trained. Row index increases with +y, column
/// index with +x, matching FieldTensor/GridSpec orientation.
struct StencilKernel {
  FieldTensor coeffs;  // odd extents in both directions
  int order_x = 0;
  int order_y = 0;
  int truncation_order = 2;  // central differences: O(h^2)
};

/// Second-order central-difference kernel for d^(order_x+order_y) / dx^ox dy^oy.
/// Supported orders: (1,0), (0,1), (2,0), (0,2), (1,1). Kernels along one axis
/// are returned at their natural 1x3 / 3x1 size.
inline StencilKernel derivative_kernel(int order_x, int order_y, double dx, double dy) {
  auto need = [](double h, const char* name) {
    if (!(h > 0.0))
      throw std::invalid_argument(std::string("derivative_kernel: ") + name + " must be > 0");
  };
  StencilKernel k;
  k.order_x = order_x;
  k.order_y = order_y;
  if (order_x == 1 && order_y == 0) {
    need(dx, "dx");
    k.coeffs = FieldTensor(1, 3);
    k.coeffs(0, 0) = -1.0 / (2.0 * dx);
    k.coeffs(0, 2) = 1.0 / (2.0 * dx);
  } else if (order_x == 0 && order_y == 1) {
    need(dy, "dy");
    k.coeffs = FieldTensor(3, 1);
    k.coeffs(0, 0) = -1.0 / (2.0 * dy);
    k.coeffs(2, 0) = 1.0 / (2.0 * dy);
  } else if (order_x == 2 && order_y == 0) {
    need(dx, "dx");
    k.coeffs = FieldTensor(1, 3);
    k.coeffs(0, 0) = 1.0 / (dx * dx);
    k.coeffs(0, 1) = -2.0 / (dx * dx);
    k.coeffs(0, 2) = 1.0 / (dx * dx);
  } else if (order_x == 0 && order_y == 2) {
    need(dy, "dy");
    k.coeffs = FieldTensor(3, 1);
    k.coeffs(0, 0) = 1.0 / (dy * dy);
    k.coeffs(1, 0) = -2.0 / (dy * dy);
    k.coeffs(2, 0) = 1.0 / (dy * dy);
  } else if (order_x == 1 && order_y == 1) {
    need(dx, "dx");
    need(dy, "dy");
    const double s = 1.0 / (4.0 * dx * dy);
    k.coeffs = FieldTensor(3, 3);
    k.coeffs(0, 0) = s;   // (y-dy, x-dx)
    k.coeffs(0, 2) = -s;  // (y-dy, x+dx)
    k.coeffs(2, 0) = -s;  // (y+dy, x-dx)
    k.coeffs(2, 2) = s;   // (y+dy, x+dx)
  } else {
    throw std::invalid_argument("derivative_kernel: unsupported derivative order (" +
                                std::to_string(order_x) + "," + std::to_string(order_y) + ")");
  }
  return k;
}

/// 5-point Laplacian. Equal spacings give the classic (1/h^2)[[0,1,0],[1,-4,1],[0,1,0]];
/// unequal spacings give the sum of the two second-derivative kernels.
inline StencilKernel laplace_kernel(double dx, double dy) {
  if (!(dx > 0.0) || !(dy > 0.0))
    throw std::invalid_argument("laplace_kernel: spacings must be > 0");
  StencilKernel k;
  k.order_x = 2;
  k.order_y = 2;
  k.coeffs = FieldTensor(3, 3);
  k.coeffs(0, 1) = 1.0 / (dy * dy);
  k.coeffs(2, 1) = 1.0 / (dy * dy);
  k.coeffs(1, 0) = 1.0 / (dx * dx);
  k.coeffs(1, 2) = 1.0 / (dx * dx);
  k.coeffs(1, 1) = -2.0 / (dx * dx) - 2.0 / (dy * dy);
  return k;
}

/// Pad a 1x3 / 3x1 kernel into 3x3 with zero rows/columns so every derivative
/// field shares one valid-interior shape. 3x3 kernels pass through unchanged.
inline StencilKernel embed_3x3(const StencilKernel& k) {
  if (k.coeffs.rows() == 3 && k.coeffs.cols() == 3) return k;
  StencilKernel out = k;
  out.coeffs = FieldTensor(3, 3);
  const int ro = (3 - k.coeffs.rows()) / 2;
  const int co = (3 - k.coeffs.cols()) / 2;
  for (int i = 0; i < k.coeffs.rows(); ++i)
    for (int j = 0; j < k.coeffs.cols(); ++j)
      out.coeffs(ro + i, co + j) = k.coeffs(i, j);
  return out;
}

namespace detail {

/// out(i,j) = sum_ab k(a,b) * f(i+a, j+b); out must be preshaped to the valid size.
inline void correlate_valid(const FieldTensor& f, const FieldTensor& k, FieldTensor& out) {
  const int p = k.rows(), q = k.cols();
  const int orows = f.rows() - p + 1, ocols = f.cols() - q + 1;
  for (int i = 0; i < orows; ++i) {
    for (int j = 0; j < ocols; ++j) {
      double acc = 0.0;
      for (int a = 0; a < p; ++a) {
        const double* frow = f.data() + static_cast<size_t>(i + a) * f.cols() + j;
        const double* krow = k.data() + static_cast<size_t>(a) * q;
        for (int b = 0; b < q; ++b) acc += krow[b] * frow[b];
      }
      out(i, j) = acc;
    }
  }
}

/// Adjoint of correlate_valid: scatters grad_out back onto the full-size
/// input, accumulating into `into` (which must be preshaped and preloaded).
inline void correlate_valid_transpose_add(const FieldTensor& grad_out, const FieldTensor& k,
                                          FieldTensor& into) {
  const int p = k.rows(), q = k.cols();
  for (int i = 0; i < grad_out.rows(); ++i) {
    for (int j = 0; j < grad_out.cols(); ++j) {
      const double g = grad_out(i, j);
      if (g == 0.0) continue;
      for (int a = 0; a < p; ++a) {
        double* irow = into.data() + static_cast<size_t>(i + a) * into.cols() + j;
        const double* krow = k.data() + static_cast<size_t>(a) * q;
        for (int b = 0; b < q; ++b) irow[b] += g * krow[b];
      }
    }
  }
}

}  // namespace detail

/// Valid cross-correlation of a field with a stencil: no padding, the output
/// shrinks by (p-1, q-1). Output pixel (i,j) is the derivative estimate at
/// input node (i + (p-1)/2, j + (q-1)/2).
inline FieldTensor apply_stencil(const FieldTensor& field, const StencilKernel& k) {
  const int p = k.coeffs.rows(), q = k.coeffs.cols();
  if (field.rows() < p || field.cols() < q)
    throw std::invalid_argument("apply_stencil: field smaller than kernel");
  FieldTensor out(field.rows() - p + 1, field.cols() - q + 1);
  detail::correlate_valid(field, k.coeffs, out);
  return out;
}

/// Exact adjoint of apply_stencil: maps a gradient on the valid output back to
/// a gradient on the full-size input (equivalently, full convolution with the
/// 180-degree rotated kernel). Satisfies <apply(F,k),G> == <F, transpose(G,k)>.
inline FieldTensor apply_stencil_transpose(const FieldTensor& grad_out, const StencilKernel& k,
                                           int full_rows, int full_cols) {
  const int p = k.coeffs.rows(), q = k.coeffs.cols();
  if (grad_out.rows() != full_rows - p + 1 || grad_out.cols() != full_cols - q + 1)
    throw std::invalid_argument("apply_stencil_transpose: shape mismatch");
  FieldTensor out(full_rows, full_cols);
  detail::correlate_valid_transpose_add(grad_out, k.coeffs, out);
  return out;
}

}  // namespace picn
