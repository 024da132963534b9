#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "picn/field.hpp"
#include "picn/geometry.hpp"
#include "picn/model.hpp"
#include "picn/problem.hpp"
#include "picn/stencil.hpp"
#include "picn/training_config.hpp"

namespace picn {

/// Composite-loss parts, reported unweighted; total carries the weights:
/// total = k_g * l_g + k_r * (l_r1 + l_r2) + k_obs * l_obs.
struct LossBreakdown {
  double total = 0.0;
  double l_g = 0.0;    // mean squared PDE residual over interior points
  double l_r1 = 0.0;   // mean squared Dirichlet mismatch
  double l_r2 = 0.0;   // mean squared Neumann mismatch
  double l_obs = 0.0;  // mean squared observation mismatch
  int n_omega = 0;
  int n_gamma1 = 0;
  int n_gamma2 = 0;
  int n_obs = 0;
};

/// Trainable operator coefficients with per-entry freeze flags.
struct TrainableLambda {
  std::vector<double> values;
  std::vector<char> frozen;

  bool is_frozen(int i) const { return i < static_cast<int>(frozen.size()) && frozen[i]; }
};

struct TotalGradient {
  std::vector<ModelGradients> models;
  std::vector<double> lambda;
  LossBreakdown loss;
};

namespace detail {

struct CollocationPoint {
  int di = 0, dj = 0;  // index into the derivative-interior fields
  double x = 0.0, y = 0.0;
};

struct DirichletTerm {
  InterpStencil s;
  int channel = 0;
  double target = 0.0;
};

struct NeumannTerm {
  InterpStencil s;  // on the derivative-interior grid
  int channel = 0;
  double target = 0.0;
  double nx = 0.0, ny = 0.0;
};

struct ObservationTerm {
  InterpStencil s;
  double target = 0.0;
};

struct EvalPoint {
  bool node = true;
  int i = 0, j = 0;
  InterpStencil s;
  double x = 0.0, y = 0.0;
};

}  // namespace detail

/// Precomputed geometry- and stencil-level structure for one problem:
/// interior collocation indices, frozen derivative kernels, interpolation
/// stencils for boundary/observation/evaluation points.
struct TrainingPlan {
  GridSpec grid;           // prediction grid
  GridSpec interior_grid;  // coordinate rectangle of the derivative fields
  int margin_x = 1, margin_y = 1;
  unsigned used = 0;  // quantity mask, including u_x/u_y required by Neumann terms
  std::array<StencilKernel, kQuantityCount> kernels{};
  std::vector<detail::CollocationPoint> interior;
  std::vector<detail::DirichletTerm> dirichlet;
  std::vector<detail::NeumannTerm> neumann;
  std::vector<detail::ObservationTerm> observations;
  std::vector<detail::EvalPoint> eval_points;
  std::vector<std::vector<double>> eval_reference;  // [channel][point]
  bool has_reference = false;
};

namespace detail {

inline InterpStencil clamped_stencil(const GridSpec& g, double x, double y) {
  const double xc = std::clamp(x, g.x_min, g.x_max);
  const double yc = g.ny > 1 ? std::clamp(y, g.y_min, g.y_max) : g.y_min;
  return interp_stencil(g, xc, yc);
}

}  // namespace detail

inline TrainingPlan build_plan(const ProblemDef& problem) {
  problem.grid.validate();
  if (!problem.residual.eval)
    throw std::invalid_argument("build_plan: problem has no residual callback");
  if (problem.residual.channels < 1 || problem.residual.channels > kMaxChannels)
    throw std::invalid_argument("build_plan: unsupported channel count");

  TrainingPlan plan;
  plan.grid = problem.grid;
  const bool one_d = problem.grid.one_dimensional();
  plan.margin_x = 1;
  plan.margin_y = one_d ? 0 : 1;

  plan.used = problem.residual.used;
  bool any_neumann = false;
  for (const auto& b : problem.boundary) any_neumann = any_neumann || b.kind == BcKind::Neumann;
  if (any_neumann) plan.used |= quantity_bit(kUx) | quantity_bit(kUy);

  const double dx = problem.grid.dx(), dy = problem.grid.dy();
  for (int q = kUx; q < kQuantityCount; ++q) {
    if (!(plan.used & quantity_bit(q))) continue;
    StencilKernel k;
    switch (q) {
      case kUx: k = derivative_kernel(1, 0, dx, dy); break;
      case kUy: k = derivative_kernel(0, 1, dx, dy); break;
      case kUxx: k = derivative_kernel(2, 0, dx, dy); break;
      case kUyy: k = derivative_kernel(0, 2, dx, dy); break;
      case kUxy: k = derivative_kernel(1, 1, dx, dy); break;
    }
    if (one_d) {
      if (k.coeffs.rows() != 1)
        throw std::invalid_argument(std::string("build_plan: 1D problem cannot use ") +
                                    quantity_name(q));
    } else {
      k = embed_3x3(k);
    }
    plan.kernels[q] = std::move(k);
  }

  plan.interior_grid = problem.grid;
  plan.interior_grid.nx -= 2 * plan.margin_x;
  plan.interior_grid.x_min += plan.margin_x * dx;
  plan.interior_grid.x_max -= plan.margin_x * dx;
  if (!one_d) {
    plan.interior_grid.ny -= 2 * plan.margin_y;
    plan.interior_grid.y_min += plan.margin_y * dy;
    plan.interior_grid.y_max -= plan.margin_y * dy;
  }
  if (plan.interior_grid.nx < 2 || plan.interior_grid.ny < 1)
    throw std::invalid_argument("build_plan: grid too small for the derivative stencils");

  for (int i = 0; i < plan.interior_grid.ny; ++i) {
    for (int j = 0; j < plan.interior_grid.nx; ++j) {
      const double x = plan.interior_grid.x(j);
      const double y = one_d ? problem.grid.y_min : plan.interior_grid.y(i);
      if (!inside(problem.domain, x, y)) continue;
      plan.interior.push_back(detail::CollocationPoint{i, j, x, y});
    }
  }

  for (const auto& b : problem.boundary) {
    if (b.channel < 0 || b.channel >= problem.residual.channels)
      throw std::invalid_argument("build_plan: boundary sample channel out of range");
    if (b.kind == BcKind::Dirichlet) {
      plan.dirichlet.push_back(
          detail::DirichletTerm{detail::clamped_stencil(problem.grid, b.x, b.y), b.channel,
                                b.target});
    } else {
      plan.neumann.push_back(
          detail::NeumannTerm{detail::clamped_stencil(plan.interior_grid, b.x, b.y), b.channel,
                              b.target, b.nx, b.ny});
    }
  }

  for (const auto& o : problem.observations)
    plan.observations.push_back(
        detail::ObservationTerm{detail::clamped_stencil(problem.grid, o.x, o.y), o.value});

  // Evaluation points for the error metric.
  const FieldFn& ref = problem.error_reference();
  plan.has_reference = static_cast<bool>(ref);
  switch (problem.eval.domain) {
    case EvalDomain::GridNodes:
      for (int i = 0; i < problem.grid.ny; ++i)
        for (int j = 0; j < problem.grid.nx; ++j) {
          detail::EvalPoint e;
          e.node = true;
          e.i = i;
          e.j = j;
          e.x = problem.grid.x(j);
          e.y = problem.grid.y(i);
          plan.eval_points.push_back(e);
        }
      break;
    case EvalDomain::InteriorNodes:
      for (const auto& c : plan.interior) {
        detail::EvalPoint e;
        e.node = true;
        e.i = c.di + plan.margin_y;
        e.j = c.dj + plan.margin_x;
        e.x = c.x;
        e.y = c.y;
        plan.eval_points.push_back(e);
      }
      break;
    case EvalDomain::Uniform1D: {
      if (!one_d) throw std::invalid_argument("build_plan: Uniform1D eval needs a 1D grid");
      const int n = std::max(2, problem.eval.count);
      for (int k = 0; k < n; ++k) {
        detail::EvalPoint e;
        e.node = false;
        e.x = problem.grid.x_min + (problem.grid.x_max - problem.grid.x_min) * k / (n - 1);
        e.y = problem.grid.y_min;
        e.s = detail::clamped_stencil(problem.grid, e.x, e.y);
        plan.eval_points.push_back(e);
      }
      break;
    }
  }
  if (plan.has_reference) {
    plan.eval_reference.resize(problem.residual.channels);
    for (int c = 0; c < problem.residual.channels; ++c) {
      plan.eval_reference[c].reserve(plan.eval_points.size());
      for (const auto& e : plan.eval_points) plan.eval_reference[c].push_back(ref(e.x, e.y, c));
    }
  }
  return plan;
}

/// Evaluates the composite loss and its exact gradients for one problem.
/// All scratch fields are owned here and reused across epochs, so a full
/// training run performs no per-epoch allocation.
class Engine {
 public:
  explicit Engine(const ProblemDef& problem) : problem_(problem), plan_(build_plan(problem)) {
    const int c = problem_.residual.channels;
    fwd_.resize(c);
    dl_du_.resize(c);
    const int iy = plan_.interior_grid.ny, ix = plan_.interior_grid.nx;
    deriv_.resize(c);
    adj_.resize(c);
    for (int ch = 0; ch < c; ++ch) {
      dl_du_[ch] = FieldTensor(plan_.grid.ny, plan_.grid.nx);
      for (int q = kUx; q < kQuantityCount; ++q) {
        if (!(plan_.used & quantity_bit(q))) continue;
        deriv_[ch][q] = FieldTensor(iy, ix);
        adj_[ch][q] = FieldTensor(iy, ix);
      }
    }
  }

  const TrainingPlan& plan() const { return plan_; }
  const ProblemDef& problem() const { return problem_; }

  LossBreakdown loss(const std::vector<PicnModel>& models, const TrainableLambda& lambda,
                     const TrainingConfig& cfg) {
    return evaluate(&models, nullptr, lambda, cfg, nullptr);
  }

  LossBreakdown loss_injected(const std::vector<FieldTensor>& u_hat,
                              const TrainableLambda& lambda, const TrainingConfig& cfg) {
    return evaluate(nullptr, &u_hat, lambda, cfg, nullptr);
  }

  LossBreakdown loss_and_gradients(const std::vector<PicnModel>& models,
                                   const TrainableLambda& lambda, const TrainingConfig& cfg,
                                   TotalGradient& grad) {
    return evaluate(&models, nullptr, lambda, cfg, &grad);
  }

  /// Prediction fields from the most recent model-based evaluation.
  const FieldTensor& u_hat(int channel) const { return fwd_[channel].u_hat; }

  /// Relative L2 error per channel on the evaluation points (absolute L2 when
  /// the reference norm vanishes).
  std::vector<double> eval_errors(const std::vector<const FieldTensor*>& fields) const {
    std::vector<double> out;
    if (!plan_.has_reference) return out;
    for (size_t c = 0; c < fields.size(); ++c) {
      double num = 0.0, den = 0.0;
      for (size_t k = 0; k < plan_.eval_points.size(); ++k) {
        const auto& e = plan_.eval_points[k];
        const double v = e.node ? (*fields[c])(e.i, e.j) : interp_apply(*fields[c], e.s);
        const double r = plan_.eval_reference[c][k];
        num += (v - r) * (v - r);
        den += r * r;
      }
      out.push_back(den > 0.0 ? std::sqrt(num / den) : std::sqrt(num));
    }
    return out;
  }

  std::vector<double> last_errors() const {
    std::vector<const FieldTensor*> fields;
    for (const auto& f : fwd_) fields.push_back(&f.u_hat);
    return eval_errors(fields);
  }

 private:
  LossBreakdown evaluate(const std::vector<PicnModel>* models,
                         const std::vector<FieldTensor>* injected, const TrainableLambda& lambda,
                         const TrainingConfig& cfg, TotalGradient* grad) {
    const int channels = problem_.residual.channels;
    const double k_g = cfg.k_g, k_r = cfg.k_r, k_obs = cfg.obs_weight();
    if (plan_.interior.empty() && k_g > 0.0)
      throw std::invalid_argument("loss: empty interior collocation set with k_g > 0");
    if (static_cast<int>(lambda.values.size()) < problem_.residual.n_lambda)
      throw std::invalid_argument("loss: too few operator coefficients");

    const FieldTensor* u[kMaxChannels] = {nullptr, nullptr};
    if (models) {
      if (static_cast<int>(models->size()) != channels)
        throw std::invalid_argument("loss: model count != channel count");
      for (int c = 0; c < channels; ++c) {
        const PicnModel& m = (*models)[c];
        if (m.out_rows() != plan_.grid.ny || m.out_cols() != plan_.grid.nx)
          throw std::invalid_argument("loss: model output does not cover the grid");
        forward_into(m, fwd_[c]);
        u[c] = &fwd_[c].u_hat;
      }
    } else {
      if (static_cast<int>(injected->size()) != channels)
        throw std::invalid_argument("loss: field count != channel count");
      for (int c = 0; c < channels; ++c) {
        if ((*injected)[c].rows() != plan_.grid.ny || (*injected)[c].cols() != plan_.grid.nx)
          throw std::invalid_argument("loss: injected field does not cover the grid");
        u[c] = &(*injected)[c];
      }
    }

    for (int c = 0; c < channels; ++c)
      for (int q = kUx; q < kQuantityCount; ++q)
        if (plan_.used & quantity_bit(q))
          detail::correlate_valid(*u[c], plan_.kernels[q].coeffs, deriv_[c][q]);

    const bool with_grad = grad != nullptr;
    if (with_grad) {
      if (static_cast<int>(grad->models.size()) != channels) grad->models.resize(channels);
      grad->lambda.assign(lambda.values.size(), 0.0);
      for (int c = 0; c < channels; ++c) {
        dl_du_[c].fill(0.0);
        for (int q = kUx; q < kQuantityCount; ++q)
          if (plan_.used & quantity_bit(q)) adj_[c][q].fill(0.0);
      }
    }

    LossBreakdown L;
    L.n_omega = static_cast<int>(plan_.interior.size());
    L.n_gamma1 = static_cast<int>(plan_.dirichlet.size());
    L.n_gamma2 = static_cast<int>(plan_.neumann.size());
    L.n_obs = static_cast<int>(plan_.observations.size());

    // Governing residual over the interior collocation points.
    const ResidualSpec& spec = problem_.residual;
    const int my = plan_.margin_y, mx = plan_.margin_x;
    if (!plan_.interior.empty()) {
      double sum = 0.0;
      ResidualPoint rp;
      EquationEval eq[kMaxEquations];
      const double gscale = k_g * 2.0 / static_cast<double>(plan_.interior.size());
      for (const auto& pt : plan_.interior) {
        rp.x = pt.x;
        rp.y = pt.y;
        for (int c = 0; c < channels; ++c) {
          if (spec.used & quantity_bit(kU)) rp.ch[c].u = (*u[c])(pt.di + my, pt.dj + mx);
          for (int q = kUx; q < kQuantityCount; ++q)
            if (spec.used & quantity_bit(q)) rp.ch[c].by(q) = deriv_[c][q](pt.di, pt.dj);
        }
        for (int e = 0; e < spec.equations; ++e) eq[e] = EquationEval{};
        spec.eval(rp, lambda.values.data(), eq);
        for (int e = 0; e < spec.equations; ++e) {
          sum += eq[e].value * eq[e].value;
          if (!with_grad) continue;
          const double gw = gscale * eq[e].value;
          if (gw == 0.0) continue;
          for (int c = 0; c < channels; ++c) {
            if (spec.used & quantity_bit(kU))
              dl_du_[c](pt.di + my, pt.dj + mx) += gw * eq[e].d_ch[c].u;
            for (int q = kUx; q < kQuantityCount; ++q)
              if (spec.used & quantity_bit(q)) adj_[c][q](pt.di, pt.dj) += gw * eq[e].d_ch[c].by(q);
          }
          for (int l = 0; l < spec.n_lambda; ++l) grad->lambda[l] += gw * eq[e].d_lambda[l];
        }
      }
      L.l_g = sum / static_cast<double>(plan_.interior.size());
    }

    // Dirichlet mismatch.
    if (!plan_.dirichlet.empty()) {
      double sum = 0.0;
      const double scale = k_r * 2.0 / static_cast<double>(plan_.dirichlet.size());
      for (const auto& t : plan_.dirichlet) {
        const double d = interp_apply(*u[t.channel], t.s) - t.target;
        sum += d * d;
        if (with_grad) interp_scatter(dl_du_[t.channel], t.s, scale * d);
      }
      L.l_r1 = sum / static_cast<double>(plan_.dirichlet.size());
    }

    // Neumann mismatch: grad(u).n from the interpolated derivative fields.
    if (!plan_.neumann.empty()) {
      double sum = 0.0;
      const double scale = k_r * 2.0 / static_cast<double>(plan_.neumann.size());
      for (const auto& t : plan_.neumann) {
        const double gx = interp_apply(deriv_[t.channel][kUx], t.s);
        const double gy =
            plan_.grid.one_dimensional() ? 0.0 : interp_apply(deriv_[t.channel][kUy], t.s);
        const double d = gx * t.nx + gy * t.ny - t.target;
        sum += d * d;
        if (with_grad) {
          interp_scatter(adj_[t.channel][kUx], t.s, scale * d * t.nx);
          if (!plan_.grid.one_dimensional())
            interp_scatter(adj_[t.channel][kUy], t.s, scale * d * t.ny);
        }
      }
      L.l_r2 = sum / static_cast<double>(plan_.neumann.size());
    }

    // Observation mismatch (channel 0).
    if (!plan_.observations.empty()) {
      double sum = 0.0;
      const double scale = k_obs * 2.0 / static_cast<double>(plan_.observations.size());
      for (const auto& t : plan_.observations) {
        const double d = interp_apply(*u[0], t.s) - t.target;
        sum += d * d;
        if (with_grad) interp_scatter(dl_du_[0], t.s, scale * d);
      }
      L.l_obs = sum / static_cast<double>(plan_.observations.size());
    }

    L.total = k_g * L.l_g + k_r * (L.l_r1 + L.l_r2) + k_obs * L.l_obs;

    if (with_grad) {
      for (int c = 0; c < channels; ++c) {
        for (int q = kUx; q < kQuantityCount; ++q)
          if (plan_.used & quantity_bit(q))
            detail::correlate_valid_transpose_add(adj_[c][q], plan_.kernels[q].coeffs, dl_du_[c]);
        backward_into((*models)[c], fwd_[c], dl_du_[c], grad->models[c]);
      }
      grad->loss = L;
    }
    return L;
  }

  ProblemDef problem_;
  TrainingPlan plan_;
  std::vector<ForwardPass> fwd_;
  std::vector<std::array<FieldTensor, kQuantityCount>> deriv_;
  std::vector<std::array<FieldTensor, kQuantityCount>> adj_;
  std::vector<FieldTensor> dl_du_;
};

/// Composite loss at the given parameters (weights read from `cfg`).
inline LossBreakdown assemble_loss(const ProblemDef& problem,
                                   const std::vector<PicnModel>& models,
                                   const TrainableLambda& lambda, const TrainingConfig& cfg) {
  Engine engine(problem);
  return engine.loss(models, lambda, cfg);
}

/// Composite loss for caller-supplied prediction fields (bypasses the
/// generator; used to probe the loss at a known field such as the exact
/// solution sampled on the grid).
inline LossBreakdown assemble_loss(const ProblemDef& problem,
                                   const std::vector<FieldTensor>& u_hat,
                                   const TrainableLambda& lambda, const TrainingConfig& cfg) {
  Engine engine(problem);
  return engine.loss_injected(u_hat, lambda, cfg);
}

inline TotalGradient total_gradient(const ProblemDef& problem,
                                    const std::vector<PicnModel>& models,
                                    const TrainableLambda& lambda, const TrainingConfig& cfg) {
  Engine engine(problem);
  TotalGradient g;
  engine.loss_and_gradients(models, lambda, cfg, g);
  return g;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// First/second-moment state for one parameter tensor.
struct AdamMoments {
  std::vector<double> m, v;

  void ensure(size_t n) {
    if (m.size() != n) {
      m.assign(n, 0.0);
      v.assign(n, 0.0);
    }
  }
};

/// One Adam update with bias correction; `t` is the 1-based step index.
inline void adam_step(std::span<double> params, std::span<const double> grads,
                      AdamMoments& moments, int t, const TrainingConfig& cfg) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: parameter/gradient size mismatch");
  if (t < 1) throw std::invalid_argument("adam_step: step index must be >= 1");
  moments.ensure(params.size());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * g;
    moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = moments.m[i] / c1;
    const double vhat = moments.v[i] / c2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

/// Full Adam state for a model set plus operator coefficients.
struct AdamState {
  // per channel: w_h, b_h, w_o, b_o
  std::vector<std::array<AdamMoments, 4>> model_moments;
  AdamMoments lambda_moments;
  int t = 0;
};

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  LossBreakdown loss;
  std::vector<double> rel_l2;  // per channel; empty without a reference field
  std::vector<double> lambda;
};

struct TrainCallbacks {
  std::function<void(const EpochRecord&)> on_log;
  std::function<void(int epoch, const std::vector<FieldTensor>&)> on_snapshot;
};

struct TrainResult {
  std::vector<PicnModel> models;
  TrainableLambda lambda;
  std::vector<EpochRecord> history;
  std::vector<FieldTensor> u_hat;  // final prediction on the grid, per channel
  LossBreakdown final_loss;
};

inline std::vector<PicnModel> init_problem_models(const ProblemDef& problem,
                                                  std::uint64_t seed) {
  std::vector<PicnModel> models;
  for (int c = 0; c < problem.residual.channels; ++c)
    models.push_back(init_params(problem.hidden_rows(), problem.hidden_cols(), problem.kernel_p,
                                 problem.kernel_q, problem.activation, seed + c));
  return models;
}

/// Deterministic full-batch Adam training. The history records epoch 0 (the
/// untrained state), every log_every-th epoch, and the final state.
inline TrainResult train(const ProblemDef& problem, const TrainingConfig& cfg,
                         const TrainCallbacks& callbacks = {}) {
  cfg.validate();
  Engine engine(problem);
  TrainResult result;
  result.models = init_problem_models(problem, cfg.seed);
  result.lambda.values = problem.lambda0;
  result.lambda.frozen = problem.lambda_frozen;
  result.lambda.frozen.resize(result.lambda.values.size(), 0);
  if (static_cast<int>(result.lambda.values.size()) < problem.residual.n_lambda)
    throw std::invalid_argument("train: problem needs lambda0 for its operator coefficients");

  const int channels = problem.residual.channels;
  AdamState adam;
  adam.model_moments.resize(channels);

  TotalGradient grad;
  std::vector<double> lambda_view, lambda_grad_view;
  auto record = [&](int epoch, const LossBreakdown& L) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = L;
    rec.rel_l2 = engine.last_errors();
    rec.lambda = result.lambda.values;
    result.history.push_back(rec);
    if (callbacks.on_log) callbacks.on_log(rec);
    if (callbacks.on_snapshot) {
      std::vector<FieldTensor> fields;
      for (int c = 0; c < channels; ++c) fields.push_back(engine.u_hat(c));
      callbacks.on_snapshot(epoch, fields);
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const LossBreakdown L = engine.loss_and_gradients(result.models, result.lambda, cfg, grad);
    if (!std::isfinite(L.total))
      throw std::runtime_error("train: diverged at epoch " + std::to_string(epoch) +
                               " (non-finite loss)");
    if (epoch % cfg.log_every == 0) record(epoch, L);

    adam.t += 1;
    for (int c = 0; c < channels; ++c) {
      PicnModel& m = result.models[c];
      ModelGradients& g = grad.models[c];
      adam_step(m.w_h.values(), g.g_w_h.values(), adam.model_moments[c][0], adam.t, cfg);
      adam_step(std::span<double>(&m.b_h, 1), std::span<const double>(&g.g_b_h, 1),
                adam.model_moments[c][1], adam.t, cfg);
      adam_step(m.w_o.values(), g.g_w_o.values(), adam.model_moments[c][2], adam.t, cfg);
      adam_step(std::span<double>(&m.b_o, 1), std::span<const double>(&g.g_b_o, 1),
                adam.model_moments[c][3], adam.t, cfg);
    }
    if (!result.lambda.values.empty()) {
      // Frozen coefficients keep a zeroed gradient so their moments stay zero.
      lambda_view = result.lambda.values;
      lambda_grad_view = grad.lambda;
      lambda_grad_view.resize(lambda_view.size(), 0.0);
      for (size_t i = 0; i < lambda_view.size(); ++i)
        if (result.lambda.is_frozen(static_cast<int>(i))) lambda_grad_view[i] = 0.0;
      adam_step(lambda_view, lambda_grad_view, adam.lambda_moments, adam.t, cfg);
      for (size_t i = 0; i < lambda_view.size(); ++i)
        if (!result.lambda.is_frozen(static_cast<int>(i)))
          result.lambda.values[i] = lambda_view[i];
    }
  }

  result.final_loss = engine.loss(result.models, result.lambda, cfg);
  if (!std::isfinite(result.final_loss.total))
    throw std::runtime_error("train: diverged at epoch " + std::to_string(cfg.epochs) +
                             " (non-finite loss)");
  record(cfg.epochs, result.final_loss);
  for (int c = 0; c < channels; ++c) result.u_hat.push_back(engine.u_hat(c));
  return result;
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

struct GradCheckIssue {
  std::string tensor;
  int index = 0;
  double analytic = 0.0, fd = 0.0, rel_err = 0.0;
};

struct GradCheckReport {
  bool pass = true;
  double max_rel_err = 0.0;
  int checked = 0;
  int skipped = 0;  // components below the finite-difference resolution floor
  double tolerance = 0.0;
  double fd_floor = 0.0;
  std::vector<GradCheckIssue> issues;  // components that exceeded the tolerance
};

/// Compare a caller-supplied analytic gradient against central finite
/// differences of the composite loss, component by component.
///
/// A central difference of a loss of magnitude L cannot resolve slopes below
/// a few ulps of L divided by the step, so components whose magnitude or
/// whose disagreement sits under that floor are accepted as agreeing within
/// the measurement's precision (the analytic side is the more accurate one).
inline GradCheckReport verify_gradients(const ProblemDef& problem,
                                        const std::vector<PicnModel>& models,
                                        const TrainableLambda& lambda,
                                        const TotalGradient& analytic, const TrainingConfig& cfg,
                                        double tolerance = 1e-5, double fd_step = 1e-6) {
  Engine engine(problem);
  GradCheckReport report;
  report.tolerance = tolerance;
  std::vector<PicnModel> work = models;
  TrainableLambda wl = lambda;

  const double base = std::abs(engine.loss(work, wl, cfg).total);
  const double eps = std::numeric_limits<double>::epsilon();
  const double floor = std::max(1e-8, 4.0 * eps * std::max(1.0, base) / fd_step);
  report.fd_floor = floor;

  auto probe = [&](double* slot) {
    const double saved = *slot;
    *slot = saved + fd_step;
    const double up = engine.loss(work, wl, cfg).total;
    *slot = saved - fd_step;
    const double down = engine.loss(work, wl, cfg).total;
    *slot = saved;
    return (up - down) / (2.0 * fd_step);
  };
  auto check = [&](const std::string& tensor, int index, double* slot, double a) {
    const double fd = probe(slot);
    const double denom = std::max(std::abs(a), std::abs(fd));
    if (denom <= floor) {
      report.skipped += 1;
      return;
    }
    report.checked += 1;
    const double err = std::abs(a - fd);
    if (err <= floor) return;  // agreement within the difference quotient's resolution
    const double rel = err / denom;
    report.max_rel_err = std::max(report.max_rel_err, rel);
    if (rel >= tolerance) {
      report.pass = false;
      report.issues.push_back(GradCheckIssue{tensor, index, a, fd, rel});
    }
  };

  for (size_t c = 0; c < work.size(); ++c) {
    const std::string suffix = work.size() > 1 ? "[" + std::to_string(c) + "]" : "";
    PicnModel& m = work[c];
    const ModelGradients& g = analytic.models[c];
    for (int i = 0; i < m.w_h.size(); ++i)
      check("w_h" + suffix, i, m.w_h.data() + i, g.g_w_h.data()[i]);
    check("b_h" + suffix, 0, &m.b_h, g.g_b_h);
    for (int i = 0; i < m.w_o.size(); ++i)
      check("w_o" + suffix, i, m.w_o.data() + i, g.g_w_o.data()[i]);
    check("b_o" + suffix, 0, &m.b_o, g.g_b_o);
  }
  for (size_t l = 0; l < wl.values.size(); ++l)
    check("lambda", static_cast<int>(l), wl.values.data() + l,
          l < analytic.lambda.size() ? analytic.lambda[l] : 0.0);
  return report;
}

/// End-to-end gradient verification on a reduced copy of the problem.
inline GradCheckReport grad_check(const ProblemDef& problem, double tolerance = 1e-5,
                                  double fd_step = 1e-6) {
  const ProblemDef reduced = make_reduced(problem);
  const TrainingConfig& cfg = reduced.training;
  std::vector<PicnModel> models = init_problem_models(reduced, cfg.seed);
  TrainableLambda lambda{reduced.lambda0, reduced.lambda_frozen};
  lambda.frozen.resize(lambda.values.size(), 0);
  const TotalGradient analytic = total_gradient(reduced, models, lambda, cfg);
  return verify_gradients(reduced, models, lambda, analytic, cfg, tolerance, fd_step);
}

}  // namespace picn
