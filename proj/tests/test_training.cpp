#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <picn/problem.hpp>
#include <picn/training.hpp>

#include "support/oracles.hpp"

using picn::Activation;
using picn::DomainShape;
using picn::FieldTensor;
using picn::GridSpec;
using picn::PicnModel;
using picn::ProblemDef;
using picn::TrainableLambda;
using picn::TrainingConfig;

namespace {

TrainableLambda lambda_of(const ProblemDef& p) {
  TrainableLambda l{p.lambda0, p.lambda_frozen};
  l.frozen.resize(l.values.size(), 0);
  return l;
}

// Pure-diffusion probe whose exact solution x + y is affine: the stencils,
// the interpolation and the delta-kernel identity model are all exact on it,
// so the loss sits at an exact stationary point.
ProblemDef affine_probe() {
  ProblemDef p;
  p.name = "affine_probe";
  p.domain = DomainShape::rectangle(0.0, 1.0, 0.0, 1.0);
  p.grid = GridSpec{0.0, 1.0, 0.0, 1.0, 5, 5};  // dx = 0.25: exactly representable
  p.activation = Activation::Identity;
  p.residual.channels = 1;
  p.residual.n_lambda = 2;
  p.residual.used = picn::quantity_bit(picn::kUxx) | picn::quantity_bit(picn::kUyy);
  p.residual.eval = [](const picn::ResidualPoint& pt, const double* lambda,
                       picn::EquationEval* out) {
    out[0].value = lambda[0] * pt.ch[0].uxx + lambda[1] * pt.ch[0].uyy;
    out[0].d_ch[0].uxx = lambda[0];
    out[0].d_ch[0].uyy = lambda[1];
    out[0].d_lambda[0] = pt.ch[0].uxx;
    out[0].d_lambda[1] = pt.ch[0].uyy;
  };
  p.lambda0 = {1.0, 1.0};
  p.lambda_frozen = {1, 1};
  p.exact = [](double x, double y, int) { return x + y; };
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      p.observations.push_back(picn::Observation{j * 0.25, i * 0.25, j * 0.25 + i * 0.25});
  p.training.epochs = 1;
  return p;
}

PicnModel identity_affine_model(const ProblemDef& p) {
  PicnModel m = picn::init_params(p.hidden_rows(), p.hidden_cols(), 3, 3,
                                  Activation::Identity, 1);
  m.w_o.fill(0.0);
  m.w_o(1, 1) = 1.0;  // delta tap: u_hat(i,j) = hidden(i+1, j+1)
  m.b_o = 0.0;
  m.b_h = 0.0;
  for (int i = 0; i < m.m; ++i)
    for (int j = 0; j < m.n; ++j) {
      const int gi = std::clamp(i - 1, 0, p.grid.ny - 1);
      const int gj = std::clamp(j - 1, 0, p.grid.nx - 1);
      m.w_h(i, j) = p.grid.x(gj) + p.grid.y(gi);
    }
  return m;
}

}  // namespace

TEST_CASE("build_plan: interior collocation, kernels, boundary terms") {
  SECTION("sweep2d: full valid interior") {
    const auto plan = picn::build_plan(picn::get_problem("sweep2d"));
    REQUIRE(plan.interior.size() == (198 - 2) * (118 - 2));
    REQUIRE(plan.margin_x == 1);
    REQUIRE(plan.margin_y == 1);
    REQUIRE(plan.dirichlet.size() == 636);
    REQUIRE(plan.neumann.empty());
  }
  SECTION("sweep1d: 1D margins") {
    const auto plan = picn::build_plan(picn::get_problem("sweep1d"));
    REQUIRE(plan.interior.size() == 996);
    REQUIRE(plan.margin_y == 0);
    REQUIRE(plan.eval_points.size() == 1000);
  }
  SECTION("star: interior restricted to the domain") {
    const auto p = picn::get_problem("star");
    const auto plan = picn::build_plan(p);
    REQUIRE(plan.interior.size() < static_cast<size_t>((p.grid.nx - 2) * (p.grid.ny - 2)));
    REQUIRE(plan.interior.size() > 10000);  // the star fills a fair share of the box
    for (const auto& c : plan.interior) REQUIRE(picn::inside(p.domain, c.x, c.y));
  }
  SECTION("mixed_bvp: Neumann terms force the gradient kernels") {
    const auto plan = picn::build_plan(picn::get_problem("mixed_bvp"));
    REQUIRE_FALSE(plan.neumann.empty());
    REQUIRE((plan.used & picn::quantity_bit(picn::kUx)) != 0);
    REQUIRE((plan.used & picn::quantity_bit(picn::kUy)) != 0);
  }
}

TEST_CASE("analytic gradients match finite differences on every builtin") {
  auto names = picn::builtin_problem_names();
  names.push_back("denoise_misspec");
  for (const auto& name : names) {
    INFO("problem: " << name);
    const auto report = picn::grad_check(picn::get_problem(name));
    for (const auto& issue : report.issues)
      INFO(issue.tensor << "[" << issue.index << "]: analytic " << issue.analytic << " vs fd "
                        << issue.fd << " (rel " << issue.rel_err << ")");
    REQUIRE(report.checked > 0);
    REQUIRE(report.pass);
    REQUIRE(report.max_rel_err < 1e-5);
  }
}

TEST_CASE("verify_gradients flags an injected gradient fault by name") {
  const auto problem = picn::make_reduced(picn::get_problem("sweep2d"));
  const auto cfg = problem.training;
  const auto models = picn::init_problem_models(problem, 5);
  const auto lambda = lambda_of(problem);
  auto analytic = picn::total_gradient(problem, models, lambda, cfg);

  const int center = (analytic.models[0].g_w_h.rows() / 2) * analytic.models[0].g_w_h.cols() +
                     analytic.models[0].g_w_h.cols() / 2;
  analytic.models[0].g_b_o += 0.5;
  analytic.models[0].g_w_h.data()[center] += 0.25;
  const auto report = picn::verify_gradients(problem, models, lambda, analytic, cfg);
  REQUIRE_FALSE(report.pass);
  bool found_b_o = false, found_w_h = false;
  for (const auto& issue : report.issues) {
    found_b_o = found_b_o || issue.tensor == "b_o";
    found_w_h = found_w_h || (issue.tensor == "w_h" && issue.index == center);
  }
  REQUIRE(found_b_o);
  REQUIRE(found_w_h);
}

TEST_CASE("scaling (k_g, k_r) by c scales total loss and gradients by exactly c") {
  for (const char* name : {"mixed_bvp", "aniso_inverse"}) {
    const auto problem = picn::make_reduced(picn::get_problem(name));
    const auto models = picn::init_problem_models(problem, 11);
    const auto lambda = lambda_of(problem);
    TrainingConfig cfg = problem.training;
    cfg.k_g = 0.3;
    cfg.k_r = 0.7;
    cfg.k_obs = -1.0;  // track k_r
    TrainingConfig scaled = cfg;
    const double c = 3.75;  // exactly representable
    scaled.k_g *= c;
    scaled.k_r *= c;

    picn::Engine e1(problem), e2(problem);
    picn::TotalGradient g1, g2;
    const auto L1 = e1.loss_and_gradients(models, lambda, cfg, g1);
    const auto L2 = e2.loss_and_gradients(models, lambda, scaled, g2);

    REQUIRE(std::abs(L2.total - c * L1.total) <= 1e-12 * std::max(1.0, std::abs(c * L1.total)));
    REQUIRE(L2.l_g == L1.l_g);  // unweighted parts unchanged
    auto close = [&](double a, double b) {
      REQUIRE(std::abs(a - c * b) <= 1e-12 * std::max(1.0, std::abs(c * b)));
    };
    for (size_t ch = 0; ch < models.size(); ++ch) {
      for (int i = 0; i < g1.models[ch].g_w_h.size(); ++i)
        close(g2.models[ch].g_w_h.data()[i], g1.models[ch].g_w_h.data()[i]);
      for (int i = 0; i < g1.models[ch].g_w_o.size(); ++i)
        close(g2.models[ch].g_w_o.data()[i], g1.models[ch].g_w_o.data()[i]);
      close(g2.models[ch].g_b_h, g1.models[ch].g_b_h);
      close(g2.models[ch].g_b_o, g1.models[ch].g_b_o);
    }
    for (size_t l = 0; l < g1.lambda.size(); ++l) close(g2.lambda[l], g1.lambda[l]);
  }
}

TEST_CASE("loss at the injected exact solution is dominated by truncation") {
  const auto p = picn::get_problem("sweep1d");
  FieldTensor u(1, p.grid.nx);
  for (int j = 0; j < p.grid.nx; ++j) u(0, j) = p.exact(p.grid.x(j), 0.0, 0);
  picn::Engine engine(p);
  const auto L = engine.loss_injected({u}, TrainableLambda{}, p.training);
  REQUIRE(L.n_omega == 996);
  REQUIRE(L.n_gamma1 == 1);
  REQUIRE(L.l_g < 1e-3);   // second-order stencil truncation only
  REQUIRE(L.l_r1 < 1e-20);  // boundary node is sampled exactly
  REQUIRE(L.l_obs == 0.0);
  REQUIRE(L.total == p.training.k_g * L.l_g + p.training.k_r * (L.l_r1 + L.l_r2) +
                         p.training.obs_weight() * L.l_obs);
}

TEST_CASE("exact stationary point: zero loss and zero gradients") {
  const auto p = affine_probe();
  const std::vector<PicnModel> models{identity_affine_model(p)};
  const auto lambda = lambda_of(p);
  TrainingConfig cfg = p.training;
  cfg.k_g = 0.5;
  cfg.k_r = 0.5;

  picn::Engine engine(p);
  picn::TotalGradient grad;
  const auto L = engine.loss_and_gradients(models, lambda, cfg, grad);
  REQUIRE(L.total == 0.0);
  REQUIRE(L.l_g == 0.0);
  REQUIRE(L.l_obs == 0.0);
  for (int i = 0; i < grad.models[0].g_w_h.size(); ++i)
    REQUIRE(grad.models[0].g_w_h.data()[i] == 0.0);
  for (int i = 0; i < grad.models[0].g_w_o.size(); ++i)
    REQUIRE(grad.models[0].g_w_o.data()[i] == 0.0);
  REQUIRE(grad.models[0].g_b_h == 0.0);
  REQUIRE(grad.models[0].g_b_o == 0.0);
  REQUIRE(grad.lambda[0] == 0.0);
  REQUIRE(grad.lambda[1] == 0.0);
}

TEST_CASE("adam: bias-corrected updates match the closed form") {
  TrainingConfig cfg;
  cfg.learning_rate = 0.1;
  std::vector<double> params{2.0};
  picn::AdamMoments mom;

  const double g1 = 0.4;
  picn::adam_step(params, std::vector<double>{g1}, mom, 1, cfg);
  const double m1 = 0.1 * g1, v1 = 0.001 * g1 * g1;
  const double want1 =
      2.0 - 0.1 * (m1 / (1 - 0.9)) / (std::sqrt(v1 / (1 - 0.999)) + 1e-8);
  REQUIRE(params[0] == Catch::Approx(want1).margin(1e-15));

  const double g2 = -0.2;
  picn::adam_step(params, std::vector<double>{g2}, mom, 2, cfg);
  const double m2 = 0.9 * m1 + 0.1 * g2, v2 = 0.999 * v1 + 0.001 * g2 * g2;
  const double want2 =
      want1 - 0.1 * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
  REQUIRE(params[0] == Catch::Approx(want2).margin(1e-15));
}

TEST_CASE("adam: zero gradient from a fresh state leaves parameters unchanged") {
  TrainingConfig cfg;
  std::vector<double> params{1.0, -2.0, 0.5};
  const auto before = params;
  picn::AdamMoments mom;
  picn::adam_step(params, std::vector<double>{0.0, 0.0, 0.0}, mom, 1, cfg);
  REQUIRE(params == before);
}

TEST_CASE("adam rejects mismatched shapes and bad step indices") {
  TrainingConfig cfg;
  std::vector<double> params{1.0};
  picn::AdamMoments mom;
  REQUIRE_THROWS(picn::adam_step(params, std::vector<double>{1.0, 2.0}, mom, 1, cfg));
  REQUIRE_THROWS(picn::adam_step(params, std::vector<double>{1.0}, mom, 0, cfg));
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
  auto p = picn::get_problem("sweep1d");
  TrainingConfig cfg = p.training;
  cfg.epochs = 40;
  cfg.log_every = 10;
  const auto a = picn::train(p, cfg);
  const auto b = picn::train(p, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t k = 0; k < a.history.size(); ++k) {
    REQUIRE(a.history[k].epoch == b.history[k].epoch);
    REQUIRE(a.history[k].loss.total == b.history[k].loss.total);
  }
  for (int i = 0; i < a.models[0].w_h.size(); ++i)
    REQUIRE(a.models[0].w_h.data()[i] == b.models[0].w_h.data()[i]);
  REQUIRE(a.models[0].b_o == b.models[0].b_o);

  TrainingConfig other = cfg;
  other.seed = cfg.seed + 1;
  const auto c = picn::train(p, other);
  REQUIRE(c.final_loss.total != a.final_loss.total);
}

TEST_CASE("history records epoch 0, every log_every, and the final epoch") {
  auto p = picn::get_problem("sweep1d");
  TrainingConfig cfg = p.training;
  cfg.epochs = 10;
  cfg.log_every = 3;
  const auto r = picn::train(p, cfg);
  std::vector<int> epochs;
  for (const auto& rec : r.history) epochs.push_back(rec.epoch);
  REQUIRE(epochs == std::vector<int>{0, 3, 6, 9, 10});
  for (const auto& rec : r.history) {
    REQUIRE(rec.rel_l2.size() == 1);
    REQUIRE(rec.rel_l2[0] > 0.0);
  }
}

TEST_CASE("invalid configs are rejected") {
  auto p = picn::get_problem("sweep1d");
  TrainingConfig cfg = p.training;
  cfg.epochs = 0;
  REQUIRE_THROWS(picn::train(p, cfg));
  cfg = p.training;
  cfg.learning_rate = -1.0;
  REQUIRE_THROWS(picn::train(p, cfg));
  cfg = p.training;
  cfg.k_g = 0.0;
  cfg.k_r = 0.0;
  REQUIRE_THROWS(picn::train(p, cfg));
}

TEST_CASE("divergence aborts with the epoch in the message") {
  auto p = picn::make_reduced(picn::get_problem("aniso_inverse"));
  TrainingConfig cfg = p.training;
  // Adam caps each step near the learning rate, so the rate must be large
  // enough that squaring the exploded parameters overflows to infinity.
  cfg.learning_rate = 1e200;
  cfg.epochs = 60;
  try {
    picn::train(p, cfg);
    FAIL("expected divergence");
  } catch (const std::runtime_error& e) {
    REQUIRE(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("engine rejects mismatched models and empty interiors") {
  const auto p = picn::get_problem("sweep2d");
  picn::Engine engine(p);
  std::vector<PicnModel> wrong{picn::init_params(5, 5, 3, 3, Activation::Tanh, 1)};
  REQUIRE_THROWS(engine.loss(wrong, TrainableLambda{}, p.training));

  ProblemDef empty = affine_probe();
  empty.domain = DomainShape::polar([](double) { return 0.05; });
  TrainingConfig cfg = empty.training;
  cfg.k_g = 0.5;
  cfg.k_r = 0.5;
  picn::Engine e2(empty);
  const std::vector<PicnModel> models{identity_affine_model(empty)};
  REQUIRE_THROWS_WITH(e2.loss(models, lambda_of(empty), cfg),
                      Catch::Matchers::ContainsSubstring("interior"));
}
