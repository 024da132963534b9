#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <picn/problem.hpp>

#include "support/oracles.hpp"

using picn::ProblemDef;

namespace {

// Draw points inside the problem domain (uniform over the bounding box with
// rejection for irregular shapes).
std::vector<std::pair<double, double>> interior_points(const ProblemDef& p, int n,
                                                       unsigned seed) {
  std::mt19937 gen(seed);
  const auto box = picn::bounding_box(p.domain);
  std::uniform_real_distribution<double> ux(box.x_min, box.x_max);
  std::uniform_real_distribution<double> uy(box.y_min, box.y_max);
  std::vector<std::pair<double, double>> pts;
  while (static_cast<int>(pts.size()) < n) {
    const double x = ux(gen);
    const double y = p.grid.one_dimensional() ? p.grid.y_min : uy(gen);
    if (picn::inside(p.domain, x, y)) pts.emplace_back(x, y);
  }
  return pts;
}

// The exact solution must zero every residual equation at random interior
// points; derivatives come from the hand-derived test-side bundles.
void check_residual_zero(const ProblemDef& p, const std::vector<oracle::Bundle>& bundles,
                         std::span<const double> lambda, double tol = 1e-8) {
  std::vector<picn::PointBundle> pbs;
  for (auto [x, y] : interior_points(p, 100, 99))
    pbs.push_back(oracle::sample_bundle(bundles, p.residual.used, x, y));
  const auto values = picn::evaluate_residual(p, pbs, lambda);
  for (const auto& vals : values)
    for (int e = 0; e < p.residual.equations; ++e) REQUIRE(std::abs(vals[e]) < tol);
}

}  // namespace

TEST_CASE("builtin catalogue") {
  const auto& names = picn::builtin_problem_names();
  REQUIRE(names == std::vector<std::string>{"sweep1d", "sweep2d", "sine_ode", "mixed_bvp",
                                            "schrodinger", "star", "bird", "starfish",
                                            "aniso_inverse", "denoise"});
  for (const auto& n : names) REQUIRE(picn::get_problem(n).name == n);
  REQUIRE(picn::get_problem("denoise_misspec").name == "denoise_misspec");
}

TEST_CASE("unknown problems are rejected with the builtin list") {
  try {
    picn::get_problem("nosuch");
    FAIL("expected an exception");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("nosuch") != std::string::npos);
    REQUIRE(msg.find("sweep1d") != std::string::npos);
    REQUIRE(msg.find("denoise") != std::string::npos);
  }
}

TEST_CASE("problem parameters") {
  REQUIRE(picn::get_problem("sine_ode", {{"m", 2.0}}).name == "sine_ode");
  REQUIRE_THROWS(picn::get_problem("sine_ode", {{"m", 2.5}}));
  REQUIRE_THROWS(picn::get_problem("sine_ode", {{"k", 1.0}}));
  REQUIRE_THROWS(picn::get_problem("sweep1d", {{"m", 1.0}}));
  REQUIRE_NOTHROW(picn::get_problem("star", {{"k", 2.0}}));
}

TEST_CASE("grid and hidden-field sizes match the study configurations") {
  const auto sweep1d = picn::get_problem("sweep1d");
  REQUIRE(sweep1d.grid.nx == 998);
  REQUIRE(sweep1d.grid.ny == 1);
  REQUIRE(sweep1d.hidden_rows() == 1);
  REQUIRE(sweep1d.hidden_cols() == 1000);

  const auto sweep2d = picn::get_problem("sweep2d");
  REQUIRE(sweep2d.grid.nx == 198);
  REQUIRE(sweep2d.grid.ny == 118);
  REQUIRE(sweep2d.hidden_rows() == 120);
  REQUIRE(sweep2d.hidden_cols() == 200);

  const auto sine = picn::get_problem("sine_ode");
  REQUIRE(sine.hidden_cols() == 200);

  const auto mixed = picn::get_problem("mixed_bvp");
  REQUIRE(mixed.hidden_rows() == 60);
  REQUIRE(mixed.hidden_cols() == 100);

  const auto schr = picn::get_problem("schrodinger");
  REQUIRE(schr.hidden_rows() == 10);
  REQUIRE(schr.hidden_cols() == 10);
  REQUIRE(schr.residual.channels == 2);

  const auto star = picn::get_problem("star");
  REQUIRE(star.grid.nx == 201);
  REQUIRE(star.grid.ny == 201);
  REQUIRE(star.grid.dx() == Catch::Approx(0.02).margin(1e-12));

  // The starfish box is the domain's tight bounding rectangle at 0.02 spacing
  // (the petals are not axis-aligned, so it is narrower than [-1.5, 1.5]^2).
  const auto starfish = picn::get_problem("starfish");
  REQUIRE(starfish.grid.dx() == Catch::Approx(0.02).margin(1e-3));
  REQUIRE(starfish.grid.dy() == Catch::Approx(0.02).margin(1e-3));
  const auto sf_box = picn::bounding_box(starfish.domain);
  REQUIRE(starfish.grid.x_min <= sf_box.x_min + 1e-9);
  REQUIRE(starfish.grid.x_max >= sf_box.x_max - 1e-9);
  REQUIRE(starfish.grid.nx >= 130);
  REQUIRE(starfish.grid.nx <= 151);

  // 18x18 output (20x20 hidden) keeps the trainable parameter count (412)
  // below the observation count (441): the data overdetermine the field,
  // which is what makes the coefficient identifiable.  Observations sit on
  // their own finer 0.05-spaced lattice.
  const auto aniso = picn::get_problem("aniso_inverse");
  REQUIRE(aniso.grid.nx == 18);
  REQUIRE(aniso.grid.ny == 18);
  REQUIRE(aniso.obs_grid.nx == 21);
  REQUIRE(aniso.obs_grid.ny == 21);
  REQUIRE(aniso.obs_grid.dx() == Catch::Approx(0.05).margin(1e-12));
  REQUIRE(aniso.observations.size() == 441);
  REQUIRE(aniso.activation == picn::Activation::Identity);
}

TEST_CASE("exact solutions zero the residuals at random interior points") {
  SECTION("sweep1d") {
    const auto p = picn::get_problem("sweep1d");
    check_residual_zero(p, oracle::bundles("sweep1d"), {});
  }
  SECTION("sweep2d") {
    const auto p = picn::get_problem("sweep2d");
    check_residual_zero(p, oracle::bundles("sweep2d"), {});
  }
  SECTION("sine_ode m=1,2,3") {
    for (double m : {1.0, 2.0, 3.0}) {
      const auto p = picn::get_problem("sine_ode", {{"m", m}});
      check_residual_zero(p, oracle::bundles("sine_ode", m), {});
    }
  }
  SECTION("mixed_bvp") {
    const auto p = picn::get_problem("mixed_bvp");
    check_residual_zero(p, oracle::bundles("mixed_bvp"), {});
  }
  SECTION("schrodinger") {
    const auto p = picn::get_problem("schrodinger");
    check_residual_zero(p, oracle::bundles("schrodinger"), {});
  }
  SECTION("star k=5 and k=2") {
    for (double k : {5.0, 2.0}) {
      const auto p = picn::get_problem("star", {{"k", k}});
      check_residual_zero(p, oracle::bundles("star", k), {});
    }
  }
  SECTION("bird k=5") {
    const auto p = picn::get_problem("bird");
    check_residual_zero(p, oracle::bundles("bird", 5.0), {});
  }
  SECTION("starfish k=5 and k=2") {
    for (double k : {5.0, 2.0}) {
      const auto p = picn::get_problem("starfish", {{"k", k}});
      check_residual_zero(p, oracle::bundles("starfish", k), {});
    }
  }
  SECTION("aniso_inverse at the true coefficients") {
    const auto p = picn::get_problem("aniso_inverse");
    const double lambda[2] = {1.0, 5.0};
    check_residual_zero(p, oracle::bundles("aniso_inverse"), lambda);
  }
  SECTION("denoise (known physics) at its frozen coefficients") {
    const auto p = picn::get_problem("denoise");
    check_residual_zero(p, oracle::bundles("denoise"), p.lambda0);
  }
}

TEST_CASE("exact derivative bundles agree with finite differences") {
  // Guards the bundles themselves: compare each analytic derivative to a
  // finite difference of bundle.u at a few points.
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  for (const char* name : {"sweep2d", "star", "starfish", "aniso_inverse"}) {
    const auto b = oracle::bundles(name, 5.0)[0];
    for (int k = 0; k < 20; ++k) {
      const double x = u(gen), y = u(gen);
      const double h = 1e-5;
      const double fd_x = (b.u(x + h, y) - b.u(x - h, y)) / (2 * h);
      const double fd_y = (b.u(x, y + h) - b.u(x, y - h)) / (2 * h);
      const double fd_xx = (b.u(x + h, y) - 2 * b.u(x, y) + b.u(x - h, y)) / (h * h);
      const double fd_yy = (b.u(x, y + h) - 2 * b.u(x, y) + b.u(x, y - h)) / (h * h);
      REQUIRE(b.ux(x, y) == Catch::Approx(fd_x).margin(1e-6));
      REQUIRE(b.uy(x, y) == Catch::Approx(fd_y).margin(1e-6));
      REQUIRE(b.uxx(x, y) == Catch::Approx(fd_xx).margin(1e-4));
      REQUIRE(b.uyy(x, y) == Catch::Approx(fd_yy).margin(1e-4));
    }
  }
}

TEST_CASE("boundary targets agree with the exact solution") {
  for (const char* name : {"sweep2d", "schrodinger", "star", "bird", "starfish"}) {
    const auto p = picn::get_problem(name);
    REQUIRE_FALSE(p.boundary.empty());
    for (const auto& s : p.boundary) {
      REQUIRE(s.kind == picn::BcKind::Dirichlet);
      REQUIRE(s.target == Catch::Approx(p.exact(s.x, s.y, s.channel)).margin(1e-12));
    }
  }
}

TEST_CASE("mixed_bvp: Neumann targets are the outward normal derivative") {
  const auto p = picn::get_problem("mixed_bvp");
  const auto b = oracle::bundles("mixed_bvp")[0];
  int n_neumann = 0, n_dirichlet = 0;
  for (const auto& s : p.boundary) {
    if (s.kind == picn::BcKind::Neumann) {
      ++n_neumann;
      REQUIRE(s.x == Catch::Approx(0.0).margin(1e-12));  // only the x = 0 edge
      const double want = b.ux(s.x, s.y) * s.nx + b.uy(s.x, s.y) * s.ny;
      REQUIRE(s.target == Catch::Approx(want).margin(1e-10));
    } else {
      ++n_dirichlet;
      REQUIRE(s.target == Catch::Approx(b.u(s.x, s.y)).margin(1e-12));
    }
  }
  REQUIRE(n_neumann > 0);
  REQUIRE(n_dirichlet > 0);
  REQUIRE(n_neumann + n_dirichlet == 320);
}

TEST_CASE("boundary sample counts match the study configurations") {
  REQUIRE(picn::get_problem("sweep2d").boundary.size() == 636);
  REQUIRE(picn::get_problem("schrodinger").boundary.size() == 80);  // 40 sites x 2 channels
  REQUIRE(picn::get_problem("star").boundary.size() == 800);
  REQUIRE(picn::get_problem("bird").boundary.size() == 800);
  REQUIRE(picn::get_problem("starfish").boundary.size() == 800);
}

TEST_CASE("observation problems sample their reference on the grid") {
  for (const char* name : {"aniso_inverse", "denoise", "denoise_misspec"}) {
    const auto p = picn::get_problem(name);
    REQUIRE(p.observations.size() == 441);  // 21 x 21
    const auto& ref = p.error_reference();
    for (const auto& o : p.observations) REQUIRE(o.value == ref(o.x, o.y, 0));
  }
  REQUIRE_FALSE(static_cast<bool>(picn::get_problem("denoise_misspec").exact));
  REQUIRE(static_cast<bool>(picn::get_problem("denoise_misspec").reference));
}

TEST_CASE("evaluate_residual names missing quantities") {
  const auto p = picn::get_problem("sweep2d");
  picn::PointBundle pb;
  pb.x = 1.0;
  pb.y = 1.0;
  pb.provided = picn::quantity_bit(picn::kU);  // residual also reads u_xx, u_yy
  try {
    picn::evaluate_residual(p, std::span<const picn::PointBundle>(&pb, 1), {});
    FAIL("expected an exception");
  } catch (const std::exception& e) {
    REQUIRE(std::string(e.what()).find("u_xx") != std::string::npos);
  }
}

TEST_CASE("make_reduced shrinks every builtin under 500 parameters") {
  for (const auto& name : picn::builtin_problem_names()) {
    const auto full = picn::get_problem(name);
    const auto red = picn::make_reduced(full);
    const int params =
        (red.hidden_rows() * red.hidden_cols() + red.kernel_p * red.kernel_q + 2) *
        red.residual.channels;
    REQUIRE(params <= 500);
    if (red.grid.one_dimensional()) {
      REQUIRE(red.hidden_cols() <= 30);
    } else {
      REQUIRE(red.hidden_rows() <= 8);
      REQUIRE(red.hidden_cols() <= 8);
    }
    REQUIRE(red.boundary.size() <= 24);  // <= 12 sites, possibly 2 channels
    REQUIRE(red.observations.size() <= 25);
    REQUIRE(red.grid.x_min == full.grid.x_min);
    REQUIRE(red.grid.x_max == full.grid.x_max);
  }
}
