#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "picn/analysis.hpp"
#include "picn/config.hpp"
#include "picn/io.hpp"
#include "picn/training.hpp"

namespace picn {
namespace app {

namespace fs = std::filesystem;

inline std::string channel_file(const std::string& stem, int channel, const std::string& ext) {
  return channel == 0 ? stem + ext : stem + "_ch" + std::to_string(channel) + ext;
}

/// Reference field sampled on the prediction grid (channel 0), for spectra.
inline FieldTensor reference_on_grid(const ProblemDef& problem) {
  const FieldFn& ref = problem.error_reference();
  FieldTensor f(problem.grid.ny, problem.grid.nx);
  for (int i = 0; i < problem.grid.ny; ++i)
    for (int j = 0; j < problem.grid.nx; ++j)
      f(i, j) = ref(problem.grid.x(j), problem.grid.y(i), 0);
  return f;
}

inline void write_model_set(const fs::path& dir, const std::vector<PicnModel>& models) {
  for (size_t c = 0; c < models.size(); ++c)
    save_model(models[c], (dir / channel_file("model", static_cast<int>(c), ".ckpt")).string());
}

inline void write_field_set(const fs::path& dir, const ProblemDef& problem,
                            const std::vector<FieldTensor>& fields) {
  for (size_t c = 0; c < fields.size(); ++c)
    io::write_field_csv(dir / channel_file("field", static_cast<int>(c), ".csv"), problem.grid,
                        fields[c], problem.error_reference(), static_cast<int>(c));
}

inline double worst_rel_l2(const TrainResult& res) {
  double worst = 0.0;
  if (!res.history.empty())
    for (double e : res.history.back().rel_l2) worst = std::max(worst, e);
  return worst;
}

inline int do_solve(const std::string& command, const ResolvedRun& r,
                    const ProblemParams& params, bool with_spectrum_log) {
  const FieldFn& ref = r.problem.error_reference();
  if (with_spectrum_log && !ref) {
    std::cerr << "error: spectrum requires a problem with a reference solution\n";
    return 1;
  }
  FieldTensor ref_field;
  if (ref) ref_field = reference_on_grid(r.problem);

  std::vector<std::pair<int, PowerSpectrum>> spec_log;
  TrainCallbacks cb;
  if (with_spectrum_log)
    cb.on_snapshot = [&](int epoch, const std::vector<FieldTensor>& fields) {
      spec_log.emplace_back(epoch, error_spectrum(fields[0], ref_field, r.problem.grid.dx(),
                                                  r.problem.grid.dy()));
    };

  const TrainResult res = train(r.problem, r.training, cb);

  const fs::path dir = r.out_dir;
  write_config_echo(dir / "run_config.ini", command, r, params);
  io::write_metrics_jsonl(dir / "metrics.jsonl", res.history);
  write_field_set(dir, r.problem, res.u_hat);
  write_model_set(dir, res.models);
  const PowerSpectrum spec =
      ref ? error_spectrum(res.u_hat[0], ref_field, r.problem.grid.dx(), r.problem.grid.dy())
          : power_spectrum(res.u_hat[0], r.problem.grid.dx(), r.problem.grid.dy());
  io::write_spectrum_csv(dir / "spectrum.csv", spec);
  if (with_spectrum_log) io::write_spectrum_log_csv(dir / "spectrum_log.csv", spec_log);

  std::printf("%s: %d epochs, loss %.6g", r.problem.name.c_str(), r.training.epochs,
              res.final_loss.total);
  if (ref) std::printf(", rel_l2 %.6g", worst_rel_l2(res));
  std::printf("\nartifacts in %s\n", r.out_dir.c_str());
  return 0;
}

inline int do_estimate(const ResolvedRun& r, const ProblemParams& params) {
  const EstimateResult er =
      estimate_parameters(r.problem, r.noise_std, r.noise_seed, r.training);

  const fs::path dir = r.out_dir;
  write_config_echo(dir / "run_config.ini", "estimate", r, params);
  io::write_metrics_jsonl(dir / "metrics.jsonl", er.train.history);
  io::write_lambda_history_csv(dir / "lambda_history.csv", er.train.history);
  write_field_set(dir, r.problem, er.train.u_hat);
  write_model_set(dir, er.train.models);

  nlohmann::json report;
  report["problem"] = r.problem.name;
  report["noise_std"] = r.noise_std;
  report["noise_seed"] = r.noise_seed;
  report["lambda"] = er.lambda;
  const double ratio = er.lambda.size() >= 2 && er.lambda[0] != 0.0
                           ? er.lambda[1] / er.lambda[0]
                           : (er.lambda.empty() ? 0.0 : er.lambda[0]);
  report["lambda_ratio"] = ratio;
  report["rel_l2"] = worst_rel_l2(er.train);
  report["epochs"] = r.training.epochs;
  std::ofstream rep = io::open_out(dir / "report.json");
  rep << report.dump(2) << '\n';

  std::printf("%s: noise_std %.6g, lambda_ratio %.8g, rel_l2 %.6g\nartifacts in %s\n",
              r.problem.name.c_str(), r.noise_std, ratio, worst_rel_l2(er.train),
              r.out_dir.c_str());
  return 0;
}

inline int do_denoise(const ResolvedRun& r, const ProblemParams& params) {
  const DenoiseResult dr = denoise(r.problem, r.noise_std, r.noise_seed, r.training);

  const fs::path dir = r.out_dir;
  write_config_echo(dir / "run_config.ini", "denoise", r, params);
  io::write_metrics_jsonl(dir / "metrics.jsonl", dr.train.history);
  write_field_set(dir, r.problem, dr.train.u_hat);
  write_model_set(dir, dr.train.models);
  {
    std::ofstream obs = io::open_out(dir / "observations.csv");
    obs << "x,y,noisy,clean\n";
    for (size_t k = 0; k < dr.obs.points.size(); ++k)
      obs << io::g17(dr.obs.points[k].x) << ',' << io::g17(dr.obs.points[k].y) << ','
          << io::g17(dr.obs.points[k].value) << ',' << io::g17(dr.obs.clean[k]) << '\n';
  }

  nlohmann::json report;
  report["problem"] = r.problem.name;
  report["noise_std"] = r.noise_std;
  report["noise_seed"] = r.noise_seed;
  report["rmse_noisy"] = dr.rmse_noisy;
  report["rmse_recon"] = dr.rmse_recon;
  report["lap_energy_noisy"] = dr.lap_energy_noisy;
  report["lap_energy_recon"] = dr.lap_energy_recon;
  report["lambda"] = dr.train.lambda.values;
  std::ofstream rep = io::open_out(dir / "report.json");
  rep << report.dump(2) << '\n';

  std::printf(
      "%s: noise_std %.6g, rmse noisy %.6g -> recon %.6g, laplacian energy %.6g -> %.6g\n"
      "artifacts in %s\n",
      r.problem.name.c_str(), r.noise_std, dr.rmse_noisy, dr.rmse_recon, dr.lap_energy_noisy,
      dr.lap_energy_recon, r.out_dir.c_str());
  return 0;
}

inline int do_grad_check(const std::string& problem_name, const ProblemParams& params,
                         const std::string& out_dir) {
  std::vector<std::string> names;
  if (problem_name.empty())
    names = builtin_problem_names();
  else
    names.push_back(problem_name);

  bool all_pass = true;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& name : names) {
    const ProblemDef problem = get_problem(name, name == problem_name ? params : ProblemParams{});
    const GradCheckReport rep = grad_check(problem);
    all_pass = all_pass && rep.pass;
    std::printf("%-14s %s  checked %4d  max rel err %.3e\n", name.c_str(),
                rep.pass ? "pass" : "FAIL", rep.checked, rep.max_rel_err);
    for (const auto& issue : rep.issues)
      std::printf("    %s[%d]: analytic %.8e vs fd %.8e (rel %.3e)\n", issue.tensor.c_str(),
                  issue.index, issue.analytic, issue.fd, issue.rel_err);
    entries.push_back({{"problem", name},
                       {"pass", rep.pass},
                       {"checked", rep.checked},
                       {"max_rel_err", rep.max_rel_err}});
  }
  std::ofstream rep = io::open_out(fs::path(out_dir) / "gradcheck.json");
  rep << entries.dump(2) << '\n';
  return all_pass ? 0 : 1;
}

/// Command-line entry point: parses flags/config, dispatches the subcommand,
/// maps any error to a nonzero exit with a message on stderr.
inline int run_cli(int argc, char** argv) {
  CLI::App cli{"physics-informed convolutional PDE solver"};
  cli.require_subcommand(1);

  struct FlagVals {
    std::string config, problem, activation, out_dir, weights;
    double lr = 0, k_obs = 0, noise_std = 0, m = 0, k = 0;
    long long epochs = 0, seed = 0, log_every = 0, noise_seed = 0;
  } fv;

  auto add_common = [&](CLI::App* cmd, bool with_noise) {
    cmd->add_option("--config", fv.config, "INI config file");
    cmd->add_option("--problem", fv.problem, "builtin problem name (see list-problems)");
    cmd->add_option("--m", fv.m, "problem parameter m (sine_ode)");
    cmd->add_option("--k", fv.k, "problem parameter k (star, bird, starfish)");
    cmd->add_option("--activation", fv.activation, "tanh | identity | sine");
    cmd->add_option("--lr", fv.lr, "learning rate");
    cmd->add_option("--epochs", fv.epochs, "training epochs");
    cmd->add_option("--weights", fv.weights, "loss weight ratio k_g:k_r, e.g. 9:1");
    cmd->add_option("--k-obs", fv.k_obs, "observation loss weight (default: k_r)");
    cmd->add_option("--seed", fv.seed, "parameter init seed");
    cmd->add_option("--log-every", fv.log_every, "epochs between history records");
    cmd->add_option("--out-dir", fv.out_dir, "artifact directory (env PICN_OUT_DIR)");
    if (with_noise) {
      cmd->add_option("--noise-std", fv.noise_std, "observation noise std dev");
      cmd->add_option("--noise-seed", fv.noise_seed, "observation noise seed");
    }
  };

  CLI::App* solve = cli.add_subcommand("solve", "train a forward solution");
  CLI::App* estimate = cli.add_subcommand("estimate", "fit operator coefficients to noisy data");
  CLI::App* denoise_cmd = cli.add_subcommand("denoise", "physics-regularized denoising");
  CLI::App* spectrum = cli.add_subcommand("spectrum", "solve with an epoch-indexed spectrum log");
  CLI::App* gradcheck = cli.add_subcommand("grad-check", "finite-difference gradient audit");
  cli.add_subcommand("list-problems", "print builtin problem names");
  add_common(solve, false);
  add_common(estimate, true);
  add_common(denoise_cmd, true);
  add_common(spectrum, false);
  add_common(gradcheck, false);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return cli.exit(e);
  }

  try {
    CLI::App* cmd = cli.get_subcommands().front();
    const std::string command = cmd->get_name();
    if (command == "list-problems") {
      for (const auto& name : builtin_problem_names()) std::printf("%s\n", name.c_str());
      return 0;
    }

    RunConfig rc;
    if (cmd->count("--config")) apply_config_file(rc, fv.config);
    if (cmd->count("--problem")) rc.problem = fv.problem;
    if (cmd->count("--m")) rc.params["m"] = fv.m;
    if (cmd->count("--k")) rc.params["k"] = fv.k;
    if (cmd->count("--activation")) rc.activation = fv.activation;
    if (cmd->count("--lr")) rc.learning_rate = fv.lr;
    if (cmd->count("--epochs")) rc.epochs = static_cast<int>(fv.epochs);
    if (cmd->count("--weights")) detail::parse_ratio("--weights", fv.weights, rc);
    if (cmd->count("--k-obs")) rc.k_obs = fv.k_obs;
    if (cmd->count("--seed")) rc.seed = static_cast<std::uint64_t>(fv.seed);
    if (cmd->count("--log-every")) rc.log_every = static_cast<int>(fv.log_every);
    if (cmd->count("--out-dir")) rc.out_dir = fv.out_dir;
    if (cmd->get_option_no_throw("--noise-std") && cmd->count("--noise-std"))
      rc.noise_std = fv.noise_std;
    if (cmd->get_option_no_throw("--noise-seed") && cmd->count("--noise-seed"))
      rc.noise_seed = static_cast<std::uint64_t>(fv.noise_seed);

    if (command == "grad-check") {
      std::string out_dir = rc.out_dir.value_or("");
      if (out_dir.empty()) {
        const char* env = std::getenv("PICN_OUT_DIR");
        out_dir = env && *env ? env : "out";
      }
      return do_grad_check(rc.problem, rc.params, out_dir);
    }

    if (rc.problem.empty()) {
      if (command == "estimate") rc.problem = "aniso_inverse";
      if (command == "denoise") rc.problem = "denoise";
    }
    const ResolvedRun r = resolve_run(rc);
    if (command == "solve") return do_solve("solve", r, rc.params, false);
    if (command == "spectrum") return do_solve("spectrum", r, rc.params, true);
    if (command == "estimate") return do_estimate(r, rc.params);
    if (command == "denoise") return do_denoise(r, rc.params);
    std::cerr << "error: unknown command " << command << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace app
}  // namespace picn
