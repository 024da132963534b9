#pragma once

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "picn/io.hpp"
#include "picn/model.hpp"
#include "picn/problem.hpp"
#include "picn/training_config.hpp"

namespace picn {

/// User-facing run settings: everything optional so that flag > file >
/// builtin-default precedence can be resolved after both sources are read.
struct RunConfig {
  std::string problem;
  ProblemParams params;
  std::optional<std::string> activation;
  std::optional<double> learning_rate;
  std::optional<int> epochs;
  std::optional<double> ratio_g, ratio_r;  // loss weight ratio a:b
  std::optional<double> k_obs;
  std::optional<std::uint64_t> seed;
  std::optional<int> log_every;
  std::optional<double> noise_std;
  std::optional<std::uint64_t> noise_seed;
  std::optional<std::string> out_dir;
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline double parse_double(const std::string& key, const std::string& value) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + value + "'");
  }
  if (pos != value.size())
    throw std::invalid_argument("config: " + key + " expects a number, got '" + value + "'");
  return v;
}

inline long long parse_int(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  const long long i = static_cast<long long>(v);
  if (static_cast<double>(i) != v)
    throw std::invalid_argument("config: " + key + " expects an integer, got '" + value + "'");
  return i;
}

inline void parse_ratio(const std::string& key, const std::string& value, RunConfig& rc) {
  const size_t colon = value.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("config: " + key + " expects a ratio a:b, got '" + value + "'");
  rc.ratio_g = parse_double(key, trim(value.substr(0, colon)));
  rc.ratio_r = parse_double(key, trim(value.substr(colon + 1)));
}

inline void apply_key(RunConfig& rc, const std::string& section, const std::string& key,
                      const std::string& value) {
  const std::string path = "[" + section + "]." + key;
  if (section == "run") {
    if (key == "problem")
      rc.problem = value;
    else if (key == "out_dir")
      rc.out_dir = value;
    else if (key == "activation")
      rc.activation = value;
    else
      throw std::invalid_argument("config: unknown key " + path);
  } else if (section == "problem") {
    rc.params[key] = parse_double(path, value);
  } else if (section == "training") {
    if (key == "learning_rate")
      rc.learning_rate = parse_double(path, value);
    else if (key == "epochs")
      rc.epochs = static_cast<int>(parse_int(path, value));
    else if (key == "weights")
      parse_ratio(path, value, rc);
    else if (key == "k_obs")
      rc.k_obs = parse_double(path, value);
    else if (key == "seed")
      rc.seed = static_cast<std::uint64_t>(parse_int(path, value));
    else if (key == "log_every")
      rc.log_every = static_cast<int>(parse_int(path, value));
    else
      throw std::invalid_argument("config: unknown key " + path);
  } else if (section == "noise") {
    if (key == "std")
      rc.noise_std = parse_double(path, value);
    else if (key == "seed")
      rc.noise_seed = static_cast<std::uint64_t>(parse_int(path, value));
    else
      throw std::invalid_argument("config: unknown key " + path);
  } else {
    throw std::invalid_argument("config: unknown section [" + section + "]");
  }
}

}  // namespace detail

/// Reads an INI-style file ([section] blocks of key = value, # or ;
/// comments) into `rc`. Unknown sections or keys are rejected by their full
/// [section].key path.
inline void apply_config_file(RunConfig& rc, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot read " + path.string());
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: malformed section at line " +
                                    std::to_string(lineno));
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at line " +
                                  std::to_string(lineno));
    if (section.empty())
      throw std::invalid_argument("config: key outside any [section] at line " +
                                  std::to_string(lineno));
    detail::apply_key(rc, section, detail::trim(line.substr(0, eq)),
                      detail::trim(line.substr(eq + 1)));
  }
}

/// Fully resolved run: a concrete problem + training config + noise + paths.
struct ResolvedRun {
  ProblemDef problem;
  TrainingConfig training;
  double noise_std = 0.0;
  std::uint64_t noise_seed = 7;
  std::string out_dir;
};

/// Applies flag/file overrides onto the problem's builtin defaults and
/// validates the result. Noise defaults are the study's levels: 0 for
/// estimation, 0.4 / 0.3 for the two denoising variants.
inline ResolvedRun resolve_run(const RunConfig& rc) {
  if (rc.problem.empty())
    throw std::invalid_argument("config: no problem selected (use --problem or [run].problem)");
  ResolvedRun r;
  r.problem = get_problem(rc.problem, rc.params);
  if (rc.activation) r.problem.activation = activation_from_name(*rc.activation);
  r.training = r.problem.training;
  if (rc.learning_rate) r.training.learning_rate = *rc.learning_rate;
  if (rc.epochs) r.training.epochs = *rc.epochs;
  if (rc.ratio_g) set_weight_ratio(r.training, *rc.ratio_g, *rc.ratio_r);
  if (rc.k_obs) r.training.k_obs = *rc.k_obs;
  if (rc.seed) r.training.seed = *rc.seed;
  if (rc.log_every) r.training.log_every = *rc.log_every;
  r.training.validate();

  double sigma_default = 0.0;
  if (r.problem.name == "denoise") sigma_default = 0.4;
  if (r.problem.name == "denoise_misspec") sigma_default = 0.3;
  r.noise_std = rc.noise_std.value_or(sigma_default);
  if (r.noise_std < 0.0) throw std::invalid_argument("config: noise std must be >= 0");
  r.noise_seed = rc.noise_seed.value_or(7);

  if (rc.out_dir) {
    r.out_dir = *rc.out_dir;
  } else if (const char* env = std::getenv("PICN_OUT_DIR"); env && *env) {
    r.out_dir = env;
  } else {
    r.out_dir = "out";
  }
  return r;
}

/// Echo of every effective value for the run, INI-shaped so it can be fed
/// back in as a config file.
inline void write_config_echo(const std::filesystem::path& path, const std::string& command,
                              const ResolvedRun& r, const ProblemParams& params) {
  std::ostringstream out;
  out << "# resolved settings for `" << command << "`\n";
  out << "[run]\n";
  out << "problem = " << r.problem.name << "\n";
  out << "out_dir = " << r.out_dir << "\n";
  out << "activation = " << activation_name(r.problem.activation) << "\n";
  if (!params.empty()) {
    out << "\n[problem]\n";
    for (const auto& [k, v] : params) out << k << " = " << io::g17(v) << "\n";
  }
  out << "\n# grid: " << r.problem.grid.nx << " x " << r.problem.grid.ny << " nodes on ["
      << io::g17(r.problem.grid.x_min) << ", " << io::g17(r.problem.grid.x_max) << "] x ["
      << io::g17(r.problem.grid.y_min) << ", " << io::g17(r.problem.grid.y_max) << "]\n";
  out << "\n[training]\n";
  out << "learning_rate = " << io::g17(r.training.learning_rate) << "\n";
  out << "epochs = " << r.training.epochs << "\n";
  out << "weights = " << io::g17(r.training.k_g) << ":" << io::g17(r.training.k_r) << "\n";
  out << "k_obs = " << io::g17(r.training.obs_weight()) << "\n";
  out << "# adam: beta1 = " << io::g17(r.training.beta1) << ", beta2 = "
      << io::g17(r.training.beta2) << ", epsilon = " << io::g17(r.training.epsilon) << "\n";
  out << "seed = " << r.training.seed << "\n";
  out << "log_every = " << r.training.log_every << "\n";
  out << "\n[noise]\n";
  out << "std = " << io::g17(r.noise_std) << "\n";
  out << "seed = " << r.noise_seed << "\n";
  std::ofstream f = io::open_out(path);
  f << out.str();
}

}  // namespace picn
