// sievelab: experiment runner for the sieve-prior sequence-model laboratory.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "sievelab/errors.hpp"

namespace fs = std::filesystem;
using sievelab::cli::CommandResult;
using sievelab::cli::ConfigError;

namespace {

int emit(const CommandResult& result, const std::string& out_dir) {
  if (out_dir.empty()) {
    bool first = true;
    for (const auto& [name, content] : result.files) {
      if (!first) std::cout << '\n';
      std::cout << content;
      first = false;
    }
  } else {
    fs::create_directories(out_dir);
    for (const auto& [name, content] : result.files) {
      std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
      f << content;
      if (!f) {
        std::cerr << "error: cannot write " << (fs::path(out_dir) / name) << '\n';
        return 1;
      }
    }
  }
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sieve-prior posterior laboratory for the Gaussian sequence model"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed")->expected(1);
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--out", out_dir, "Output directory (default: stdout)");
  app.add_option("--threads", threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  app.fallthrough();

  auto* posterior = app.add_subcommand("posterior", "Exact posterior for one dataset");
  auto* sweep = app.add_subcommand("risk-sweep", "Monte Carlo risk and contraction over a (beta, n) grid");
  auto* penalty = app.add_subcommand("penalty-curve", "Pointwise penalty exponent over beta");
  auto* audit = app.add_subcommand("audit", "Condition audits");
  auto* rate = app.add_subcommand("rate-fit", "Log-log rate fits of a risk-sweep table");
  std::string input, column = "freq_risk", abscissa = "log-n-over-log-n";
  bool check = false;
  rate->add_option("--input", input, "risk-sweep CSV")->required();
  rate->add_option("--column", column, "Risk column to fit");
  rate->add_option("--abscissa", abscissa, "log-n | log-n-over-log-n");
  rate->add_flag("--check", check, "Exit 4 unless slopes meet the acceptance tolerances");

  CLI11_PARSE(app, argc, argv);

  sievelab::cli::GlobalOptions opts;
  if (seed_opt->count() > 0) opts.seed = seed;
  opts.threads = threads;

  try {
    nlohmann::json config = nlohmann::json::object();
    if (!config_path.empty()) config = sievelab::cli::load_config_file(config_path);
    CommandResult result;
    if (posterior->parsed()) {
      result = sievelab::cli::cmd_posterior(config, opts);
    } else if (sweep->parsed()) {
      result = sievelab::cli::cmd_risk_sweep(config, opts);
    } else if (penalty->parsed()) {
      result = sievelab::cli::cmd_penalty_curve(config, opts);
    } else if (audit->parsed()) {
      result = sievelab::cli::cmd_audit(config, opts);
    } else {
      std::ifstream in(input);
      if (!in) throw ConfigError("cannot open input '" + input + "'");
      std::ostringstream ss;
      ss << in.rdbuf();
      result = sievelab::cli::cmd_rate_fit(ss.str(), column, abscissa, check);
    }
    return emit(result, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return sievelab::cli::kConfigError;
  } catch (const sievelab::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return sievelab::cli::kConfigError;
  }
}
