// Command line front end: fit real datasets, simulate the built-in designs,
// run coverage studies, and emit region/curve/efficiency grids as CSV.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "canreg/canreg.hpp"

namespace {

using namespace canreg;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream stream(text);
  std::string field;
  while (std::getline(stream, field, ',')) {
    try {
      out.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw ValidationError(what + ": cannot parse '" + field + "'");
    }
  }
  if (out.empty()) throw ValidationError(what + ": empty list");
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& values) {
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<int>(values.size()));
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  return out;
}

struct CommonOptions {
  std::string out_dir = ".";
  double alpha = 0.05;
};

struct FitOptions {
  std::string input;
  std::string model_id = "linear";
  std::string init_text;
  std::optional<double> bandwidth_y;
  std::string bandwidth_x_text;
  std::optional<double> guard;
  bool shared_bandwidth = false;
  bool emit_region = false;
  bool emit_curves = false;
  std::string pair_text = "";
  std::string extent_text = "";
  int region_resolution = 61;
  int curve_points = 101;
};

RestoreOptions restore_options_from(const FitOptions& opt) {
  RestoreOptions restore;
  restore.bandwidth_y = opt.bandwidth_y;
  if (!opt.bandwidth_x_text.empty())
    restore.bandwidth_x = parse_number_list(opt.bandwidth_x_text, "--bandwidth-x");
  restore.guard = opt.guard;
  restore.shared_bandwidth = opt.shared_bandwidth;
  return restore;
}

void write_region_csv(const std::string& path, const RegionGrid& grid) {
  auto out = open_output(path);
  out << "beta_k1,beta_k2,lratio,inside\n";
  for (int i = 0; i < grid.grid1.size(); ++i)
    for (int j = 0; j < grid.grid2.size(); ++j)
      out << format_value(grid.grid1[i]) << ',' << format_value(grid.grid2[j]) << ','
          << format_value(grid.lratio(i, j)) << ',' << grid.inside(i, j) << '\n';
}

void write_wald_region_csv(const std::string& path, const FitResult& fit, const SigmaHat& sigma,
                           const RegionGrid& like, double alpha) {
  auto out = open_output(path);
  out << "beta_k1,beta_k2,statistic,inside\n";
  Eigen::VectorXd beta = fit.beta_hat;
  for (int i = 0; i < like.grid1.size(); ++i) {
    for (int j = 0; j < like.grid2.size(); ++j) {
      beta = fit.beta_hat;
      beta[like.k1] = like.grid1[i];
      beta[like.k2] = like.grid2[j];
      const WaldTest test = wald_region(fit, sigma, beta, alpha);
      out << format_value(like.grid1[i]) << ',' << format_value(like.grid2[j]) << ','
          << format_value(test.statistic) << ',' << (test.inside ? 1 : 0) << '\n';
    }
  }
}

void write_curves(const std::string& dir, const ObservedSample& sample, const DistortionFit& fit,
                  int points) {
  const DistortionCurve curve = distortion_curve(sample, fit, points);
  {
    auto out = open_output(join_path(dir, "curve_psi.csv"));
    out << "u,psi_hat\n";
    for (int i = 0; i < curve.u.size(); ++i)
      out << format_value(curve.u[i]) << ',' << format_value(curve.psi[i]) << '\n';
  }
  for (int r = 0; r < sample.q(); ++r) {
    auto out = open_output(join_path(dir, "curve_phi" + std::to_string(r + 1) + ".csv"));
    out << "u,phi_hat\n";
    for (int i = 0; i < curve.u.size(); ++i)
      out << format_value(curve.u[i]) << ',' << format_value(curve.phi(r, i)) << '\n';
  }
}

struct ResolvedFitConfigText {
  std::vector<std::pair<std::string, std::string>> entries;
  void add(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
};

void echo_config(std::ostream& out, const ResolvedFitConfigText& config) {
  out << "config:\n";
  for (const auto& [key, value] : config.entries) {
    out << "  ";
    out.width(22);
    out << std::left << key << value << '\n';
  }
}

int parse_param_index(const ModelSpec& model, int display_index) {
  for (int k = 0; k < model.p; ++k)
    if (model.param_names[static_cast<std::size_t>(k)] == "beta" + std::to_string(display_index))
      return k;
  throw ValidationError("no parameter named beta" + std::to_string(display_index));
}

int run_fit(const CommonOptions& common, const FitOptions& opt) {
  const ObservedSample sample = read_observed_csv(opt.input);
  const ModelSpec model = builtin_model(opt.model_id, sample.q());
  if (opt.init_text.empty()) throw ValidationError("--init is required for fit");
  FitConfig config;
  config.init = to_vector(parse_number_list(opt.init_text, "--init"));
  if (config.init.size() != model.p)
    throw ValidationError("--init: expected " + std::to_string(model.p) + " values");
  const RestoreOptions restore_options = restore_options_from(opt);

  const PipelineResult run = run_pipeline(model, sample, restore_options, config);
  const DistortionFit& distortion = run.restored.fit;

  ResolvedFitConfigText resolved;
  resolved.add("command", "fit");
  resolved.add("input", opt.input);
  resolved.add("model", model.id);
  resolved.add("n", std::to_string(sample.n()));
  resolved.add("q", std::to_string(sample.q()));
  {
    std::string s;
    for (int k = 0; k < config.init.size(); ++k) s += (k ? "," : "") + format_value(config.init[k]);
    resolved.add("init", s);
  }
  resolved.add("alpha", format_value(common.alpha));
  resolved.add("guard", format_value(distortion.guard));
  resolved.add("shared_bandwidth", opt.shared_bandwidth ? "true" : "false");
  resolved.add("out_dir", common.out_dir);

  std::optional<SigmaHat> sigma;
  std::optional<ELResult> el_at_fit;
  if (run.fit.converged) {
    sigma = sigma_hat(model, run.restored, sample, run.fit);
    el_at_fit = el_ratio(model, run.restored, run.fit.beta_hat);
  }

  {
    auto out = open_output(join_path(common.out_dir, "fit.txt"));
    echo_config(out, resolved);
    out << "\nbandwidths (leave-one-out CV):\n";
    const char* series_names[] = {"y"};
    for (std::size_t s = 0; s < distortion.bandwidths.size(); ++s) {
      const auto& b = distortion.bandwidths[s];
      const std::string name = s == 0 ? series_names[0] : "x" + std::to_string(s);
      out << "  " << name << ": h=" << format_value(b.h) << "  cv=" << format_value(b.criterion_value)
          << "  admissible=[" << format_value(b.admissible_range.lo) << ", "
          << format_value(b.admissible_range.hi) << "]  skipped=" << b.n_skipped << '\n';
    }
    out << "clamped denominators/values: " << distortion.n_clamped << "\n\n";
    out << "fit:\n";
    out << "  converged   " << (run.fit.converged ? "yes" : "no") << '\n';
    out << "  iterations  " << run.fit.iterations << '\n';
    out << "  rss         " << format_value(run.fit.rss) << '\n';
    out << "  sigma2_hat  " << format_value(run.fit.sigma2_hat) << '\n';
    out << "  grad_norm   " << format_value(run.fit.grad_norm) << '\n';
    for (int k = 0; k < model.p; ++k) {
      out << "  " << model.param_names[static_cast<std::size_t>(k)] << "  "
          << format_value(run.fit.beta_hat[k]);
      if (sigma) out << "  (se " << format_value(std::sqrt(sigma->sigma(k, k) / sample.n())) << ")";
      out << '\n';
    }
    if (el_at_fit) out << "  el_ratio_at_fit " << format_value(el_at_fit->lratio) << '\n';
    if (sigma) {
      out << "\nsigma_hat (plug-in covariance of sqrt(n) * error):\n";
      for (int i = 0; i < model.p; ++i) {
        out << " ";
        for (int j = 0; j < model.p; ++j) out << ' ' << format_value(sigma->sigma(i, j));
        out << '\n';
      }
    }
  }
  {
    auto out = open_output(join_path(common.out_dir, "fit.csv"));
    out << "model,n,q,converged,iterations";
    for (int k = 0; k < model.p; ++k) out << ',' << model.param_names[static_cast<std::size_t>(k)];
    out << ",rss,sigma2_hat,grad_norm,bw_y";
    for (int r = 0; r < sample.q(); ++r) out << ",bw_x" << (r + 1);
    out << ",n_clamped,el_ratio_at_fit\n";
    out << model.id << ',' << sample.n() << ',' << sample.q() << ',' << (run.fit.converged ? 1 : 0)
        << ',' << run.fit.iterations;
    for (int k = 0; k < model.p; ++k) out << ',' << format_value(run.fit.beta_hat[k]);
    out << ',' << format_value(run.fit.rss) << ',' << format_value(run.fit.sigma2_hat) << ','
        << format_value(run.fit.grad_norm) << ',' << format_value(distortion.bandwidths[0].h);
    for (int r = 0; r < sample.q(); ++r)
      out << ',' << format_value(distortion.bandwidths[static_cast<std::size_t>(r) + 1].h);
    out << ',' << distortion.n_clamped << ','
        << (el_at_fit ? format_value(el_at_fit->lratio) : "nan") << '\n';
  }

  if (opt.emit_curves) write_curves(common.out_dir, sample, distortion, opt.curve_points);

  if (opt.emit_region) {
    if (!run.fit.converged) throw NumericalError("fit did not converge; no region around it");
    int k1 = 0, k2 = 1;
    if (!opt.pair_text.empty()) {
      const auto pair = parse_number_list(opt.pair_text, "--pair");
      if (pair.size() != 2) throw ValidationError("--pair: expected two indices");
      k1 = parse_param_index(model, static_cast<int>(pair[0]));
      k2 = parse_param_index(model, static_cast<int>(pair[1]));
    }
    std::pair<double, double> extent1, extent2;
    if (!opt.extent_text.empty()) {
      const auto ext = parse_number_list(opt.extent_text, "--extent");
      if (ext.size() != 4) throw ValidationError("--extent: expected lo1,hi1,lo2,hi2");
      extent1 = {ext[0], ext[1]};
      extent2 = {ext[2], ext[3]};
    } else {
      const double se1 = std::sqrt(sigma->sigma(k1, k1) / sample.n());
      const double se2 = std::sqrt(sigma->sigma(k2, k2) / sample.n());
      extent1 = {run.fit.beta_hat[k1] - 4 * se1, run.fit.beta_hat[k1] + 4 * se1};
      extent2 = {run.fit.beta_hat[k2] - 4 * se2, run.fit.beta_hat[k2] + 4 * se2};
    }
    const RegionGrid grid =
        el_region_slice(model, run.restored, run.fit.beta_hat, {k1, k2}, extent1, extent2,
                        {opt.region_resolution, opt.region_resolution}, common.alpha);
    write_region_csv(join_path(common.out_dir, "region.csv"), grid);
    write_wald_region_csv(join_path(common.out_dir, "region_wald.csv"), run.fit, *sigma, grid,
                          common.alpha);
  }

  if (!run.fit.converged) {
    std::cerr << "fit did not converge within the iteration budget\n";
    return kExitNumerical;
  }
  std::cout << "wrote " << join_path(common.out_dir, "fit.txt") << '\n';
  return 0;
}

int run_simulate(const CommonOptions& common, const std::string& scenario_id, int n,
                 std::uint64_t seed, std::uint64_t replicate, bool sd_reading) {
  const Scenario scenario = scenario_by_id(scenario_id, sd_reading);
  const LatentSample latent = generate(scenario, n, seed, replicate);
  write_latent_csv(join_path(common.out_dir, "latent.csv"), latent);
  write_observed_csv(join_path(common.out_dir, "observed.csv"), latent.observed());
  std::cout << "wrote latent.csv and observed.csv under " << common.out_dir << '\n';
  return 0;
}

int run_coverage(const CommonOptions& common, const std::string& scenario_id,
                 const std::string& n_text, int replicates, std::uint64_t seed, int threads,
                 bool sd_reading, const std::string& init_text) {
  const Scenario scenario = scenario_by_id(scenario_id, sd_reading);
  const auto n_values = parse_number_list(n_text, "--n");
  MCSettings settings;
  settings.threads = threads;
  if (!init_text.empty()) settings.init = to_vector(parse_number_list(init_text, "--init"));

  std::vector<MCReport> reports;
  for (const double n_value : n_values)
    reports.push_back(
        run_monte_carlo(scenario, static_cast<int>(n_value), replicates, seed, common.alpha, settings));

  {
    auto out = open_output(join_path(common.out_dir, "mc_report.csv"));
    out << "scenario,n,replicates,seed,alpha,el_coverage,wald_coverage";
    for (int k = 0; k < scenario.model.p; ++k)
      out << ",mse_" << scenario.model.param_names[static_cast<std::size_t>(k)];
    out << ",failures\n";
    for (const auto& report : reports) {
      out << report.scenario_id << ',' << report.n << ',' << report.replicates << ',' << report.seed
          << ',' << format_value(report.alpha) << ',' << format_value(report.el_coverage) << ','
          << format_value(report.wald_coverage);
      for (int k = 0; k < scenario.model.p; ++k) out << ',' << format_value(report.mse[k]);
      out << ',' << report.failures << '\n';
    }
  }
  {
    auto out = open_output(join_path(common.out_dir, "mc_report.txt"));
    out << "scenario " << scenario.id << ", " << replicates << " replicates, seed " << seed
        << ", level " << (1.0 - common.alpha) * 100 << "%\n";
    out << "distortion normalizers: psi " << format_value(scenario.psi_norm) << " (published "
        << format_value(scenario.psi_norm_reference) << "), phi " << format_value(scenario.phi_norm)
        << " (published " << format_value(scenario.phi_norm_reference) << ")\n\n";
    auto row = [&](const std::string& label, auto value_of) {
      out.width(24);
      out << std::left << label;
      for (const auto& report : reports) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%10.4f", value_of(report));
        out << buf;
      }
      out << '\n';
    };
    out.width(24);
    out << std::left << "method \\ n";
    for (const auto& report : reports) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%10d", report.n);
      out << buf;
    }
    out << '\n';
    row("empirical likelihood", [](const MCReport& r) { return r.el_coverage; });
    row("normal approximation", [](const MCReport& r) { return r.wald_coverage; });
    for (int k = 0; k < scenario.model.p; ++k)
      row("mse " + scenario.model.param_names[static_cast<std::size_t>(k)],
          [k](const MCReport& r) { return r.mse[k]; });
    row("failures", [](const MCReport& r) { return static_cast<double>(r.failures); });
  }
  double total_seconds = 0.0;
  for (const auto& report : reports) total_seconds += report.wall_seconds;
  std::cout << std::ifstream(join_path(common.out_dir, "mc_report.txt")).rdbuf();
  std::cout << "total wall time " << total_seconds << " s\n";
  return 0;
}

int run_region(const CommonOptions& common, const FitOptions& opt) {
  FitOptions region_opt = opt;
  region_opt.emit_region = true;
  region_opt.emit_curves = false;
  return run_fit(common, region_opt);
}

int run_bandwidth(const CommonOptions& common, const std::string& input, int grid_points) {
  const ObservedSample sample = read_observed_csv(input);
  validate_sample(sample);
  std::vector<Eigen::VectorXd> cols(static_cast<std::size_t>(sample.q()));
  std::vector<const Eigen::VectorXd*> series{&sample.y};
  for (int r = 0; r < sample.q(); ++r) {
    cols[static_cast<std::size_t>(r)] = sample.x.col(r);
    series.push_back(&cols[static_cast<std::size_t>(r)]);
  }
  const double mean = sample.u.mean();
  const double s_u =
      std::sqrt((sample.u.array() - mean).square().sum() / std::max(1, sample.n() - 1));
  const BandwidthRange range = bandwidth_range(static_cast<std::size_t>(sample.n()), s_u);
  const auto grid = log_spaced_grid(range.lo, range.hi, grid_points);
  const auto curves = loocv_curves(sample.u, series, grid, 1.0 / sample.n());

  auto out = open_output(join_path(common.out_dir, "bandwidth.csv"));
  out << "series,h,criterion,skipped\n";
  for (std::size_t s = 0; s < curves.size(); ++s) {
    const std::string name = s == 0 ? "y" : "x" + std::to_string(s);
    for (std::size_t j = 0; j < curves[s].h.size(); ++j)
      out << name << ',' << format_value(curves[s].h[j]) << ','
          << format_value(curves[s].criterion[j]) << ',' << curves[s].skipped[j] << '\n';
  }
  std::cout << "wrote " << join_path(common.out_dir, "bandwidth.csv") << '\n';
  return 0;
}

int run_efficiency_map(const CommonOptions& common, const std::string& moments_path,
                       const std::string& b0_text, const std::string& b1_text) {
  const MomentSet moments = read_moment_set(moments_path);
  auto parse_range = [](const std::string& text, const std::string& what) {
    std::vector<std::string> parts;
    std::stringstream stream(text);
    std::string field;
    while (std::getline(stream, field, ':')) parts.push_back(field);
    if (parts.size() != 3) throw ValidationError(what + ": expected lo:hi:steps");
    return std::tuple<double, double, int>(std::stod(parts[0]), std::stod(parts[1]),
                                           std::stoi(parts[2]));
  };
  const auto [lo0, hi0, steps0] = parse_range(b0_text, "--b0");
  const auto [lo1, hi1, steps1] = parse_range(b1_text, "--b1");
  const EfficiencyMap map = efficiency_map(moments, {lo0, hi0}, {lo1, hi1}, steps0, steps1);

  auto out = open_output(join_path(common.out_dir, "efficiency_map.csv"));
  out << "beta0,beta1,label\n";
  for (int i = 0; i < map.beta0.size(); ++i)
    for (int j = 0; j < map.beta1.size(); ++j)
      out << format_value(map.beta0[i]) << ',' << format_value(map.beta1[j]) << ','
          << region_label_name(map.labels[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
          << '\n';
  std::cout << "wrote " << join_path(common.out_dir, "efficiency_map.csv") << '\n';
  return 0;
}

int run_distortion_curve(const CommonOptions& common, const FitOptions& opt) {
  const ObservedSample sample = read_observed_csv(opt.input);
  const DistortionFit distortion = estimate_distortions(sample, restore_options_from(opt));
  write_curves(common.out_dir, sample, distortion, opt.curve_points);
  std::cout << "wrote distortion curves under " << common.out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covariate-adjusted nonlinear regression"};
  app.set_config("--config", "", "read options from a key=value file; flags win over the file");
  app.require_subcommand(1);

  CommonOptions common;
  app.add_option("--out", common.out_dir, "output directory")->capture_default_str();
  app.add_option("--alpha", common.alpha, "tail level for regions")->capture_default_str();

  FitOptions fit_opt;
  auto* fit_cmd = app.add_subcommand("fit", "estimate distortions, restore, fit, report");
  fit_cmd->add_option("--input", fit_opt.input, "CSV with header u,x1..xq,y")->required();
  fit_cmd->add_option("--model", fit_opt.model_id, "linear | expsat | power | mdrd-exp")->required();
  fit_cmd->add_option("--init", fit_opt.init_text, "starting parameters, comma separated")->required();
  fit_cmd->add_option("--bandwidth-y", fit_opt.bandwidth_y, "explicit response bandwidth");
  fit_cmd->add_option("--bandwidth-x", fit_opt.bandwidth_x_text, "explicit predictor bandwidths");
  fit_cmd->add_option("--guard", fit_opt.guard, "denominator guard (default 1/n)");
  fit_cmd->add_flag("--shared-bandwidth", fit_opt.shared_bandwidth, "one bandwidth for all series");
  fit_cmd->add_flag("--region", fit_opt.emit_region, "emit region.csv and region_wald.csv");
  fit_cmd->add_flag("--curves", fit_opt.emit_curves, "emit distortion curve CSVs");
  fit_cmd->add_option("--pair", fit_opt.pair_text, "two parameter numbers for the region slice");
  fit_cmd->add_option("--extent", fit_opt.extent_text, "region extent lo1,hi1,lo2,hi2");
  fit_cmd->add_option("--resolution", fit_opt.region_resolution, "region grid resolution")
      ->capture_default_str();

  std::string scenario_id = "ex41", n_text = "400";
  int replicates = 500, threads = 1;
  std::uint64_t seed = 1, replicate_index = 0;
  bool sd_reading = false;
  std::string coverage_init;

  auto* sim_cmd = app.add_subcommand("simulate", "write one simulated replicate as CSV");
  sim_cmd->add_option("--scenario", scenario_id, "ex41 | ex42 | mdrd, optionally -nodist")->required();
  sim_cmd->add_option("--n", n_text, "sample size")->required();
  sim_cmd->add_option("--seed", seed, "stream seed")->capture_default_str();
  sim_cmd->add_option("--replicate", replicate_index, "replicate index")->capture_default_str();
  sim_cmd->add_flag("--sd-reading", sd_reading, "read dispersion parameters as sd, not variance");

  auto* cov_cmd = app.add_subcommand("coverage", "Monte Carlo coverage and MSE study");
  cov_cmd->add_option("--scenario", scenario_id, "ex41 | ex42 | mdrd, optionally -nodist")->required();
  cov_cmd->add_option("--n", n_text, "sample sizes, comma separated")->required();
  cov_cmd->add_option("--reps", replicates, "replicates per sample size")->capture_default_str();
  cov_cmd->add_option("--seed", seed, "stream seed")->capture_default_str();
  cov_cmd->add_option("--threads", threads, "worker threads")->capture_default_str();
  cov_cmd->add_option("--init", coverage_init, "override the scenario starting value");
  cov_cmd->add_flag("--sd-reading", sd_reading, "read dispersion parameters as sd, not variance");

  FitOptions region_opt;
  auto* region_cmd = app.add_subcommand("region", "confidence region grids around a fit");
  region_cmd->add_option("--input", region_opt.input, "CSV with header u,x1..xq,y")->required();
  region_cmd->add_option("--model", region_opt.model_id, "model id")->required();
  region_cmd->add_option("--init", region_opt.init_text, "starting parameters")->required();
  region_cmd->add_option("--pair", region_opt.pair_text, "two parameter numbers");
  region_cmd->add_option("--extent", region_opt.extent_text, "lo1,hi1,lo2,hi2");
  region_cmd->add_option("--resolution", region_opt.region_resolution, "grid resolution")
      ->capture_default_str();
  region_cmd->add_option("--bandwidth-y", region_opt.bandwidth_y, "explicit response bandwidth");
  region_cmd->add_option("--bandwidth-x", region_opt.bandwidth_x_text, "explicit predictor bandwidths");
  region_cmd->add_option("--guard", region_opt.guard, "denominator guard");
  region_cmd->add_flag("--shared-bandwidth", region_opt.shared_bandwidth, "one bandwidth for all");

  std::string bandwidth_input;
  int grid_points = 30;
  auto* bw_cmd = app.add_subcommand("bandwidth", "CV criterion curves per series");
  bw_cmd->add_option("--input", bandwidth_input, "CSV with header u,x1..xq,y")->required();
  bw_cmd->add_option("--grid-points", grid_points, "grid size")->capture_default_str();

  std::string moments_path, b0_text = "-3:3:61", b1_text = "-3:3:61";
  auto* eff_cmd = app.add_subcommand("efficiency-map", "region labels over a coefficient grid");
  eff_cmd->add_option("--moments", moments_path, "key=value moment file")->required();
  eff_cmd->add_option("--b0", b0_text, "intercept range lo:hi:steps")->capture_default_str();
  eff_cmd->add_option("--b1", b1_text, "slope range lo:hi:steps")->capture_default_str();

  FitOptions curve_opt;
  auto* curve_cmd = app.add_subcommand("distortion-curve", "estimated distortions on a grid");
  curve_cmd->add_option("--input", curve_opt.input, "CSV with header u,x1..xq,y")->required();
  curve_cmd->add_option("--points", curve_opt.curve_points, "grid points")->capture_default_str();
  curve_cmd->add_option("--bandwidth-y", curve_opt.bandwidth_y, "explicit response bandwidth");
  curve_cmd->add_option("--bandwidth-x", curve_opt.bandwidth_x_text, "explicit predictor bandwidths");
  curve_cmd->add_option("--guard", curve_opt.guard, "denominator guard");
  curve_cmd->add_flag("--shared-bandwidth", curve_opt.shared_bandwidth, "one bandwidth for all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    std::filesystem::create_directories(common.out_dir);
    if (fit_cmd->parsed()) return run_fit(common, fit_opt);
    if (sim_cmd->parsed())
      return run_simulate(common, scenario_id, static_cast<int>(std::stod(n_text)), seed,
                          replicate_index, sd_reading);
    if (cov_cmd->parsed())
      return run_coverage(common, scenario_id, n_text, replicates, seed, threads, sd_reading,
                          coverage_init);
    if (region_cmd->parsed()) return run_region(common, region_opt);
    if (bw_cmd->parsed()) return run_bandwidth(common, bandwidth_input, grid_points);
    if (eff_cmd->parsed()) return run_efficiency_map(common, moments_path, b0_text, b1_text);
    if (curve_cmd->parsed()) return run_distortion_curve(common, curve_opt);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
