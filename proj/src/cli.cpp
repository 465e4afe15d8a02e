#include "crel/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "crel/crel_core.hpp"
#include "crel/errors.hpp"
#include "crel/experiments.hpp"
#include "crel/expansion.hpp"
#include "crel/parallel.hpp"
#include "crel/posterior.hpp"
#include "crel/stats.hpp"

namespace crel {

namespace {

constexpr const char* kVersion = "crel 0.1.0";

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  if (out.empty()) throw ParseError("empty numeric list '" + s + "'");
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

// "flat" or "normal:m,s" (one pair broadcast, or d pairs joined with ';')
PriorPtr parse_prior(const std::string& spec, int dim) {
  if (spec == "flat") return flat_prior(dim);
  if (spec.rfind("normal:", 0) == 0) {
    std::string body = spec.substr(7);
    std::vector<double> means, sds;
    std::stringstream ss(body);
    std::string pair;
    while (std::getline(ss, pair, ';')) {
      std::vector<double> ms = parse_double_list(pair);
      if (ms.size() != 2) throw ParseError("prior pair must be mean,sd: '" + pair + "'");
      means.push_back(ms[0]);
      sds.push_back(ms[1]);
    }
    if (means.size() == 1) {
      means.assign(dim, means[0]);
      sds.assign(dim, sds[0]);
    }
    if (static_cast<int>(means.size()) != dim)
      throw ParseError("prior dimension mismatch for '" + spec + "'");
    return normal_prior(to_vector(means), to_vector(sds));
  }
  throw ParseError("unknown prior spec '" + spec + "' (use flat or normal:mean,sd)");
}

std::uint64_t resolve_seed(std::uint64_t flag_seed, bool seed_given) {
  if (seed_given) return flag_seed;
  if (const char* env = std::getenv("CREL_SEED")) return std::strtoull(env, nullptr, 10);
  return 12345;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << content;
}

void write_manifest(const std::filesystem::path& outdir,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ostringstream os;
  os << "artifact = " << kVersion << "\n";
  for (const auto& [k, v] : entries) os << k << " = " << v << "\n";
  write_file(outdir / "manifest.txt", os.str());
}

struct CommonOpts {
  std::string out = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--seed", opts.seed, "master seed (fallback: CREL_SEED, then 12345)")
      ->each([&opts](const std::string&) { opts.seed_given = true; });
  cmd->add_option("--threads", opts.threads, "worker thread cap (0 = all cores)");
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

// flat key = value file expanded into subcommand flags; command-line flags
// placed after the expansion win via the take-last policy
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
  std::vector<std::string> out;
  std::string config_file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ParseError("--config needs a file argument");
      config_file = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_file = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (config_file.empty()) return out;
  if (out.empty()) throw ParseError("--config requires a subcommand");
  CLI::App* cmd = app.get_subcommand_no_throw(out[0]);
  if (cmd == nullptr) throw ParseError("--config requires a leading subcommand");

  std::ifstream in(config_file);
  if (!in) throw ParseError("cannot open config file " + config_file);
  std::vector<std::string> expanded;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(line_no) + " is not key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty() || key == "config" ||
        cmd->get_option_no_throw("--" + key) == nullptr)
      throw ParseError("unknown config key '" + key + "' for subcommand " + out[0]);
    expanded.push_back("--" + key);
    if (!value.empty()) expanded.push_back(value);
  }
  out.insert(out.begin() + 1, expanded.begin(), expanded.end());
  return out;
}

int cmd_weights(const std::string& file, const std::string& psi_name, double tuning,
                double gamma, const std::string& theta_str, const CommonOpts& opts) {
  Dataset data = load_csv(file);
  PsiPtr psi = make_psi(psi_name, tuning);
  Eigen::VectorXd theta = to_vector(parse_double_list(theta_str));
  Eigen::MatrixXd psi_mat = psi->psi_matrix(data, theta);

  if (!convex_hull_check(psi_mat)) {
    std::cerr << "weights: 0 is outside the convex hull of psi at theta" << std::endl;
    return 2;
  }
  LambdaSolution sol = solve_lambda(psi_mat, gamma);
  CRWeights w = weights_from_lambda(psi_mat, sol);

  std::filesystem::path outdir(opts.out);
  std::filesystem::create_directories(outdir);
  std::ostringstream os;
  os << "i";
  for (int j = 0; j < data.p(); ++j) os << ",x" << j + 1;
  for (int j = 0; j < psi_mat.cols(); ++j) os << ",psi" << j + 1;
  os << ",weight\n";
  for (int i = 0; i < data.n(); ++i) {
    os << i + 1;
    for (int j = 0; j < data.p(); ++j) os << "," << fmt(data.obs(i, j));
    for (int j = 0; j < psi_mat.cols(); ++j) os << "," << fmt(psi_mat(i, j));
    os << "," << fmt(w.weights[i]) << "\n";
  }
  write_file(outdir / "weights.csv", os.str());
  write_manifest(outdir, {{"command", "weights"},
                          {"data", file},
                          {"psi", psi_name},
                          {"gamma", fmt(gamma)},
                          {"theta", theta_str},
                          {"iterations", std::to_string(sol.iterations)},
                          {"residual", fmt(sol.residual_norm)}});
  std::cout << "lambda =";
  for (int j = 0; j < sol.lambda.size(); ++j) std::cout << " " << fmt(sol.lambda[j]);
  std::cout << "\niterations = " << sol.iterations << "\nresidual = " << fmt(sol.residual_norm)
            << "\nwrote " << (outdir / "weights.csv").string() << std::endl;
  return 0;
}

int cmd_profile(const std::string& file, const std::string& psi_name, double tuning,
                double gamma, const std::string& grid_str, const std::string& parametric,
                const CommonOpts& opts) {
  Dataset data = load_csv(file);
  PsiPtr psi = make_psi(psi_name, tuning);

  // lo:hi:m grid
  std::vector<double> parts;
  {
    std::stringstream ss(grid_str);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
  }
  if (parts.size() != 3 || parts[2] < 1) throw ParseError("grid must be lo:hi:m");
  int m = static_cast<int>(parts[2]);
  std::vector<double> grid(m);
  for (int i = 0; i < m; ++i)
    grid[i] = (m == 1) ? parts[0] : parts[0] + (parts[1] - parts[0]) * i / (m - 1);

  bool with_parametric = parametric == "laplace";
  if (!parametric.empty() && !with_parametric)
    throw ParseError("unknown parametric overlay '" + parametric + "'");
  std::vector<ProfilePoint> curve = profile_curve(data, *psi, grid, gamma, with_parametric);

  std::filesystem::path outdir(opts.out);
  std::filesystem::create_directories(outdir);
  std::ostringstream os;
  os << "theta,gelr" << (with_parametric ? ",parametric" : "") << "\n";
  for (const ProfilePoint& p : curve) {
    os << fmt(p.theta) << "," << fmt(p.gelr);
    if (with_parametric) os << "," << fmt(p.parametric);
    os << "\n";
  }
  write_file(outdir / "profile.csv", os.str());
  write_manifest(outdir, {{"command", "profile"},
                          {"data", file},
                          {"psi", psi_name},
                          {"gamma", fmt(gamma)},
                          {"grid", grid_str},
                          {"parametric", parametric.empty() ? "none" : parametric}});
  std::cout << "wrote " << (outdir / "profile.csv").string() << std::endl;
  return 0;
}

int cmd_posterior(const std::string& file, const std::string& psi_name, double tuning,
                  double gamma, const std::string& prior_spec, const std::string& alpha_str,
                  const PosteriorConfig& base_cfg, const std::string& chain_out,
                  const CommonOpts& opts) {
  Dataset data = load_csv(file);
  PsiPtr psi = make_psi(psi_name, tuning);
  int dim = data.has_glm() ? static_cast<int>(data.design->cols()) : 1;
  PriorPtr prior = parse_prior(prior_spec, dim);
  std::vector<double> alphas = parse_double_list(alpha_str);

  PosteriorConfig cfg = base_cfg;
  cfg.seed = resolve_seed(opts.seed, opts.seed_given);

  PosteriorSample sample;
  try {
    sample = sample_posterior(data, *psi, *prior, cfg, gamma);
  } catch (const SamplerError& e) {
    std::cerr << "posterior: " << e.what() << std::endl;
    return 3;
  }

  std::filesystem::path outdir(opts.out);
  std::filesystem::create_directories(outdir);
  std::ostringstream os;
  os << "component,alpha,value,mc_se\n";
  std::ostringstream summary;
  summary << "acceptance_rate = " << fmt(sample.acceptance_rate) << "\n";
  for (int j = 0; j < sample.draws.cols(); ++j)
    summary << "ess_" << j + 1 << " = " << fmt(sample.ess[j]) << "\n";
  for (int j = 0; j < sample.draws.cols(); ++j)
    for (double a : alphas) {
      QuantileEstimate q = posterior_quantile(sample, j, a);
      os << j + 1 << "," << fmt(a) << "," << fmt(q.value) << "," << fmt(q.mc_se) << "\n";
      summary << "quantile_" << j + 1 << "_" << fmt(a) << " = " << fmt(q.value) << " (mc_se "
              << fmt(q.mc_se) << ")\n";
    }
  write_file(outdir / "quantiles.csv", os.str());

  if (!chain_out.empty()) {
    std::ostringstream cs;
    cs << "iteration";
    for (int j = 0; j < sample.draws.cols(); ++j) cs << ",theta" << j + 1;
    cs << ",log_post\n";
    for (int i = 0; i < sample.draws.rows(); ++i) {
      cs << i + 1;
      for (int j = 0; j < sample.draws.cols(); ++j) cs << "," << fmt(sample.draws(i, j));
      cs << "," << fmt(sample.log_post_trace[i]) << "\n";
    }
    write_file(outdir / chain_out, cs.str());
  }

  write_manifest(outdir, {{"command", "posterior"},
                          {"data", file},
                          {"psi", psi_name},
                          {"gamma", fmt(gamma)},
                          {"prior", prior_spec},
                          {"alphas", alpha_str},
                          {"chain_length", std::to_string(cfg.chain_length)},
                          {"burn_in", std::to_string(cfg.burn_in)},
                          {"thin", std::to_string(cfg.thin)},
                          {"seed", std::to_string(cfg.seed)}});
  std::cout << summary.str();
  std::cout << "wrote " << (outdir / "quantiles.csv").string() << std::endl;
  return 0;
}

std::string table2_csv(double eff_mean, double eff_huber, double eff_tukey) {
  std::vector<double> alphas = {0.25, 0.5, 0.75, 0.95, 0.99};
  std::ostringstream os;
  os << "# analytic bias in coverage at the Laplace model, in powers of 1e-2\n";
  os << "# eff_inv: mean = " << fmt(eff_mean) << ", huber = " << fmt(eff_huber)
     << ", biweight = " << fmt(eff_tukey) << "\n";
  os << "alpha,mean,huber,biweight\n";
  for (double a : alphas) {
    os << fmt(a) << "," << fmt(100.0 * bias_coverage(a, eff_mean)) << ","
       << fmt(100.0 * bias_coverage(a, eff_huber)) << ","
       << fmt(100.0 * bias_coverage(a, eff_tukey)) << "\n";
  }
  return os.str();
}

int cmd_reproduce(const std::string& table, const std::string& scale, const CommonOpts& opts) {
  std::filesystem::path outdir(opts.out);
  std::filesystem::create_directories(outdir);
  std::uint64_t seed = resolve_seed(opts.seed, opts.seed_given);
  const bool desk = scale == "desk";
  if (!desk && scale != "paper") throw ParseError("scale must be desk or paper");

  // desk scale trims chain lengths (and table-3 replications) by 4x
  StudySettings settings;
  settings.threads = opts.threads;
  settings.chain_length = desk ? 16000 : 50000;
  settings.burn_in = desk ? 3000 : 5000;
  settings.ref_chain_mult = 4;

  if (table == "2") {
    ModelPtr model = laplace_model();
    double eff_mean = asymptotic_efficiency_inv(*psi_mean(), *model);
    double eff_huber = asymptotic_efficiency_inv(*psi_huber(1.345), *model);
    double eff_tukey = asymptotic_efficiency_inv(*psi_tukey(4.685), *model);
    std::string csv = table2_csv(eff_mean, eff_huber, eff_tukey);
    write_file(outdir / "table2.csv", csv);
    write_file(outdir / "table2.txt", csv);
    write_manifest(outdir,
                   {{"command", "reproduce"}, {"table", "2"}, {"scale", scale}});
    std::cout << csv;
    return 0;
  }
  if (table == "1") {
    CoverageResult r = coverage_simulation(
        80, 110, {0.0, -1.0}, {"mean", "median", "huber", "tukey"},
        {0.25, 0.5, 0.75, 0.95, 0.99}, seed, settings);
    write_file(outdir / "table1.csv", coverage_table_csv(r));
    write_file(outdir / "table1.txt", coverage_table_text(r));
    write_manifest(outdir, {{"command", "reproduce"},
                            {"table", "1"},
                            {"scale", scale},
                            {"seed", std::to_string(seed)},
                            {"M", std::to_string(r.M)},
                            {"n", std::to_string(r.n)}});
    std::cout << coverage_table_text(r);
    return r.failed_reps * 10 > r.M ? 1 : 0;
  }
  if (table == "3") {
    int M = desk ? 40 : 120;
    CoverageResult r =
        glm_accuracy_simulation(M, 120, {-1.0, -0.5, -2.0 / 3.0, 0.0}, seed, settings);
    write_file(outdir / "table3.csv", coverage_table_csv(r));
    write_file(outdir / "table3.txt", coverage_table_text(r));
    write_manifest(outdir, {{"command", "reproduce"},
                            {"table", "3"},
                            {"scale", scale},
                            {"seed", std::to_string(seed)},
                            {"M", std::to_string(r.M)},
                            {"n", std::to_string(r.n)}});
    std::cout << coverage_table_text(r);
    return r.failed_reps * 10 > r.M ? 1 : 0;
  }
  if (table == "thm5") {
    std::vector<double> gammas = {-2.0, -1.0, -0.5, -2.0 / 3.0, 0.0};
    VarianceStudyResult r =
        theorem5_variance_study("exponential", 30, 500, gammas, 0.9, seed, settings);
    std::ostringstream os;
    os << "# posterior-quantile variance by gamma (exponential data, alpha 0.9)\n";
    os << "# seed = " << r.seed << ", M = " << r.M << ", n = " << r.n << "\n";
    os << "gamma,variance,paired_diff_vs_gamma0,paired_se\n";
    int g0 = static_cast<int>(gammas.size()) - 1;  // gamma = 0 column
    for (std::size_t ig = 0; ig < gammas.size(); ++ig) {
      double diff = 0.0, se = 0.0;
      r.paired_variance_diff(static_cast<int>(ig), g0, &diff, &se);
      os << fmt(gammas[ig]) << "," << fmt(r.variances[ig]) << "," << fmt(diff) << ","
         << fmt(se) << "\n";
    }
    write_file(outdir / "thm5.csv", os.str());
    write_file(outdir / "thm5.txt", os.str());
    write_manifest(outdir, {{"command", "reproduce"},
                            {"table", "thm5"},
                            {"scale", scale},
                            {"seed", std::to_string(seed)}});
    std::cout << os.str();
    return 0;
  }
  throw ParseError("unknown table '" + table + "' (use 1, 2, 3 or thm5)");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Cressie-Read empirical-likelihood posteriors"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.set_config("--config");
  app.allow_config_extras(false);

  CommonOpts opts;
  std::string file, psi_name = "mean", theta_str = "0", grid_str, parametric, prior_spec = "flat";
  std::string alpha_str = "0.025,0.5,0.975", chain_out, table, scale = "desk";
  double gamma = 0.0;
  double tuning = std::numeric_limits<double>::quiet_NaN();
  PosteriorConfig cfg;
  bool no_adapt = false;
  std::string scale_str;

  CLI::App* weights = app.add_subcommand("weights", "conditional weights at a fixed theta");
  weights->add_option("data", file, "CSV dataset")->required();
  weights->add_option("--psi", psi_name, "estimating function family");
  weights->add_option("--tuning", tuning, "family tuning constant");
  weights->add_option("--gamma", gamma, "divergence index");
  weights->add_option("--theta", theta_str, "evaluation point (comma list)");
  add_common(weights, opts);

  CLI::App* profile = app.add_subcommand("profile", "ratio-statistic curve over a grid");
  profile->add_option("data", file, "CSV dataset")->required();
  profile->add_option("--psi", psi_name, "estimating function family");
  profile->add_option("--tuning", tuning, "family tuning constant");
  profile->add_option("--gamma", gamma, "divergence index");
  profile->add_option("--grid", grid_str, "grid lo:hi:m")->required();
  profile->add_option("--parametric", parametric, "overlay curve (laplace)");
  add_common(profile, opts);

  CLI::App* posterior = app.add_subcommand("posterior", "posterior quantiles via MCMC");
  posterior->add_option("data", file, "CSV dataset")->required();
  posterior->add_option("--psi", psi_name, "estimating function family");
  posterior->add_option("--tuning", tuning, "family tuning constant");
  posterior->add_option("--gamma", gamma, "divergence index");
  posterior->add_option("--prior", prior_spec, "flat or normal:mean,sd");
  posterior->add_option("--alpha", alpha_str, "quantile levels (comma list)");
  posterior->add_option("--chain-length", cfg.chain_length, "total iterations");
  posterior->add_option("--burn-in", cfg.burn_in, "discarded iterations");
  posterior->add_option("--thin", cfg.thin, "keep every k-th draw");
  posterior->add_option("--scale", scale_str, "proposal scale (comma list)");
  posterior->add_flag("--no-adapt", no_adapt, "disable burn-in scale adaptation");
  posterior->add_option("--chain-out", chain_out, "also dump the chain to this file");
  add_common(posterior, opts);

  CLI::App* reproduce = app.add_subcommand("reproduce", "rebuild the study tables");
  reproduce->add_option("--table", table, "1, 2, 3 or thm5")->required();
  reproduce->add_option("--scale", scale, "desk or paper");
  add_common(reproduce, opts);

  for (CLI::App* cmd : {weights, profile, posterior, reproduce}) {
    cmd->add_option("--config", "flat key=value option file (expanded before flags)");
    for (CLI::Option* opt : cmd->get_options())
      if (opt->get_expected_min() > 0)
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(args, app);
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 64;
  } catch (const ParseError& e) {
    std::cerr << e.what() << std::endl;
    return 64;
  }

  try {
    if (app.got_subcommand(weights))
      return cmd_weights(file, psi_name, tuning, gamma, theta_str, opts);
    if (app.got_subcommand(profile))
      return cmd_profile(file, psi_name, tuning, gamma, grid_str, parametric, opts);
    if (app.got_subcommand(posterior)) {
      cfg.adapt = !no_adapt;
      if (!scale_str.empty()) cfg.proposal_scale = to_vector(parse_double_list(scale_str));
      return cmd_posterior(file, psi_name, tuning, gamma, prior_spec, alpha_str, cfg, chain_out,
                           opts);
    }
    if (app.got_subcommand(reproduce)) return cmd_reproduce(table, scale, opts);
  } catch (const HullError& e) {
    std::cerr << e.what() << std::endl;
    return 2;
  } catch (const SamplerError& e) {
    std::cerr << e.what() << std::endl;
    return 3;
  } catch (const ParseError& e) {
    std::cerr << e.what() << std::endl;
    return 64;
  } catch (const std::exception& e) {
    std::cerr << e.what() << std::endl;
    return 1;
  }
  return 64;
}

}  // namespace crel
