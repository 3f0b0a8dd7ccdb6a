#include "censored/covariance.hpp"
#include "censored/data_model.hpp"
#include "censored/experiments.hpp"
#include "censored/imputation.hpp"
#include "censored/lasso.hpp"
#include "censored/synthgen.hpp"
#include "censored/witness.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace censored;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

double to_real(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("cannot parse " + what + " '" + s + "'");
}

long long to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("cannot parse " + what + " '" + s + "'");
}

MaskSpec parse_mask(const std::string& text) {
  const auto colon = text.find(':');
  const auto kind = text.substr(0, colon);
  const auto arg = colon == std::string::npos ? std::string{} : text.substr(colon + 1);
  if (kind == "fraction") return FractionMask{to_real(arg, "missing fraction")};
  if (kind == "chain") return ChainMask{static_cast<Index>(to_int(arg, "chain width"))};
  throw ValidationError("mask must be fraction:<theta> or chain:<width>, got '" + text + "'");
}

// "2..20", "2,5,9" or a mix such as "2..4,10".
std::vector<Index> parse_widths(const std::string& text) {
  std::vector<Index> out;
  for (const auto& part : split(text, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_int(part, "width"));
      continue;
    }
    const auto lo = to_int(part.substr(0, dots), "width");
    const auto hi = to_int(part.substr(dots + 2), "width");
    if (lo > hi) throw ValidationError("empty width range '" + part + "'");
    for (auto w = lo; w <= hi; ++w) out.push_back(w);
  }
  if (out.empty()) throw ValidationError("no chain widths given");
  return out;
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(to_real(part, "fraction"));
  if (out.empty()) throw ValidationError("no fractions given");
  return out;
}

IndexSet parse_support(const std::string& text) {
  IndexSet s;
  for (const auto& part : split(text, ',')) s.push_back(to_int(part, "support index"));
  return s;
}

// Grid file: CSV with header n,p,s.
std::vector<GridPoint> load_grid(const fs::path& path) {
  std::vector<std::string> header;
  const auto m = load_matrix(path, &header);
  if (header != std::vector<std::string>{"n", "p", "s"}) {
    throw ValidationError("grid file must have header n,p,s");
  }
  std::vector<GridPoint> grid;
  for (Index k = 0; k < m.n_samples(); ++k) {
    if (m.mask().row(k).cast<int>().sum() != 3) throw ParseError("missing grid entry", k + 2);
    const auto& v = m.values();
    grid.push_back({static_cast<Index>(v(k, 0)), static_cast<Index>(v(k, 1)),
                    static_cast<Index>(v(k, 2))});
  }
  return grid;
}

Matrix dense(const CensoredMatrix& m, const std::string& what) {
  if (m.observed_count() != m.n_samples() * m.n_features()) {
    throw ValidationError(what + " contains missing entries");
  }
  return m.values();
}

Vector load_vector(const fs::path& path) {
  const auto m = load_matrix(path);
  if (m.n_features() != 1) throw ValidationError("'" + path.string() + "' must have one column");
  return dense(m, path.string()).col(0);
}

Table vector_table(const std::string& name, const Vector& v) {
  Table t{{"index", name}, {}};
  for (Index i = 0; i < v.size(); ++i) {
    t.rows.push_back({{"index", static_cast<long long>(i)}, {name, v(i)}});
  }
  return t;
}

void save_vector(const Vector& v, const fs::path& path, const std::string& name) {
  Matrix m = v;
  save_dense(m, path, {name});
}

struct ExpArgs {
  std::string config;
  int trials = 100;
  std::uint64_t seed = 0;
  std::string out = "results";
  std::string lambda_policy = "fixed:" + format_real(kDefaultExperimentLambda);
  double shrinkage_fraction = 0.1;
  Index n = 0;
  Index p = 0;
  Index s = 0;
  double rho = 0.8;
  double sigma_eps = 0.1;
  std::string fractions = "0,0.1,0.2,0.3,0.4";
  std::string grid;
  std::string widths = "2..20";
};

void add_common(CLI::App* sub, ExpArgs& a, const GenerationConfig& defaults) {
  a.n = defaults.n;
  a.p = defaults.p;
  a.s = defaults.s;
  sub->add_option("--config", a.config, "flat key=value file; command-line flags override it");
  sub->add_option("--trials", a.trials, "trials per sweep point")->capture_default_str();
  sub->add_option("--seed", a.seed, "top-level seed")->capture_default_str();
  sub->add_option("--out", a.out, "output directory")->capture_default_str();
  sub->add_option("--lambda-policy", a.lambda_policy, "theory | scaled[:c] | fixed:v")
      ->capture_default_str();
  sub->add_option("--lowrank-shrinkage-fraction", a.shrinkage_fraction,
                  "low-rank shrinkage as a fraction of the top singular value")
      ->capture_default_str();
  sub->add_option("--n", a.n, "samples")->capture_default_str();
  sub->add_option("--p", a.p, "features")->capture_default_str();
  sub->add_option("--s", a.s, "support size")->capture_default_str();
  sub->add_option("--rho", a.rho, "equicorrelation")->capture_default_str();
  sub->add_option("--sigma-eps", a.sigma_eps, "noise standard deviation")->capture_default_str();
}

GenerationConfig base_config(const ExpArgs& a) {
  GenerationConfig c;
  c.n = a.n;
  c.p = a.p;
  c.s = a.s;
  c.sigma = Equicorrelation{a.rho};
  c.sigma_eps = a.sigma_eps;
  c.validate();
  return c;
}

ExperimentOptions options_from(const ExpArgs& a) {
  if (a.trials < 1) throw ValidationError("trials must be at least 1");
  ExperimentOptions o;
  o.trials = a.trials;
  o.seed = a.seed;
  o.lambda_policy = LambdaPolicy::parse(a.lambda_policy);
  o.lowrank_shrinkage_fraction = a.shrinkage_fraction;
  return o;
}

void finish_run(const std::vector<ExperimentRecord>& records, const ExpArgs& a) {
  write_run(records, a.out);
  write_table(summary_table(summarize(records)), std::cout);
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.error.empty() ? 0 : 1;
  if (failed) std::cerr << failed << " record(s) failed; see the error column\n";
}

// Expands `--config FILE` into `--key value` pairs placed ahead of the
// remaining arguments. Options keep their last value, so flags given on the
// command line override the file.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> from_file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      continue;
    }
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::string line;
    for (std::size_t row = 1; std::getline(in, line); ++row) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("expected key=value", row);
      auto trim = [](std::string v) {
        const auto b = v.find_first_not_of(" \t\r\"");
        const auto e = v.find_last_not_of(" \t\r\"");
        return b == std::string::npos ? std::string{} : v.substr(b, e - b + 1);
      };
      from_file.push_back("--" + trim(line.substr(0, eq)));
      from_file.push_back(trim(line.substr(eq + 1)));
    }
    // Insert right after the subcommand name.
    const auto at = args.empty() ? args.end() : args.begin() + 1;
    args.insert(at, from_file.begin(), from_file.end());
    break;
  }
  std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Censored sparsity recovery: imputation, lasso, witness and experiments"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a censored synthetic instance");
  GenerationConfig gen;
  double rho = 0.8;
  std::string mask_text = "fraction:0.2";
  std::string prefix = "instance";
  synth->add_option("--n", gen.n)->capture_default_str();
  synth->add_option("--p", gen.p)->capture_default_str();
  synth->add_option("--s", gen.s)->capture_default_str();
  synth->add_option("--rho", rho)->capture_default_str();
  synth->add_option("--sigma-eps", gen.sigma_eps)->capture_default_str();
  synth->add_option("--mask", mask_text, "fraction:<theta> or chain:<width>")
      ->capture_default_str();
  synth->add_option("--seed", gen.seed)->capture_default_str();
  synth->add_option("--out-prefix", prefix)->capture_default_str();

  // impute
  auto* impute = app.add_subcommand("impute", "fill censored entries");
  std::string input, output, method_name = "neighbor";
  impute->add_option("--input", input)->required();
  impute->add_option("--method", method_name, "neighbor | zero | mean | median | lowrank")
      ->capture_default_str();
  impute->add_option("--output", output)->required();

  // inspect
  auto* inspect = app.add_subcommand("inspect", "dump covariance and neighbor model");
  inspect->add_option("--input", input)->required();
  inspect->add_option("--out-prefix", prefix)->required();

  // solve
  auto* solve = app.add_subcommand("solve", "lasso on a fully observed design");
  std::string design_path, labels_path;
  LassoConfig lasso;
  solve->add_option("--design", design_path)->required();
  solve->add_option("--labels", labels_path)->required();
  solve->add_option("--lambda", lasso.lambda)->required();
  solve->add_option("--tol", lasso.tol)->capture_default_str();
  solve->add_option("--max-sweeps", lasso.max_sweeps)->capture_default_str();
  solve->add_option("--support-threshold", lasso.support_threshold)->capture_default_str();

  // witness
  auto* witness = app.add_subcommand("witness", "primal-dual witness for a candidate support");
  std::string support_text, truth_prefix;
  double witness_lambda = 0.0;
  witness->add_option("--design", design_path)->required();
  witness->add_option("--labels", labels_path)->required();
  witness->add_option("--support", support_text, "comma-separated 0-based indices")->required();
  witness->add_option("--lambda", witness_lambda)->required();
  witness->add_option("--truth", truth_prefix,
                      "prefix written by synth (reads _truth, _epsilon, _xtrue)");

  ExpArgs e1, e2, e3;
  auto* exp1 = app.add_subcommand("exp1", "recovery vs missing fraction, four imputers");
  add_common(exp1, e1, experiment1_defaults());
  exp1->add_option("--fractions", e1.fractions)->capture_default_str();
  auto* exp2 = app.add_subcommand("exp2", "recovery vs the weighted constant");
  add_common(exp2, e2, experiment1_defaults());
  exp2->add_option("--grid", e2.grid, "CSV with header n,p,s (default: built-in grid)");
  auto* exp3 = app.add_subcommand("exp3", "linf error under chain censorship");
  add_common(exp3, e3, experiment3_defaults());
  exp3->add_option("--widths", e3.widths, "e.g. 2..20 or 2,4,8")->capture_default_str();

  try {
    app.parse(expand_config(argc, argv));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (synth->parsed()) {
      gen.sigma = Equicorrelation{rho};
      gen.validate();
      const auto sigma = make_sigma(gen.sigma, gen.p);
      auto data_rng = substream(gen.seed, {0});
      const auto truth = sample_ground_truth(gen, data_rng);
      const auto sample = sample_dataset(gen, sigma, truth, data_rng);
      auto mask_rng = substream(gen.seed, {1});
      const auto mask = make_mask(parse_mask(mask_text), gen.n, gen.p, mask_rng);
      const auto names = default_feature_names(gen.p);
      save_matrix(apply_mask(sample.x_true, mask), prefix + "_design.csv", names);
      save_vector(sample.y, prefix + "_labels.csv", "y");
      save_vector(truth.w_star, prefix + "_truth.csv", "w_star");
      save_vector(sample.epsilon, prefix + "_epsilon.csv", "epsilon");
      save_dense(sample.x_true, prefix + "_xtrue.csv", names);
      save_dense(mask.cast<double>(), prefix + "_mask.csv", names);
      std::cout << "support";
      for (const auto i : truth.support) std::cout << ',' << i;
      std::cout << '\n';
    } else if (impute->parsed()) {
      std::vector<std::string> header;
      const auto data = load_matrix(input, &header);
      ExperimentOptions opts;
      const auto imp = impute_with(data, parse_method(method_name), opts);
      save_dense(imp.xhat, output, header);
      if (!imp.fallback_log.empty()) {
        Table log{{"sample", "feature", "neighbor", "rank"}, {}};
        for (const auto& f : imp.fallback_log) {
          log.rows.push_back({{"sample", static_cast<long long>(f.sample)},
                              {"feature", static_cast<long long>(f.feature)},
                              {"neighbor", f.neighbor ? Cell{static_cast<long long>(*f.neighbor)}
                                                      : Cell{}},
                              {"rank", static_cast<long long>(f.rank)}});
        }
        const auto side = fs::path(output).replace_extension(".fallback.csv");
        save_table(log, side);
        std::cerr << imp.fallback_log.size() << " fallback entries written to " << side.string()
                  << '\n';
      }
      if (!imp.converged) std::cerr << "warning: imputation did not converge\n";
    } else if (inspect->parsed()) {
      std::vector<std::string> header;
      const auto data = load_matrix(input, &header);
      const auto model = build_neighbor_model(pairwise_covariance(data));
      save_dense(model.covariance.h, prefix + "_covariance.csv", header);
      save_dense(model.covariance.co_counts.cast<double>(), prefix + "_co_counts.csv", header);
      Table ranking{{"feature", "ranking"}, {}};
      Table neighbors{{"feature", "top", "ratio", "ratio_degenerate"}, {}};
      for (Index i = 0; i < model.n_features(); ++i) {
        const auto& r = model.ranking[static_cast<std::size_t>(i)];
        std::string joined;
        for (std::size_t j = 0; j < r.size(); ++j) joined += (j ? " " : "") + std::to_string(r[j]);
        ranking.rows.push_back({{"feature", static_cast<long long>(i)}, {"ranking", joined}});
        neighbors.rows.push_back(
            {{"feature", static_cast<long long>(i)},
             {"top", static_cast<long long>(model.top[static_cast<std::size_t>(i)])},
             {"ratio", model.ratio(i)},
             {"ratio_degenerate", static_cast<bool>(model.ratio_degenerate[static_cast<std::size_t>(i)])}});
      }
      save_table(ranking, prefix + "_ranking.csv");
      save_table(neighbors, prefix + "_neighbors.csv");
    } else if (solve->parsed()) {
      const Matrix x = dense(load_matrix(design_path), "design");
      const Vector y = load_vector(labels_path);
      const auto sol = solve_lasso(x, y, lasso);
      write_table(vector_table("w", sol.w), std::cout);
      std::cout << "support";
      for (const auto i : sol.support) std::cout << ',' << i;
      std::cout << '\n';
      if (!sol.converged) std::cerr << "warning: solver hit max_sweeps\n";
    } else if (witness->parsed()) {
      const Matrix x = dense(load_matrix(design_path), "design");
      const Vector y = load_vector(labels_path);
      const auto support = parse_support(support_text);
      std::optional<WitnessTruth> truth;
      if (!truth_prefix.empty()) {
        const Matrix x_true = dense(load_matrix(truth_prefix + "_xtrue.csv"), "xtrue");
        truth = WitnessTruth{load_vector(truth_prefix + "_truth.csv"),
                             load_vector(truth_prefix + "_epsilon.csv"), x - x_true};
      }
      const auto rep = construct_witness(x, y, support, witness_lambda, truth);
      const auto hhat = imputed_covariance(x).hhat;
      std::optional<double> beta, gamma;
      {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(hhat(support, support), Eigen::EigenvaluesOnly);
        beta = eig.eigenvalues().minCoeff();
        try {
          gamma = 1.0 - incoherence_norm(hhat, support);
        } catch (const ValidationError&) {
        }
      }
      auto opt = [](const std::optional<double>& v) { return v ? Cell{*v} : Cell{}; };
      Table t{{"max_abs_zsc", "max_abs_zs", "strictly_feasible", "zs_in_bounds",
               "sign_consistent", "min_abs_w_restricted", "decomposition_gap", "beta", "gamma"},
              {}};
      std::optional<double> gap;
      if (rep.z_a && rep.z_b && rep.z_sc.size() > 0) {
        gap = (*rep.z_a + *rep.z_b - rep.z_sc).cwiseAbs().maxCoeff();
      }
      t.rows.push_back({{"max_abs_zsc", rep.max_abs_zsc},
                        {"max_abs_zs", rep.max_abs_zs},
                        {"strictly_feasible", rep.strictly_feasible},
                        {"zs_in_bounds", rep.zs_in_bounds},
                        {"sign_consistent", rep.sign_consistent ? Cell{*rep.sign_consistent} : Cell{}},
                        {"min_abs_w_restricted", rep.min_abs_w_restricted},
                        {"decomposition_gap", opt(gap)},
                        {"beta", opt(beta)},
                        {"gamma", opt(gamma)}});
      write_table(t, std::cout);
    } else if (exp1->parsed()) {
      finish_run(run_experiment1(parse_fractions(e1.fractions), base_config(e1), options_from(e1)),
                 e1);
    } else if (exp2->parsed()) {
      const auto grid = e2.grid.empty() ? default_experiment2_grid() : load_grid(e2.grid);
      finish_run(run_experiment2(grid, base_config(e2), options_from(e2)), e2);
    } else if (exp3->parsed()) {
      finish_run(run_experiment3(parse_widths(e3.widths), base_config(e3), options_from(e3)), e3);
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
