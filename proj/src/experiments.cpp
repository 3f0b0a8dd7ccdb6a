#include "censored/experiments.hpp"

#include "censored/covariance.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

namespace censored {

std::string to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::exp1: return "exp1";
    case ExperimentId::exp2: return "exp2";
    case ExperimentId::exp3: return "exp3";
  }
  return "unknown";
}

std::string to_string(Method m) {
  switch (m) {
    case Method::neighbor: return "neighbor";
    case Method::zero: return "zero";
    case Method::mean: return "mean";
    case Method::median: return "median";
    case Method::lowrank: return "lowrank";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (const auto m : {Method::neighbor, Method::zero, Method::mean, Method::median,
                       Method::lowrank}) {
    if (name == to_string(m)) return m;
  }
  throw ValidationError("unknown imputation method '" + name + "'");
}

LambdaPolicy LambdaPolicy::parse(const std::string& text) {
  LambdaPolicy policy;
  const auto colon = text.find(':');
  const auto head = text.substr(0, colon);
  const auto tail = colon == std::string::npos ? std::string{} : text.substr(colon + 1);
  auto number = [&](const char* what) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tail, &used);
      if (used != tail.size()) throw std::invalid_argument(tail);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(std::string("lambda policy '") + text + "' needs a numeric " + what);
    }
  };
  if (head == "theory" && tail.empty()) {
    policy.kind = Kind::theory;
  } else if (head == "scaled") {
    policy.kind = Kind::scaled;
    if (!tail.empty()) policy.scale = number("scale");
    if (!(policy.scale > 0.0)) throw ValidationError("scaled lambda policy needs c > 0");
  } else if (head == "fixed") {
    policy.kind = Kind::fixed;
    policy.value = number("value");
    if (!(policy.value > 0.0)) throw ValidationError("fixed lambda must be positive");
  } else {
    throw ValidationError("unknown lambda policy '" + text + "'");
  }
  return policy;
}

std::string LambdaPolicy::describe() const {
  switch (kind) {
    case Kind::theory: return "theory";
    case Kind::scaled: return "scaled:" + format_real(scale);
    case Kind::fixed: return "fixed:" + format_real(value);
  }
  return "unknown";
}

double estimate_noise_scale(const Matrix& design, const Vector& labels, double ridge) {
  const Index n = design.rows();
  const double nd = static_cast<double>(n);
  const Matrix gram = design.transpose() * design;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Vector& d = eig.eigenvalues();
  const Matrix& v = eig.eigenvectors();
  const double alpha = ridge * nd;
  const Vector proj = v.transpose() * (design.transpose() * labels);
  Vector coef_rot(d.size());
  double df = 0.0;
  for (Index j = 0; j < d.size(); ++j) {
    const double dj = std::max(d(j), 0.0);
    coef_rot(j) = proj(j) / (dj + alpha);
    df += dj / (dj + alpha);
  }
  const Vector w = v * coef_rot;
  const double rss = (labels - design * w).squaredNorm();
  const double dof = nd - df;
  return std::sqrt(rss / (dof > 1.0 ? dof : nd));
}

LambdaChoice choose_lambda(const LambdaPolicy& policy, const LambdaContext& ctx) {
  LambdaChoice choice;
  switch (policy.kind) {
    case LambdaPolicy::Kind::fixed:
      choice.lambda = policy.value;
      return choice;
    case LambdaPolicy::Kind::scaled: {
      if (!ctx.design || !ctx.labels) {
        throw ValidationError("scaled lambda policy needs the design and labels");
      }
      const double n = static_cast<double>(ctx.design->rows());
      const double p = static_cast<double>(ctx.design->cols());
      const double sigma_hat = estimate_noise_scale(*ctx.design, *ctx.labels);
      choice.lambda = policy.scale * sigma_hat * std::sqrt(std::log(p) / n);
      break;
    }
    case LambdaPolicy::Kind::theory: {
      if (!ctx.model || !ctx.mask || !ctx.w_star || !ctx.tau || !ctx.top) {
        throw ValidationError(
            "theory lambda policy needs the population model, mask, w*, tau and top neighbors");
      }
      const auto bound = lambda_bound(*ctx.model, *ctx.mask, *ctx.tau, *ctx.w_star, *ctx.top);
      choice.lambda = 1.05 * bound.lambda_min;
      break;
    }
  }
  if (!(choice.lambda > 0.0)) {
    std::cerr << "warning: lambda policy " << policy.describe() << " produced "
              << format_real(choice.lambda) << "; clamped to " << format_real(kMinLambda) << '\n';
    choice.lambda = kMinLambda;
    choice.clamped = true;
  }
  return choice;
}

std::optional<double> weighted_constant(Index n, Index p, Index s) {
  const double prod = static_cast<double>(s) * static_cast<double>(p - s);
  if (prod <= 1.0 || n <= 0) return std::nullopt;
  const double sd = static_cast<double>(s);
  return std::log(static_cast<double>(n) / (sd * sd * sd * std::log(prod)));
}

GenerationConfig experiment1_defaults() {
  GenerationConfig c;
  c.n = 1000;
  c.p = 50;
  c.s = 10;
  c.sigma = Equicorrelation{0.8};
  return c;
}

GenerationConfig experiment3_defaults() {
  auto c = experiment1_defaults();
  c.n = 200;
  return c;
}

std::vector<GridPoint> default_experiment2_grid() {
  std::vector<GridPoint> grid;
  for (const auto& [p, s] : {std::pair<Index, Index>{50, 10}, {50, 5}, {100, 10}}) {
    for (const Index n : {100, 200, 500, 1000, 2000, 4000}) grid.push_back({n, p, s});
  }
  return grid;
}

TrialInstance generate_trial(const GenerationConfig& config, const MaskSpec& mask_spec,
                             ExperimentId id, std::uint64_t seed, int trial,
                             std::uint64_t data_key, std::uint64_t mask_key) {
  config.validate();
  const auto exp_tag = static_cast<std::uint64_t>(id);
  const auto t = static_cast<std::uint64_t>(trial);
  TrialInstance inst;
  inst.config = config;
  inst.config.seed = seed;
  inst.sigma = make_sigma(config.sigma, config.p);
  auto data_rng = substream(seed, {exp_tag, data_key, t, 0});
  inst.truth = sample_ground_truth(config, data_rng);
  inst.sample = sample_dataset(config, inst.sigma, inst.truth, data_rng);
  auto mask_rng = substream(seed, {exp_tag, data_key, t, 1, mask_key});
  inst.mask = make_mask(mask_spec, config.n, config.p, mask_rng);
  return inst;
}

namespace {

double auto_shrinkage(const CensoredMatrix& data, double fraction) {
  Matrix filled = Matrix::Zero(data.n_samples(), data.n_features());
  for (Index k = 0; k < data.n_samples(); ++k) {
    for (Index i = 0; i < data.n_features(); ++i) {
      if (data.observed(k, i)) filled(k, i) = data.values()(k, i);
    }
  }
  Eigen::BDCSVD<Matrix> svd(filled);
  return fraction * svd.singularValues()(0);
}

MethodOutcome finish(const TrialInstance& inst, ImputedDesign imputed,
                     const ExperimentOptions& options) {
  MethodOutcome out;
  out.imputed = std::move(imputed);
  const auto pop = population_neighbor_model(inst.sigma);
  std::optional<PopulationModel> model;
  LambdaContext ctx;
  ctx.design = &out.imputed.xhat;
  ctx.labels = &inst.sample.y;
  if (options.lambda_policy.kind == LambdaPolicy::Kind::theory) {
    model.emplace(inst.sigma, inst.truth.support, 1.0,
                  inst.config.sigma_eps * inst.config.sigma_eps);
    ctx.model = &*model;
    ctx.mask = &inst.mask;
    ctx.w_star = &inst.truth.w_star;
    ctx.tau = &pop.ratio;
    ctx.top = &pop.top;
  }
  out.lambda = choose_lambda(options.lambda_policy, ctx);
  auto cfg = options.lasso;
  cfg.lambda = out.lambda.lambda;
  out.solution = solve_lasso(out.imputed.xhat, inst.sample.y, cfg);
  out.recovered = out.solution.support == inst.truth.support;
  out.linf_error = (out.solution.w - inst.truth.w_star).cwiseAbs().maxCoeff();
  return out;
}

ExperimentRecord base_record(ExperimentId id, const TrialInstance& inst, int trial, Method m) {
  ExperimentRecord r;
  r.experiment = id;
  r.trial = trial;
  r.seed = inst.config.seed;
  r.n = inst.config.n;
  r.p = inst.config.p;
  r.s = inst.config.s;
  r.method = m;
  return r;
}

void fill_outcome(ExperimentRecord& r, const MethodOutcome& o) {
  r.lambda_used = o.lambda.lambda;
  r.recovered = o.recovered;
  r.linf_error = o.linf_error;
}

ExperimentRecord error_record(ExperimentId id, const GenerationConfig& c, std::uint64_t seed,
                              int trial, Method m, const std::string& what) {
  ExperimentRecord r;
  r.experiment = id;
  r.trial = trial;
  r.seed = seed;
  r.n = c.n;
  r.p = c.p;
  r.s = c.s;
  r.method = m;
  r.error = what.empty() ? "error" : what;
  std::replace(r.error.begin(), r.error.end(), ',', ';');
  std::replace(r.error.begin(), r.error.end(), '\n', ' ');
  return r;
}

}  // namespace

ImputedDesign impute_with(const CensoredMatrix& data, Method method,
                          const ExperimentOptions& options) {
  switch (method) {
    case Method::neighbor:
      return impute_top_neighbor(data, build_neighbor_model(pairwise_covariance(data)));
    case Method::zero: return impute_baseline(data, BaselineStrategy::zero);
    case Method::mean: return impute_baseline(data, BaselineStrategy::mean);
    case Method::median: return impute_baseline(data, BaselineStrategy::median);
    case Method::lowrank: {
      auto cfg = options.lowrank;
      if (options.lowrank_auto_shrinkage) {
        cfg.shrinkage = auto_shrinkage(data, options.lowrank_shrinkage_fraction);
      }
      return impute_lowrank(data, cfg);
    }
  }
  throw ValidationError("unknown imputation method");
}

MethodOutcome run_method(const TrialInstance& inst, Method method,
                         const ExperimentOptions& options) {
  const auto data = apply_mask(inst.sample.x_true, inst.mask);
  return finish(inst, impute_with(data, method, options), options);
}

MethodOutcome run_uncensored(const TrialInstance& inst, const ExperimentOptions& options) {
  ImputedDesign full;
  full.xhat = inst.sample.x_true;
  full.source_mask = Mask::Ones(inst.config.n, inst.config.p);
  auto uncensored = inst;
  uncensored.mask = full.source_mask;
  return finish(uncensored, std::move(full), options);
}

std::vector<ExperimentRecord> run_experiment1(const std::vector<double>& fractions,
                                              const GenerationConfig& base,
                                              const ExperimentOptions& options) {
  std::vector<ExperimentRecord> records;
  const std::vector<Method> methods{Method::neighbor, Method::zero, Method::mean, Method::median};
  for (int trial = 0; trial < options.trials; ++trial) {
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      std::optional<TrialInstance> inst;
      std::string failure;
      try {
        // Data depends only on the trial; the mask also on the fraction.
        inst = generate_trial(base, FractionMask{fractions[f]}, ExperimentId::exp1, options.seed,
                              trial, 0, f);
      } catch (const std::exception& e) {
        failure = e.what();
      }
      for (const auto m : methods) {
        if (!inst) {
          auto r = error_record(ExperimentId::exp1, base, options.seed, trial, m, failure);
          r.missing_fraction = fractions[f];
          records.push_back(std::move(r));
          continue;
        }
        auto r = base_record(ExperimentId::exp1, *inst, trial, m);
        r.missing_fraction = fractions[f];
        try {
          fill_outcome(r, run_method(*inst, m, options));
        } catch (const std::exception& e) {
          r = error_record(ExperimentId::exp1, base, options.seed, trial, m, e.what());
          r.missing_fraction = fractions[f];
        }
        records.push_back(std::move(r));
      }
    }
  }
  sort_records(records);
  return records;
}

std::vector<ExperimentRecord> run_experiment2(const std::vector<GridPoint>& grid,
                                              const GenerationConfig& base,
                                              const ExperimentOptions& options, double fraction) {
  std::vector<ExperimentRecord> records;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto config = base;
    config.n = grid[g].n;
    config.p = grid[g].p;
    config.s = grid[g].s;
    const auto c = weighted_constant(config.n, config.p, config.s);
    for (int trial = 0; trial < options.trials; ++trial) {
      ExperimentRecord r;
      try {
        const auto inst = generate_trial(config, FractionMask{fraction}, ExperimentId::exp2,
                                         options.seed, trial, g, 0);
        r = base_record(ExperimentId::exp2, inst, trial, Method::neighbor);
        fill_outcome(r, run_method(inst, Method::neighbor, options));
      } catch (const std::exception& e) {
        r = error_record(ExperimentId::exp2, config, options.seed, trial, Method::neighbor,
                         e.what());
      }
      r.missing_fraction = fraction;
      r.c_constant = c;
      records.push_back(std::move(r));
    }
  }
  sort_records(records);
  return records;
}

std::vector<ExperimentRecord> run_experiment3(const std::vector<Index>& widths,
                                              const GenerationConfig& base,
                                              const ExperimentOptions& options) {
  std::vector<ExperimentRecord> records;
  for (int trial = 0; trial < options.trials; ++trial) {
    for (std::size_t w = 0; w < widths.size(); ++w) {
      std::optional<TrialInstance> inst;
      std::string failure;
      try {
        inst = generate_trial(base, ChainMask{widths[w]}, ExperimentId::exp3, options.seed, trial,
                              0, w);
      } catch (const std::exception& e) {
        failure = e.what();
      }
      for (const auto m : {Method::neighbor, Method::lowrank}) {
        ExperimentRecord r;
        if (inst) {
          r = base_record(ExperimentId::exp3, *inst, trial, m);
          try {
            fill_outcome(r, run_method(*inst, m, options));
          } catch (const std::exception& e) {
            r = error_record(ExperimentId::exp3, base, options.seed, trial, m, e.what());
          }
        } else {
          r = error_record(ExperimentId::exp3, base, options.seed, trial, m, failure);
        }
        r.chain_width = widths[w];
        records.push_back(std::move(r));
      }
    }
  }
  sort_records(records);
  return records;
}

namespace {

using SweepKey = std::tuple<int, Index, Index, Index, double, Index>;

SweepKey sweep_key(const ExperimentRecord& r) {
  return {static_cast<int>(r.experiment), r.n, r.p, r.s, r.missing_fraction.value_or(-1.0),
          r.chain_width.value_or(-1)};
}

}  // namespace

void sort_records(std::vector<ExperimentRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const ExperimentRecord& a, const ExperimentRecord& b) {
                     const auto ka = sweep_key(a);
                     const auto kb = sweep_key(b);
                     if (ka != kb) return ka < kb;
                     if (a.trial != b.trial) return a.trial < b.trial;
                     return static_cast<int>(a.method) < static_cast<int>(b.method);
                   });
}

std::vector<SummaryRow> summarize(const std::vector<ExperimentRecord>& records) {
  std::map<std::pair<SweepKey, int>, std::vector<const ExperimentRecord*>> groups;
  for (const auto& r : records) {
    if (!r.error.empty()) continue;
    groups[{sweep_key(r), static_cast<int>(r.method)}].push_back(&r);
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, members] : groups) {
    const auto& first = *members.front();
    SummaryRow row;
    row.experiment = first.experiment;
    row.method = first.method;
    row.n = first.n;
    row.p = first.p;
    row.s = first.s;
    row.missing_fraction = first.missing_fraction;
    row.chain_width = first.chain_width;
    row.c_constant = first.c_constant;
    row.trial_count = static_cast<int>(members.size());
    double hits = 0.0;
    double sum = 0.0;
    for (const auto* m : members) {
      hits += m->recovered ? 1.0 : 0.0;
      sum += m->linf_error;
    }
    const double count = static_cast<double>(members.size());
    row.recovery_probability = hits / count;
    row.mean_linf = sum / count;
    double ss = 0.0;
    for (const auto* m : members) ss += (m->linf_error - row.mean_linf) * (m->linf_error - row.mean_linf);
    row.std_linf = members.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

namespace {

Cell optional_real(const std::optional<double>& v) {
  return v ? Cell{*v} : Cell{std::monostate{}};
}
Cell optional_index(const std::optional<Index>& v) {
  return v ? Cell{static_cast<long long>(*v)} : Cell{std::monostate{}};
}

}  // namespace

Table records_table(const std::vector<ExperimentRecord>& records) {
  Table t;
  t.schema = {"experiment", "trial", "seed", "n", "p", "s", "missing_fraction", "chain_width",
              "method", "lambda_used", "recovered", "linf_error", "c_constant", "error"};
  for (const auto& r : records) {
    const bool ok = r.error.empty();
    t.rows.push_back({
        {"experiment", to_string(r.experiment)},
        {"trial", static_cast<long long>(r.trial)},
        {"seed", static_cast<long long>(r.seed)},
        {"n", static_cast<long long>(r.n)},
        {"p", static_cast<long long>(r.p)},
        {"s", static_cast<long long>(r.s)},
        {"missing_fraction", optional_real(r.missing_fraction)},
        {"chain_width", optional_index(r.chain_width)},
        {"method", to_string(r.method)},
        {"lambda_used", ok ? Cell{r.lambda_used} : Cell{}},
        {"recovered", ok ? Cell{r.recovered} : Cell{}},
        {"linf_error", ok ? Cell{r.linf_error} : Cell{}},
        {"c_constant", optional_real(r.c_constant)},
        {"error", ok ? Cell{} : Cell{r.error}},
    });
  }
  return t;
}

Table summary_table(const std::vector<SummaryRow>& rows) {
  Table t;
  t.schema = {"experiment", "method", "n", "p", "s", "missing_fraction", "chain_width",
              "c_constant", "recovery_probability", "mean_linf", "std_linf", "trial_count"};
  for (const auto& r : rows) {
    t.rows.push_back({
        {"experiment", to_string(r.experiment)},
        {"method", to_string(r.method)},
        {"n", static_cast<long long>(r.n)},
        {"p", static_cast<long long>(r.p)},
        {"s", static_cast<long long>(r.s)},
        {"missing_fraction", optional_real(r.missing_fraction)},
        {"chain_width", optional_index(r.chain_width)},
        {"c_constant", optional_real(r.c_constant)},
        {"recovery_probability", r.recovery_probability},
        {"mean_linf", r.mean_linf},
        {"std_linf", r.std_linf},
        {"trial_count", static_cast<long long>(r.trial_count)},
    });
  }
  return t;
}

void write_run(const std::vector<ExperimentRecord>& records, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream body;
  body << "# generated " << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ") << '\n';
  write_table(records_table(records), body);
  const auto path = dir / "records.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << body.str();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
  save_table(summary_table(summarize(records)), dir / "summary.csv");
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ValidationError("spearman needs two equal-length samples of size >= 2");
  }
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0.0 || db == 0.0) return 0.0;
  return num / std::sqrt(da * db);
}

}  // namespace censored
