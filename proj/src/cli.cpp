#include "kronsc/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "kronsc/bench.hpp"
#include "kronsc/data.hpp"
#include "kronsc/errors.hpp"
#include "kronsc/kron.hpp"
#include "kronsc/metrics.hpp"
#include "kronsc/solver.hpp"
#include "kronsc/spectral.hpp"

namespace kronsc::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonOptions {
  std::string method = "krtrr";
  double lambda = 0.2;
  int k = 2;
  int n_clusters = 5;
  std::uint64_t seed = 0;
  std::string out_dir = "results";
  Index max_n_materialize = kDefaultMaxMaterialize;
  std::string system_form = "exact_sum";
  double tau = 0.1;
  int max_sweeps = 50;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--method", o.method, "krtrr | krssc | krlrr | dense-trr")->capture_default_str();
  cmd->add_option("--lambda", o.lambda, "regularization weight")->capture_default_str();
  cmd->add_option("--k", o.k, "number of Kronecker factors")->capture_default_str();
  cmd->add_option("--n-clusters", o.n_clusters, "number of clusters")->capture_default_str();
  cmd->add_option("--seed", o.seed, "master seed")->capture_default_str();
  cmd->add_option("--out-dir", o.out_dir, "directory for reports")->capture_default_str();
  cmd->add_option("--max-n-materialize", o.max_n_materialize, "largest N for the dense affinity")
      ->capture_default_str();
  cmd->add_option("--system-form", o.system_form, "exact_sum | paper_aggregate")->capture_default_str();
  cmd->add_option("--tau", o.tau, "factor threshold in [0, 1)")->capture_default_str();
  cmd->add_option("--max-sweeps", o.max_sweeps, "alternating sweeps")->capture_default_str();
}

ExperimentConfig experiment_config(const CommonOptions& o) {
  ExperimentConfig cfg;
  cfg.method = parse_method(o.method);
  cfg.lambda = o.lambda;
  cfg.k = o.k;
  cfg.n_clusters = o.n_clusters;
  cfg.tau = o.tau;
  cfg.system_form = parse_system_form(o.system_form);
  cfg.max_sweeps = o.max_sweeps;
  cfg.seed = o.seed;
  cfg.cluster.max_materialize = o.max_n_materialize;
  if (!(o.lambda >= 0.0)) throw ConfigError("--lambda must be >= 0");
  if (o.k < 2) throw ConfigError("--k must be >= 2");
  if (o.n_clusters < 1) throw ConfigError("--n-clusters must be >= 1");
  if (!(o.tau >= 0.0 && o.tau < 1.0)) throw ConfigError("--tau must lie in [0, 1)");
  if (o.max_sweeps < 0) throw ConfigError("--max-sweeps must be >= 0");
  return cfg;
}

json config_json(const CommonOptions& o) {
  return {{"method", o.method},
          {"lambda", o.lambda},
          {"k", o.k},
          {"n_clusters", o.n_clusters},
          {"seed", o.seed},
          {"max_n_materialize", o.max_n_materialize},
          {"system_form", o.system_form},
          {"tau", o.tau},
          {"max_sweeps", o.max_sweeps}};
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void print_timings(std::ostream& out, const StageTimings& t) {
  out << std::fixed << std::setprecision(4);
  out << "  stage       seconds\n"
      << "  solve       " << t.solve << '\n'
      << "  threshold   " << t.threshold << '\n'
      << "  affinity    " << t.affinity << '\n'
      << "  laplacian   " << t.laplacian << '\n'
      << "  embed       " << t.embed << '\n'
      << "  kmeans      " << t.kmeans << '\n'
      << "  total       " << t.total() << '\n';
  out.unsetf(std::ios::floatfield);
}

// ---- generate ----------------------------------------------------------

struct GenerateOptions {
  SyntheticSpec spec;
  std::string out_dir = "results";
  std::string name = "synthetic";
};

int cmd_generate(const GenerateOptions& o, std::ostream& out) {
  o.spec.validate();
  const LabeledData data = generate_synthetic(o.spec);
  const fs::path dir = prepare_dir(o.out_dir);
  const fs::path points = dir / (o.name + ".csv");
  const fs::path labels = dir / (o.name + "_labels.csv");
  write_points_csv(points, data.data, &data.labels);
  write_labels_csv(labels, data.labels);
  out << "wrote " << data.data.count() << " points (D=" << data.data.dims() << ", "
      << o.spec.n_subspaces << " subspaces of dimension " << o.spec.sub_dim << ") to " << points.string()
      << "\nseed " << o.spec.seed << '\n';
  return kOk;
}

// ---- cluster -----------------------------------------------------------

struct ClusterCliOptions {
  CommonOptions common;
  std::string data;
  bool has_labels = true;
  std::string truth;
  std::string idx_images;
  std::string idx_labels;
  bool normalize = true;
};

int cmd_cluster(const ClusterCliOptions& o, std::ostream& out) {
  ExperimentConfig cfg = experiment_config(o.common);

  LabeledData input;
  bool have_truth = false;
  if (!o.idx_images.empty()) {
    input = load_idx_images(o.idx_images, o.idx_labels);
    have_truth = true;
  } else {
    CsvPoints csv = read_points_csv(o.data, o.has_labels);
    input.data = std::move(csv.data);
    input.labels = std::move(csv.labels);
    have_truth = o.has_labels;
  }
  if (!o.truth.empty()) {
    input.labels = read_labels_csv(o.truth);
    have_truth = true;
  }
  if (o.normalize && !input.data.normalized()) input.data = normalize_columns(input.data);
  const Index n = input.data.count();
  if (have_truth && static_cast<Index>(input.labels.size()) != n) {
    throw LabelDomainError("truth has " + std::to_string(input.labels.size()) + " labels for " +
                           std::to_string(n) + " points");
  }
  if (!have_truth) input.labels.assign(static_cast<std::size_t>(n), 0);

  json report = {{"command", "cluster"}, {"config", config_json(o.common)}, {"n_points", n}};
  const fs::path dir = prepare_dir(o.common.out_dir);

  Labels pred;
  TrialResult result;
  if (cfg.method == Method::dense_trr) {
    result = run_single(input.data, input.labels, cfg, cfg.seed);
    pred = result.labels;
  } else {
    const ShapePlan plan = plan_factor_shape(n, cfg.k, cfg.seed);
    const DataMatrix padded = apply_padding(input.data, plan.padding);
    SolverConfig scfg;
    scfg.regularizer = regularizer_for(cfg.method);
    scfg.lambda = cfg.lambda;
    scfg.shape = plan.shape;
    scfg.max_sweeps = cfg.max_sweeps;
    scfg.threshold_tau = cfg.tau;
    scfg.system_form = cfg.system_form;
    scfg.seed = cfg.seed;
    const ClusterResult res = cluster(padded, scfg, cfg.n_clusters, cfg.cluster);
    pred.assign(res.labels.begin(), res.labels.begin() + n);
    result.timings = res.timings;
    result.objective_trace = res.factors.objective_trace;
    result.n_points = n;
    result.padded_points = padded.count();
    if (have_truth) result.accuracy = clustering_accuracy(pred, input.labels);
    report["factor_dims"] = plan.shape.row_dims;
    report["padded_points"] = padded.count();
    report["sweeps"] = res.factors.sweeps;
    report["assembly_seconds"] = res.factors.assembly_seconds;
    report["factor_solve_seconds"] = res.factors.solve_seconds;
  }
  if (!pred.empty()) write_labels_csv(dir / "labels.csv", pred);

  report["objective_trace"] = result.objective_trace;
  report["timings"] = {{"solve", result.timings.solve},         {"threshold", result.timings.threshold},
                       {"affinity", result.timings.affinity},   {"laplacian", result.timings.laplacian},
                       {"embed", result.timings.embed},         {"kmeans", result.timings.kmeans},
                       {"total", result.timings.total()}};
  if (have_truth) report["accuracy"] = result.accuracy;
  write_json(dir / "report.json", report);

  out << "method " << o.common.method << ", N=" << n << ", k=" << cfg.k << ", lambda=" << cfg.lambda
      << ", seed " << cfg.seed << '\n';
  if (!result.objective_trace.empty()) {
    out << "objective " << result.objective_trace.front() << " -> " << result.objective_trace.back()
        << " (" << result.objective_trace.size() - 1 << " sweeps)\n";
  }
  print_timings(out, result.timings);
  if (have_truth) out << "accuracy " << std::fixed << std::setprecision(2) << result.accuracy << '\n';
  return kOk;
}

// ---- experiment --------------------------------------------------------

struct ExperimentCliOptions {
  CommonOptions common;
  int trials = 10;
  SyntheticSpec spec;
  std::string idx_images;
  std::string idx_labels;
  int per_class = 50;
};

int cmd_experiment(const ExperimentCliOptions& o, std::ostream& out) {
  ExperimentConfig cfg = experiment_config(o.common);
  if (o.trials < 1) throw ConfigError("--trials must be >= 1");
  LabeledData pool;
  json source;
  if (!o.idx_images.empty()) {
    pool = load_idx_images(o.idx_images, o.idx_labels);
    cfg.source.pool = &pool;
    cfg.source.per_class = o.per_class;
    source = {{"idx_images", o.idx_images}, {"per_class", o.per_class}};
  } else {
    o.spec.validate();
    cfg.source.synthetic = o.spec;
    source = {{"n_subspaces", o.spec.n_subspaces},
              {"sub_dim", o.spec.sub_dim},
              {"ambient_dim", o.spec.ambient_dim},
              {"points_per_subspace", o.spec.points_per_subspace}};
  }
  const TrialStats stats = run_trials(cfg, o.trials);
  const fs::path dir = prepare_dir(o.common.out_dir);
  json report = to_json(stats);
  report["command"] = "experiment";
  report["config"] = config_json(o.common);
  report["config"]["trials"] = o.trials;
  report["source"] = source;
  write_json(dir / "experiment.json", report);
  write_trials_csv(dir / "experiment.csv", stats);

  out << std::left << std::setw(10) << "method" << std::setw(10) << "trials" << std::setw(12)
      << "time(s)" << std::setw(12) << "acc(%)" << "std\n";
  out << std::setw(10) << o.common.method << std::setw(10) << o.trials << std::setw(12) << std::fixed
      << std::setprecision(3) << stats.mean_seconds << std::setw(12) << std::setprecision(2)
      << stats.mean_accuracy << stats.std_accuracy << '\n';
  if (stats.failures > 0) {
    out << stats.failures << " trial(s) failed:\n";
    for (const auto& t : stats.trials) {
      if (!t.error.empty()) out << "  seed " << t.seed << ": " << t.error << '\n';
    }
  }
  return stats.failures == o.trials ? kNumerical : kOk;
}

// ---- bench -------------------------------------------------------------

struct BenchCliOptions {
  CommonOptions common;
  std::vector<Index> sizes{1024, 4096};
  int sweeps = 5;
  int reps = 3;
  bool no_baseline = false;
  Index baseline_cap = kDefaultBaselineCap;
};

int cmd_bench(const BenchCliOptions& o, std::ostream& out) {
  ScalingOptions opts;
  opts.method = parse_method(o.common.method);
  opts.k = o.common.k;
  opts.lambda = o.common.lambda;
  opts.sweeps = o.sweeps;
  opts.repetitions = o.reps;
  opts.seed = o.common.seed;
  opts.include_baseline = !o.no_baseline;
  opts.baseline_cap = o.baseline_cap;
  const ScalingReport report = scaling_bench(o.sizes, opts);
  const fs::path dir = prepare_dir(o.common.out_dir);
  write_scaling_csv(dir / "bench.csv", report);
  json j = to_json(report);
  j["command"] = "bench";
  j["config"] = config_json(o.common);
  write_json(dir / "bench.json", j);

  out << std::left << std::setw(10) << "N" << std::setw(14) << "solve(s)" << std::setw(14)
      << "assembly(s)" << std::setw(14) << "total(s)" << "dense(s)\n";
  out << std::setprecision(5) << std::fixed;
  for (const auto& row : report.rows) {
    out << std::setw(10) << row.n << std::setw(14) << row.solve_seconds << std::setw(14)
        << row.assembly_seconds << std::setw(14) << row.total_seconds;
    for (const auto& b : report.baseline) {
      if (b.n == row.n) out << b.seconds;
    }
    out << '\n';
  }
  out << std::setprecision(3) << "log-log slope (" << to_string(report.method) << ", k=" << report.k
      << "): " << report.slope << '\n';
  if (report.baseline.size() >= 2) out << "dense baseline slope: " << report.baseline_slope << '\n';
  return kOk;
}

// ---- nkp-check ---------------------------------------------------------

struct NkpCliOptions {
  std::string matrix;
  Index random_p = 0;
  Index construct_p = 0;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int cmd_nkp_check(const NkpCliOptions& o, std::ostream& out, std::ostream& err) {
  const int modes = !o.matrix.empty() + (o.random_p > 0) + (o.construct_p > 0);
  if (modes != 1) throw ConfigError("give exactly one of --matrix, --random, --construct-from-A");
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal;
  auto gaussian = [&](Index r, Index c) {
    Matrix m(r, c);
    for (Index j = 0; j < c; ++j) {
      for (Index i = 0; i < r; ++i) m(i, j) = normal(rng);
    }
    return m;
  };

  Matrix c;
  Matrix truth_a;
  Index p = 0;
  if (o.construct_p > 0) {
    p = o.construct_p;
    truth_a = gaussian(p, p);
    if (truth_a.trace() < 0.0) truth_a = -truth_a;
    c = kron(truth_a, truth_a);
  } else if (o.random_p > 0) {
    p = o.random_p;
    c = gaussian(p * p, p * p);
  } else {
    c = read_points_csv(o.matrix, false).data.points().transpose();
    p = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(c.rows()))));
    if (p * p != c.rows()) throw ShapeError("matrix side " + std::to_string(c.rows()) + " is not a perfect square");
  }

  json report = {{"command", "nkp-check"}, {"p", p}, {"seed", o.seed}};
  int code = kOk;
  try {
    const NkpResult res = nkp_symmetric_approx(c, p);
    report["eigenvalue"] = res.eigval;
    report["residual"] = res.residual;
    report["iterations"] = res.iterations;
    out << "p=" << p << " eigenvalue " << res.eigval << " residual " << std::scientific << res.residual
        << " after " << res.iterations << " iterations\n";
    if (truth_a.size() > 0) {
      const double err_a = (res.a - truth_a).norm() / truth_a.norm();
      report["factor_error"] = err_a;
      out << "relative factor error " << err_a << '\n';
    }
    out.unsetf(std::ios::floatfield);
  } catch (const ApproximationError& e) {
    err << "approximation failed: " << e.what() << '\n';
    report["error"] = e.what();
    code = kNumerical;
  }
  if (!o.out_dir.empty()) write_json(prepare_dir(o.out_dir) / "nkp.json", report);
  return code;
}

// ---- eval --------------------------------------------------------------

int cmd_eval(const std::string& pred_path, const std::string& truth_path, std::ostream& out) {
  const Labels pred = read_labels_csv(pred_path);
  const Labels truth = read_labels_csv(truth_path);
  const double acc = clustering_accuracy(pred, truth);
  out << "accuracy " << std::fixed << std::setprecision(2) << acc << '\n';
  out.unsetf(std::ios::floatfield);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kronecker-product subspace clustering"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI file of key = value lines; [command] sections scope keys");

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "write a synthetic union-of-subspaces dataset");
  generate->add_option("--n-subspaces", gen.spec.n_subspaces)->capture_default_str();
  generate->add_option("--sub-dim", gen.spec.sub_dim)->capture_default_str();
  generate->add_option("--ambient-dim", gen.spec.ambient_dim)->capture_default_str();
  generate->add_option("--points-per-subspace", gen.spec.points_per_subspace)->capture_default_str();
  generate->add_option("--seed", gen.spec.seed)->capture_default_str();
  generate->add_option("--out-dir", gen.out_dir)->capture_default_str();
  generate->add_option("--name", gen.name, "file stem")->capture_default_str();

  ClusterCliOptions clu;
  auto* cluster_cmd = app.add_subcommand("cluster", "cluster one dataset");
  add_common(cluster_cmd, clu.common);
  cluster_cmd->add_option("--data", clu.data, "points CSV, one point per row");
  cluster_cmd->add_flag("!--no-labels", clu.has_labels, "the CSV has no trailing label column");
  cluster_cmd->add_option("--truth", clu.truth, "ground-truth labels file");
  cluster_cmd->add_option("--idx-images", clu.idx_images, "IDX3 image file");
  cluster_cmd->add_option("--idx-labels", clu.idx_labels, "IDX1 label file");
  cluster_cmd->add_flag("!--no-normalize", clu.normalize, "skip unit-norm column scaling");

  ExperimentCliOptions exp;
  auto* experiment = app.add_subcommand("experiment", "repeated trials with fresh data per trial");
  add_common(experiment, exp.common);
  experiment->add_option("--trials", exp.trials)->capture_default_str();
  experiment->add_option("--n-subspaces", exp.spec.n_subspaces)->capture_default_str();
  experiment->add_option("--sub-dim", exp.spec.sub_dim)->capture_default_str();
  experiment->add_option("--ambient-dim", exp.spec.ambient_dim)->capture_default_str();
  experiment->add_option("--points-per-subspace", exp.spec.points_per_subspace)->capture_default_str();
  experiment->add_option("--idx-images", exp.idx_images, "sample from an IDX pool instead");
  experiment->add_option("--idx-labels", exp.idx_labels);
  experiment->add_option("--per-class", exp.per_class, "points per class drawn from the pool")
      ->capture_default_str();

  BenchCliOptions ben;
  auto* bench = app.add_subcommand("bench", "runtime scaling study");
  add_common(bench, ben.common);
  bench->add_option("--sizes", ben.sizes, "comma-separated N values")->delimiter(',')->capture_default_str();
  bench->add_option("--sweeps", ben.sweeps, "fixed sweeps per timing")->capture_default_str();
  bench->add_option("--reps", ben.reps, "repetitions per size (median)")->capture_default_str();
  bench->add_flag("--no-baseline", ben.no_baseline, "skip the dense baseline");
  bench->add_option("--baseline-cap", ben.baseline_cap)->capture_default_str();

  NkpCliOptions nkp;
  auto* nkp_cmd = app.add_subcommand("nkp-check", "nearest symmetric Kronecker approximation");
  nkp_cmd->add_option("--matrix", nkp.matrix, "CSV matrix (p^2 x p^2)");
  nkp_cmd->add_option("--random", nkp.random_p, "random Gaussian C with block size p");
  nkp_cmd->add_option("--construct-from-A", nkp.construct_p, "build C = A (x) A from random p x p A");
  nkp_cmd->add_option("--seed", nkp.seed)->capture_default_str();
  nkp_cmd->add_option("--out-dir", nkp.out_dir, "write nkp.json here");

  std::string pred_path, truth_path;
  auto* eval = app.add_subcommand("eval", "clustering accuracy of predicted labels");
  eval->add_option("--pred", pred_path)->required();
  eval->add_option("--truth", truth_path)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*generate) return cmd_generate(gen, out);
    if (*cluster_cmd) {
      if (clu.data.empty() == clu.idx_images.empty()) {
        throw ConfigError("give either --data or --idx-images/--idx-labels");
      }
      return cmd_cluster(clu, out);
    }
    if (*experiment) return cmd_experiment(exp, out);
    if (*bench) return cmd_bench(ben, out);
    if (*nkp_cmd) return cmd_nkp_check(nkp, out, err);
    if (*eval) return cmd_eval(pred_path, truth_path, out);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const LabelDomainError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const DegenerateDataError& e) {
    err << "data error: " << e.what() << '\n';
    return kIo;
  } catch (const Error& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}

}  // namespace kronsc::cli
