#include "lpcsvrg/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "lpcsvrg/errors.hpp"
#include "lpcsvrg/vec.hpp"

namespace lpcsvrg {

using nlohmann::json;

namespace {

uint64_t now_ns() {
  return static_cast<uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigInvalid(std::string(key) + ": wrong type");
  }
}

std::string hex64(uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Sgd:
      return "sgd";
    case Algorithm::Qsgd:
      return "qsgd";
    case Algorithm::Svrg:
      return "svrg";
    case Algorithm::LpcSvrg:
      return "lpc-svrg";
    case Algorithm::AlpcSvrg:
      return "alpc-svrg";
  }
  return "?";
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "sgd") return Algorithm::Sgd;
  if (name == "qsgd") return Algorithm::Qsgd;
  if (name == "svrg") return Algorithm::Svrg;
  if (name == "lpc-svrg") return Algorithm::LpcSvrg;
  if (name == "alpc-svrg") return Algorithm::AlpcSvrg;
  throw ConfigInvalid("algorithm: must be one of sgd, qsgd, svrg, lpc-svrg, alpc-svrg (got \"" +
                      name + "\")");
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigInvalid(std::string("config: invalid json: ") + e.what());
  }
  RunConfig cfg;
  cfg.algorithm = algorithm_from_name(get_or<std::string>(j, "algorithm", "lpc-svrg"));

  if (!j.contains("dataset")) throw ConfigInvalid("dataset: required");
  {
    const json& dj = j.at("dataset");
    cfg.dataset.kind = get_or<std::string>(dj, "kind", "synthetic");
    if (cfg.dataset.kind == "synthetic") {
      cfg.dataset.d = get_or<std::size_t>(dj, "d", 0);
      cfg.dataset.n = get_or<std::size_t>(dj, "n", 0);
      cfg.dataset.noise = get_or<double>(dj, "noise", 1.0);
      cfg.dataset.seed = get_or<uint64_t>(dj, "seed", 1);
      if (cfg.dataset.d == 0) throw ConfigInvalid("dataset.d: must be >= 1");
      if (cfg.dataset.n == 0) throw ConfigInvalid("dataset.n: must be >= 1");
    } else if (cfg.dataset.kind == "libsvm") {
      cfg.dataset.path = get_or<std::string>(dj, "path", "");
      if (cfg.dataset.path.empty()) throw ConfigInvalid("dataset.path: required for libsvm");
    } else {
      throw ConfigInvalid("dataset.kind: must be synthetic or libsvm");
    }
  }

  if (j.contains("h")) {
    const json& hj = j.at("h");
    cfg.h.kind = get_or<std::string>(hj, "kind", "zero");
    cfg.h.mu = get_or<double>(hj, "mu", 0.0);
    cfg.h.sigma = get_or<double>(hj, "sigma", 0.0);
    cfg.h.lo = get_or<double>(hj, "lo", 0.0);
    cfg.h.hi = get_or<double>(hj, "hi", 0.0);
    if (cfg.h.kind != "zero" && cfg.h.kind != "l1" && cfg.h.kind != "l2sq" &&
        cfg.h.kind != "box")
      throw ConfigInvalid("h.kind: must be one of zero, l1, l2sq, box");
  }

  if (j.contains("cluster")) {
    const json& cj = j.at("cluster");
    cfg.workers = get_or<int>(cj, "workers", 1);
    cfg.scheme = scheme_from_name(get_or<std::string>(cj, "scheme", "broadcast"));
    const std::string exec = get_or<std::string>(cj, "exec", "serial");
    if (exec == "serial")
      cfg.exec = ExecMode::Serial;
    else if (exec == "threads")
      cfg.exec = ExecMode::ThreadPerWorker;
    else
      throw ConfigInvalid("cluster.exec: must be serial or threads");
  }

  if (j.contains("quant") && !j.at("quant").is_null()) {
    const json& qj = j.at("quant");
    cfg.has_quant = true;
    const bool has_levels = qj.contains("levels");
    const bool has_bits = qj.contains("bits");
    if (has_levels && has_bits)
      throw ConfigInvalid("quant: give either levels or bits, not both");
    if (has_levels)
      cfg.quant.bits = QuantizerConfig::bits_for_levels(get_or<int>(qj, "levels", 0));
    else if (has_bits)
      cfg.quant.bits = get_or<int>(qj, "bits", 0);
    else
      throw ConfigInvalid("quant: levels or bits required");
    cfg.quant.lambda = get_or<double>(qj, "lambda", 1.0);
  }

  if (j.contains("run")) {
    const json& rj = j.at("run");
    cfg.epochs = get_or<int>(rj, "epochs", 1);
    cfg.inner = get_or<int>(rj, "inner", 0);
    cfg.batch = get_or<int>(rj, "batch", 1);
    cfg.rho = get_or<double>(rj, "rho", 0.3);
    cfg.eta = get_or<double>(rj, "eta", 0.0);
    cfg.steps = get_or<int>(rj, "steps", 100);
    cfg.lr = get_or<double>(rj, "lr", 0.1);
    cfg.decay = get_or<double>(rj, "decay", 0.0);
    cfg.tau1 = get_or<double>(rj, "tau1", 0.0);
    cfg.tau2 = get_or<double>(rj, "tau2", 0.5);
    cfg.alpha = get_or<double>(rj, "alpha", 0.0);
    cfg.alpha_lr = get_or<double>(rj, "alpha_lr", 0.0);
    const std::string mode = get_or<std::string>(rj, "mode", "strongly-convex");
    if (mode == "strongly-convex")
      cfg.alpc_mode = AlpcMode::StronglyConvex;
    else if (mode == "general-convex")
      cfg.alpc_mode = AlpcMode::GeneralConvex;
    else
      throw ConfigInvalid("run.mode: must be strongly-convex or general-convex");
    const std::string rule = get_or<std::string>(rj, "x_tilde_rule", "weighted-average");
    if (rule == "weighted-average")
      cfg.x_tilde_rule = XTildeRule::WeightedAverage;
    else if (rule == "last-iterate")
      cfg.x_tilde_rule = XTildeRule::LastIterate;
    else
      throw ConfigInvalid("run.x_tilde_rule: must be weighted-average or last-iterate");
    cfg.loss_stride = get_or<int>(rj, "loss_stride", 1);
  }

  cfg.ledger_mode = get_or<std::string>(j, "ledger_mode", "nominal");
  if (cfg.ledger_mode != "nominal" && cfg.ledger_mode != "entropy")
    throw ConfigInvalid("ledger_mode: must be nominal or entropy");
  cfg.seed = get_or<uint64_t>(j, "seed", 1);
  cfg.x0 = get_or<double>(j, "x0", 0.0);
  if (j.contains("output")) cfg.tag = get_or<std::string>(j.at("output"), "tag", "run");
  cfg.validate();
  return cfg;
}

std::string RunConfig::to_json_text() const {
  json j;
  j["algorithm"] = algorithm_name(algorithm);
  if (dataset.kind == "synthetic") {
    j["dataset"] = {{"kind", "synthetic"},
                    {"d", dataset.d},
                    {"n", dataset.n},
                    {"noise", dataset.noise},
                    {"seed", dataset.seed}};
  } else {
    j["dataset"] = {{"kind", "libsvm"}, {"path", dataset.path}};
  }
  j["h"] = {{"kind", h.kind}, {"mu", h.mu}, {"sigma", h.sigma}, {"lo", h.lo}, {"hi", h.hi}};
  j["cluster"] = {{"workers", workers},
                  {"scheme", scheme_name(scheme)},
                  {"exec", exec == ExecMode::Serial ? "serial" : "threads"}};
  if (has_quant) j["quant"] = {{"bits", quant.bits}, {"lambda", quant.lambda}};
  j["run"] = {
      {"epochs", epochs},
      {"inner", inner},
      {"batch", batch},
      {"rho", rho},
      {"eta", eta},
      {"steps", steps},
      {"lr", lr},
      {"decay", decay},
      {"tau1", tau1},
      {"tau2", tau2},
      {"alpha", alpha},
      {"alpha_lr", alpha_lr},
      {"mode", alpc_mode == AlpcMode::StronglyConvex ? "strongly-convex" : "general-convex"},
      {"x_tilde_rule",
       x_tilde_rule == XTildeRule::WeightedAverage ? "weighted-average" : "last-iterate"},
      {"loss_stride", loss_stride}};
  j["ledger_mode"] = ledger_mode;
  j["seed"] = seed;
  j["x0"] = x0;
  j["output"] = {{"tag", tag}};
  return j.dump(2);
}

void RunConfig::validate() const {
  if (workers < 1) throw ConfigInvalid("cluster.workers: must be >= 1");
  if (batch < 1) throw ConfigInvalid("run.batch: must be >= 1");
  if (loss_stride < 1) throw ConfigInvalid("run.loss_stride: must be >= 1");
  const bool needs_quant = algorithm == Algorithm::Qsgd || algorithm == Algorithm::LpcSvrg ||
                           algorithm == Algorithm::AlpcSvrg;
  if (needs_quant && !has_quant)
    throw ConfigInvalid(std::string("quant: required for ") + algorithm_name(algorithm));
  if (has_quant) {
    if (quant.bits < 2 || quant.bits > 24)
      throw ConfigInvalid("quant.bits: must be in [2, 24]");
    if (quant.lambda <= 0.0 || quant.lambda > 1.0)
      throw ConfigInvalid("quant.lambda: must be in (0, 1] (got " +
                          format_double(quant.lambda) + ")");
  }
  if (algorithm == Algorithm::Sgd || algorithm == Algorithm::Qsgd) {
    if (steps < 1) throw ConfigInvalid("run.steps: must be >= 1");
    if (lr <= 0.0) throw ConfigInvalid("run.lr: must be > 0");
    if (decay < 0.0) throw ConfigInvalid("run.decay: must be >= 0");
  } else {
    if (epochs < 1) throw ConfigInvalid("run.epochs: must be >= 1");
  }
  if (algorithm == Algorithm::Svrg || algorithm == Algorithm::LpcSvrg) {
    if (eta <= 0.0) {
      if (rho <= 0.0 || rho >= 0.5)
        throw ConfigInvalid("run.rho: must be in (0, 1/2) (got " + format_double(rho) + ")");
    }
  }
  if (algorithm == Algorithm::AlpcSvrg) {
    if (tau2 < 0.0) throw ConfigInvalid("run.tau2: must be >= 0");
    if (h.kind != "l2sq" && alpc_mode == AlpcMode::StronglyConvex)
      throw ConfigInvalid("run.mode: strongly-convex needs h.kind = l2sq with sigma > 0");
  }
}

RunOutput execute_run(const RunConfig& cfg) {
  std::shared_ptr<const Dataset> data;
  if (cfg.dataset.kind == "synthetic") {
    data = std::make_shared<Dataset>(
        make_synthetic_dataset(cfg.dataset.d, cfg.dataset.n, cfg.dataset.noise,
                               cfg.dataset.seed));
  } else {
    data = std::make_shared<Dataset>(load_libsvm(cfg.dataset.path));
  }

  NonsmoothTerm h = NonsmoothTerm::zero();
  if (cfg.h.kind == "l1") h = NonsmoothTerm::l1(cfg.h.mu);
  if (cfg.h.kind == "l2sq") h = NonsmoothTerm::l2_squared(cfg.h.sigma);
  if (cfg.h.kind == "box") h = NonsmoothTerm::box(cfg.h.lo, cfg.h.hi);

  CompositeProblem problem(data, h);
  ClusterState cluster = spawn_cluster(cfg.workers, problem.d(), cfg.scheme, cfg.seed);
  cluster.exec = cfg.exec;
  cluster.ledger.mode = cfg.ledger_mode == "entropy" ? BitLedger::Mode::EntropyMeasured
                                                     : BitLedger::Mode::Nominal;
  for (auto& w : cluster.local) {
    vec::fill(w.x, cfg.x0);
    vec::fill(w.y, cfg.x0);
    vec::fill(w.z, cfg.x0);
  }

  const uint64_t t_start = now_ns();
  RunResult result;
  switch (cfg.algorithm) {
    case Algorithm::Sgd:
    case Algorithm::Qsgd: {
      SgdConfig sc;
      sc.steps = cfg.steps;
      sc.batch = cfg.batch;
      sc.lr = cfg.lr;
      sc.decay = cfg.decay;
      sc.quantize = cfg.algorithm == Algorithm::Qsgd;
      sc.quant = cfg.quant;
      sc.loss_stride = cfg.loss_stride;
      result = run_sgd(problem, cluster, sc);
      break;
    }
    case Algorithm::Svrg:
    case Algorithm::LpcSvrg: {
      LpcSvrgConfig lc;
      lc.epochs = cfg.epochs;
      lc.inner = cfg.inner;
      lc.batch = cfg.batch;
      lc.rho = cfg.rho;
      lc.eta = cfg.eta;
      lc.quant = cfg.quant;
      lc.bypass_quantization = cfg.algorithm == Algorithm::Svrg;
      lc.loss_stride = cfg.loss_stride;
      result = run_lpc_svrg(problem, cluster, lc);
      break;
    }
    case Algorithm::AlpcSvrg: {
      AlpcConfig ac;
      ac.epochs = cfg.epochs;
      ac.inner = cfg.inner;
      ac.batch = cfg.batch;
      ac.mode = cfg.alpc_mode;
      ac.tau1 = cfg.tau1;
      ac.tau2 = cfg.tau2;
      ac.alpha = cfg.alpha;
      ac.alpha_lr = cfg.alpha_lr;
      ac.x_tilde_rule = cfg.x_tilde_rule;
      ac.quant = cfg.quant;
      ac.loss_stride = cfg.loss_stride;
      result = run_alpc_svrg(problem, cluster, ac);
      break;
    }
  }
  const uint64_t wall_ns = now_ns() - t_start;

  RunOutput out;
  out.metrics_csv = metrics_to_csv(result.metrics);
  out.ledger_csv = cluster.ledger.to_csv();
  out.dataset_hash = data->content_hash();

  json manifest;
  manifest["config"] = json::parse(cfg.to_json_text());
  manifest["dataset"] = {{"provenance", data->provenance},
                         {"content_hash", hex64(out.dataset_hash)},
                         {"n", data->n},
                         {"d", data->d}};
  json derived;
  derived["L"] = problem.smoothness();
  if (cfg.has_quant) {
    derived["levels"] = cfg.quant.levels();
    derived["round_bits_nominal"] =
        bits_nominal(cfg.scheme, cfg.workers, cfg.quant.bits, problem.d());
    derived["reduction_factor"] =
        reduction_factor(cfg.scheme, cfg.workers, cfg.quant.bits, problem.d());
  }
  manifest["derived"] = derived;
  manifest["results"] = {
      {"final_loss", result.final_loss},
      {"total_bits", cluster.ledger.cumulative_bits()},
      {"measured_bits", cluster.ledger.cumulative_measured_bits()},
      {"epoch_full_gradient_bits", cluster.ledger.epoch_full_gradient_bits()},
      {"grad_evals", result.grad_evals},
      {"d_lambda_max", result.zeta.d_lambda},
      {"zeta", result.zeta.zeta},
      {"zeta_terms",
       {{"a", result.zeta.a_term}, {"b", result.zeta.b_term}, {"c", result.zeta.c_term}}},
      {"tau2_theoretical", result.zeta.tau2_theoretical},
      {"constraint_lhs", result.constraint_lhs},
      {"constraint_ok", result.constraint_ok},
      {"warnings", result.warnings},
      {"wall_ns", wall_ns},
      {"timing",
       {{"compute_ns", result.timing.compute_ns},
        {"encode_ns", result.timing.encode_ns},
        {"decode_ns", result.timing.decode_ns}}}};
  out.manifest_json = manifest.dump(2);
  out.result = std::move(result);
  return out;
}

namespace {

RunConfig load_config(const std::string& path, const GlobalOptions& opt) {
  RunConfig cfg = RunConfig::from_json_text(read_text_file(path));
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.threads) cfg.exec = *opt.threads > 1 ? ExecMode::ThreadPerWorker : ExecMode::Serial;
  return cfg;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const ConfigInvalid*>(&e)) return 2;
  if (dynamic_cast<const EmptyDataset*>(&e) || dynamic_cast<const ParseError*>(&e)) return 3;
  return 1;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    const auto* err = dynamic_cast<const Error*>(&e);
    return err ? classify(e) : 1;
  }
}

std::filesystem::path out_path(const GlobalOptions& opt, const std::string& name) {
  std::filesystem::create_directories(opt.output_dir);
  return std::filesystem::path(opt.output_dir) / name;
}

}  // namespace

int cmd_run(const std::string& config_path, const GlobalOptions& opt) {
  return guarded([&] {
    const RunConfig cfg = load_config(config_path, opt);
    RunOutput out = execute_run(cfg);
    const auto metrics_path = out_path(opt, cfg.tag + "_metrics.csv");
    const auto ledger_path = out_path(opt, cfg.tag + "_ledger.csv");
    const auto manifest_path = out_path(opt, cfg.tag + "_manifest.json");
    write_text_file(metrics_path.string(), out.metrics_csv);
    write_text_file(ledger_path.string(), out.ledger_csv);
    write_text_file(manifest_path.string(), out.manifest_json);
    for (const auto& w : out.result.warnings) std::cout << "warning: " << w << '\n';
    std::cout << "final_loss " << format_double(out.result.final_loss) << "\n"
              << "total_bits " << out.result.metrics.back().cum_bits << "\n"
              << "wrote " << metrics_path.string() << ", " << ledger_path.string() << ", "
              << manifest_path.string() << '\n';
    return 0;
  });
}

int cmd_codec_bench(int bits, std::size_t dim, std::size_t trials,
                    const std::vector<double>& lambdas, uint64_t seed) {
  return guarded([&] {
    RngStream data_rng = derive_stream(seed, kSharedWorker, StreamPurpose::DataGen);
    RngStream quant_rng = derive_stream(seed, 0, StreamPurpose::Quantize);
    std::cout << "lambda,measured,bound,ratio,mc_stderr,d_lambda\n";
    bool ok = true;
    for (double lambda : lambdas) {
      std::vector<double> omega(dim);
      for (auto& v : omega) v = data_rng.next_gaussian();
      const QuantizeGrid grid =
          QuantizeGrid::from_max_abs(vec::inf_norm(omega), bits, lambda);
      std::size_t d_lambda = 0;
      for (double v : omega)
        if (v > grid.hull_hi || v < grid.hull_lo) ++d_lambda;
      std::vector<int32_t> codes(dim);
      double sum = 0.0, sum_sq = 0.0;
      QuantizeStats stats;
      for (std::size_t trial = 0; trial < trials; ++trial) {
        quantize_on_grid(omega, grid, quant_rng, codes, &stats);
        double err = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          const double e = static_cast<double>(codes[j]) * grid.delta - omega[j];
          err += e * e;
        }
        sum += err;
        sum_sq += err * err;
      }
      const double measured = sum / static_cast<double>(trials);
      const double var =
          std::max(0.0, sum_sq / static_cast<double>(trials) - measured * measured);
      const double bound = (static_cast<double>(dim - d_lambda)) * grid.delta * grid.delta /
                               4.0 +
                           static_cast<double>(d_lambda) * (1.0 - lambda) * (1.0 - lambda) *
                               vec::norm_sq(omega);
      const double ratio = measured / bound;
      const double se = std::sqrt(var / static_cast<double>(trials)) / bound;
      std::cout << format_double(lambda) << ',' << format_double(measured) << ','
                << format_double(bound) << ',' << format_double(ratio) << ','
                << format_double(se) << ',' << d_lambda << '\n';
      if (ratio > 1.0 + 4.0 * se) ok = false;
    }
    return ok ? 0 : 1;
  });
}

int cmd_variance_probe(const std::string& config_path, int points, std::size_t trials,
                       const GlobalOptions& opt) {
  return guarded([&] {
    const RunConfig cfg = load_config(config_path, opt);
    if (!cfg.has_quant) throw ConfigInvalid("quant: required for variance probe");
    std::shared_ptr<const Dataset> data;
    if (cfg.dataset.kind == "synthetic")
      data = std::make_shared<Dataset>(make_synthetic_dataset(
          cfg.dataset.d, cfg.dataset.n, cfg.dataset.noise, cfg.dataset.seed));
    else
      data = std::make_shared<Dataset>(load_libsvm(cfg.dataset.path));
    CompositeProblem problem(data, NonsmoothTerm::zero());
    ProbeConfig pc;
    pc.scheme = cfg.scheme;
    pc.quant = cfg.quant;
    pc.workers = cfg.workers;
    pc.batch = cfg.batch;
    pc.points = points;
    pc.trials = trials;
    pc.seed = cfg.seed;
    const auto rows = variance_probe(problem, pc);
    std::cout << "point,dist_sq,measured,bound,ratio,mc_stderr,d_lambda\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      std::cout << i << ',' << format_double(r.dist_sq) << ',' << format_double(r.measured)
                << ',' << format_double(r.bound) << ',' << format_double(r.ratio) << ','
                << format_double(r.mc_stderr) << ',' << r.d_lambda << '\n';
    }
    return 0;
  });
}

int cmd_compare(const std::vector<std::string>& config_paths, double threshold,
                double bandwidth_gbps, const GlobalOptions& opt) {
  return guarded([&] {
    if (config_paths.size() < 2) throw ConfigInvalid("compare: give at least two configs");
    std::vector<RunConfig> cfgs;
    for (const auto& path : config_paths) cfgs.push_back(load_config(path, opt));
    for (std::size_t i = 1; i < cfgs.size(); ++i) {
      const auto& a = cfgs[0].dataset;
      const auto& b = cfgs[i].dataset;
      if (a.kind != b.kind || a.d != b.d || a.n != b.n || a.noise != b.noise ||
          a.seed != b.seed || a.path != b.path)
        throw ConfigInvalid("compare: all configs must share the same dataset");
      if (cfgs[0].seed != cfgs[i].seed)
        throw ConfigInvalid("compare: all configs must share the same seed");
    }
    std::vector<RunOutput> outs;
    for (const auto& cfg : cfgs) outs.push_back(execute_run(cfg));

    std::ostringstream combined;
    combined << "run,algorithm,epoch,inner,loss,grad_map_sq,cum_bits,d_lambda_max,zeta\n";
    for (std::size_t i = 0; i < outs.size(); ++i) {
      for (const auto& r : outs[i].result.metrics) {
        combined << cfgs[i].tag << ',' << algorithm_name(cfgs[i].algorithm) << ',' << r.epoch
                 << ',' << r.inner << ',' << format_double(r.loss) << ','
                 << format_double(r.grad_map_sq) << ',' << r.cum_bits << ',' << r.d_lambda_max
                 << ',' << format_double(r.zeta) << '\n';
      }
    }

    double thr = threshold;
    if (!(thr > 0.0) || std::isnan(thr)) {
      thr = 0.0;
      for (const auto& o : outs) thr = std::max(thr, o.result.final_loss);
    }
    const double bits_per_s = bandwidth_gbps * 1e9;
    std::ostringstream summary;
    summary << "run,algorithm,final_loss,total_bits,measured_bits,grad_evals,threshold,"
               "bits_to_threshold,compute_s,encode_s,decode_s,transmission_modeled_s\n";
    for (std::size_t i = 0; i < outs.size(); ++i) {
      const auto& o = outs[i];
      std::string bits_to;
      try {
        bits_to = std::to_string(bits_to_loss(o.result.metrics, thr));
      } catch (const NotReached&) {
        bits_to = "not-reached";
      }
      const uint64_t total_bits = o.result.metrics.back().cum_bits;
      summary << cfgs[i].tag << ',' << algorithm_name(cfgs[i].algorithm) << ','
              << format_double(o.result.final_loss) << ',' << total_bits << ','
              << o.result.metrics.back().cum_bits << ',' << o.result.grad_evals << ','
              << format_double(thr) << ',' << bits_to << ','
              << format_double(static_cast<double>(o.result.timing.compute_ns) * 1e-9) << ','
              << format_double(static_cast<double>(o.result.timing.encode_ns) * 1e-9) << ','
              << format_double(static_cast<double>(o.result.timing.decode_ns) * 1e-9) << ','
              << format_double(static_cast<double>(total_bits) / bits_per_s) << '\n';
    }

    write_text_file(out_path(opt, "compare_metrics.csv").string(), combined.str());
    write_text_file(out_path(opt, "compare_summary.csv").string(), summary.str());
    std::cout << summary.str();
    std::cout << "wrote " << out_path(opt, "compare_metrics.csv").string() << ", "
              << out_path(opt, "compare_summary.csv").string() << '\n';
    return 0;
  });
}

int cmd_gen_data(std::size_t d, std::size_t n, double noise, uint64_t seed,
                 const std::string& out_file) {
  return guarded([&] {
    const Dataset ds = make_synthetic_dataset(d, n, noise, seed);
    std::ostringstream os;
    for (std::size_t i = 0; i < ds.n; ++i) {
      os << format_double(ds.targets[i]);
      const auto row = ds.row(i);
      for (std::size_t j = 0; j < ds.d; ++j)
        os << ' ' << (j + 1) << ':' << format_double(row[j]);
      os << '\n';
    }
    write_text_file(out_file, os.str());
    std::cout << "wrote " << out_file << " (n=" << ds.n << ", d=" << ds.d << ", hash "
              << hex64(ds.content_hash()) << ")\n";
    return 0;
  });
}

int cmd_histogram(const std::string& config_path, int bins, int samples,
                  const GlobalOptions& opt) {
  return guarded([&] {
    RunConfig cfg = load_config(config_path, opt);
    if (bins < 1) throw ConfigInvalid("bins: must be >= 1");
    if (samples < 1) throw ConfigInvalid("samples: must be >= 1");
    std::shared_ptr<const Dataset> data;
    if (cfg.dataset.kind == "synthetic")
      data = std::make_shared<Dataset>(make_synthetic_dataset(
          cfg.dataset.d, cfg.dataset.n, cfg.dataset.noise, cfg.dataset.seed));
    else
      data = std::make_shared<Dataset>(load_libsvm(cfg.dataset.path));
    NonsmoothTerm h = NonsmoothTerm::zero();
    if (cfg.h.kind == "l1") h = NonsmoothTerm::l1(cfg.h.mu);
    if (cfg.h.kind == "l2sq") h = NonsmoothTerm::l2_squared(cfg.h.sigma);
    if (cfg.h.kind == "box") h = NonsmoothTerm::box(cfg.h.lo, cfg.h.hi);
    CompositeProblem problem(data, h);
    ClusterState cluster = spawn_cluster(cfg.workers, problem.d(), cfg.scheme, cfg.seed);
    cluster.exec = cfg.exec;

    std::ostringstream os;
    os << "sample,bin_lo,bin_hi,count\n";
    int captured = 0;
    auto capture = [&](int, int, int worker, std::span<const double> u) {
      if (worker != 0 || captured >= samples) return;
      const Histogram hg = histogram(u, bins);
      for (std::size_t b = 0; b < hg.counts.size(); ++b)
        os << captured << ',' << format_double(hg.edges[b]) << ','
           << format_double(hg.edges[b + 1]) << ',' << hg.counts[b] << '\n';
      ++captured;
    };

    switch (cfg.algorithm) {
      case Algorithm::Sgd:
      case Algorithm::Qsgd: {
        SgdConfig sc;
        sc.steps = samples;
        sc.batch = cfg.batch;
        sc.lr = cfg.lr;
        sc.decay = cfg.decay;
        sc.quantize = cfg.algorithm == Algorithm::Qsgd;
        sc.quant = cfg.quant;
        sc.on_local_grad = capture;
        run_sgd(problem, cluster, sc);
        break;
      }
      case Algorithm::Svrg:
      case Algorithm::LpcSvrg: {
        LpcSvrgConfig lc;
        lc.epochs = cfg.epochs;
        lc.inner = cfg.inner;
        lc.batch = cfg.batch;
        lc.rho = cfg.rho;
        lc.eta = cfg.eta;
        lc.quant = cfg.quant;
        lc.bypass_quantization = cfg.algorithm == Algorithm::Svrg;
        lc.on_local_grad = capture;
        run_lpc_svrg(problem, cluster, lc);
        break;
      }
      case Algorithm::AlpcSvrg: {
        AlpcConfig ac;
        ac.epochs = cfg.epochs;
        ac.inner = cfg.inner;
        ac.batch = cfg.batch;
        ac.mode = cfg.alpc_mode;
        ac.tau1 = cfg.tau1;
        ac.tau2 = cfg.tau2;
        ac.alpha = cfg.alpha;
        ac.alpha_lr = cfg.alpha_lr;
        ac.quant = cfg.quant;
        ac.on_local_grad = capture;
        run_alpc_svrg(problem, cluster, ac);
        break;
      }
    }
    const auto path = out_path(opt, cfg.tag + "_hist.csv");
    write_text_file(path.string(), os.str());
    std::cout << "wrote " << path.string() << '\n';
    return 0;
  });
}

}  // namespace lpcsvrg
