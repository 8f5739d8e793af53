#pragma once

// Command implementations behind the `abic` executable. Each command returns
// a process exit code and writes human-readable progress to `log`.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "abic/constraints.hpp"
#include "abic/errors.hpp"
#include "abic/graph.hpp"
#include "abic/io.hpp"
#include "abic/metrics.hpp"
#include "abic/mggd.hpp"
#include "abic/optimizer.hpp"
#include "abic/simgen.hpp"

namespace abic::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kSuccess = 0,
  kInputError = 2,
  kNotConverged = 3,
  kNumericFailure = 4,
};

namespace fs = std::filesystem;
using io::Json;

/// Expands a master seed into independent stream seeds (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Json config_to_json(const OptimizerConfig& c) {
  Json j;
  j["constraint"] = std::string(to_string(c.constraint));
  j["lambda"] = c.lambda;
  j["w_threshold"] = c.w_threshold;
  j["tol"] = c.tol;
  j["h_tol"] = c.h_tol;
  j["rho_init"] = c.rho_init;
  j["rho_factor"] = c.rho_factor;
  j["rho_max"] = c.rho_max;
  j["alpha_init"] = c.alpha_init;
  j["max_iterations"] = c.max_iterations;
  j["max_iterations_cap"] = c.max_iterations_cap;
  j["max_dual_steps"] = c.max_dual_steps;
  return j;
}

namespace detail {

inline std::string now() { return io::utc_timestamp(std::chrono::system_clock::now()); }

/// Maps exceptions to exit codes; anything unexpected counts as a numeric failure.
inline int guarded(std::ostream& log, const std::function<int()>& body) {
  try {
    return body();
  } catch (const InputError& e) {
    log << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const ParameterError& e) {
    log << "invalid parameter: " << e.what() << "\n";
    return kInputError;
  } catch (const EstimationError& e) {
    log << "estimation failed: " << e.what() << "\n";
    return kInputError;
  } catch (const NumericError& e) {
    log << "numeric failure: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const std::exception& e) {
    log << "internal error: " << e.what() << "\n";
    return kNumericFailure;
  }
}

struct Output {
  fs::path dir;
  io::RunManifest manifest;

  void write(const std::string& name, const std::string& text) {
    io::write_file(dir / name, text);
    manifest.outputs.emplace_back(name, io::digest(text));
  }
  void finish() {
    manifest.finished_at = now();
    io::write_file(dir / "manifest.json", io::dump(manifest.to_json()));
  }
};

inline Output start(const fs::path& dir, const std::string& command, std::uint64_t seed) {
  Output out;
  out.dir = dir;
  out.manifest.command = command;
  out.manifest.seed = seed;
  out.manifest.version = kVersion;
  out.manifest.started_at = now();
  return out;
}

inline void center_columns(Eigen::MatrixXd& X) { X.rowwise() -= X.colwise().mean(); }

inline std::string scores_csv(const metrics::StructureScores& s) {
  std::ostringstream out;
  out << "level,precision,recall,f1\n";
  auto row = [&](const char* name, const metrics::PrfScores& p) {
    out << name << ',' << io::format_real(p.precision) << ',' << io::format_real(p.recall) << ','
        << io::format_real(p.f1) << '\n';
  };
  row("skeleton", s.skeleton);
  row("arrowhead", s.arrowhead);
  row("tail", s.tail);
  return out.str();
}

inline io::GraphDocument truth_document(const Parameters& theta) {
  return io::make_document(theta, 0.0, std::max(0.0, h_value(theta, ConstraintKind::bow_free)),
                           true);
}

}  // namespace detail

// --- discover -------------------------------------------------------------------

struct DiscoverOptions {
  fs::path csv;
  fs::path out_dir = "abic_out";
  std::optional<double> beta;  ///< estimated from the data when absent
  OptimizerConfig config;
  std::optional<fs::path> prior;
  std::uint64_t seed = 0;
};

/// Writes graph.json, graph.dot and manifest.json into out_dir.
inline int cmd_discover(const DiscoverOptions& opt, std::ostream& log) {
  return detail::guarded(log, [&]() -> int {
    const std::string raw = io::read_text(opt.csv);
    std::istringstream in(raw);
    io::CsvTable table = io::parse_csv(in, opt.csv.string());
    if (table.header.size() < 2) throw InputError(opt.csv.string() + ": need at least 2 columns");
    if (table.data.rows() < 2) throw InputError(opt.csv.string() + ": need at least 2 data rows");
    opt.config.validate();
    detail::center_columns(table.data);

    auto out = detail::start(opt.out_dir, "discover", opt.seed);
    out.manifest.inputs[opt.csv.string()] = io::digest(raw);

    double beta = 1.0;
    Json beta_report;
    if (opt.beta) {
      beta = *opt.beta;
      beta_report["source"] = "flag";
    } else {
      const mggd::DatasetBeta est = mggd::estimate_beta_dataset(table.data);
      beta_report["source"] = "estimated";
      beta_report["estimated"] = est.beta;
      Json cols = Json::object();
      for (std::size_t c = 0; c < table.header.size(); ++c) {
        const double b = est.per_column[c];
        cols[table.header[c]] = std::isfinite(b) ? Json(b) : Json(nullptr);
      }
      beta_report["per_column"] = std::move(cols);
      beta = est.beta;
      if (beta < 1.0) {
        log << "estimated beta " << beta << " is below 1; using beta = 1\n";
        beta = 1.0;
      }
    }
    beta_report["beta_used"] = beta;

    PriorKnowledge prior;
    if (opt.prior) {
      prior = io::read_prior(*opt.prior, table.header);
      out.manifest.inputs[opt.prior->string()] = io::digest(io::read_text(*opt.prior));
    }

    const FitResult fit = discover(table.data, beta, opt.config, prior);

    io::GraphDocument doc =
        io::make_document(fit.theta_hat, opt.config.w_threshold, fit.h_final, fit.converged);
    doc.variables = table.header;
    doc.manifest = "manifest.json";
    out.write("graph.json", io::dump(io::to_json(doc)));
    out.write("graph.dot", io::to_dot(doc.structure, table.header));

    out.manifest.config = config_to_json(opt.config);
    out.manifest.extra["beta"] = beta_report;
    out.manifest.extra["beta_used"] = beta;
    out.manifest.extra["converged"] = fit.converged;
    out.manifest.extra["h_final"] = fit.h_final;
    out.manifest.extra["dual_steps"] = fit.dual_steps;
    out.manifest.extra["diagnostics"] = fit.diagnostics;
    out.finish();

    log << "beta " << beta << ", " << fit.dual_steps << " dual steps, h " << fit.h_final
        << (fit.converged ? ", converged" : ", not converged") << "\n";
    if (!fit.converged) {
      log << fit.diagnostics;
      return kNotConverged;
    }
    return kSuccess;
  });
}

// --- simulate -------------------------------------------------------------------

struct SimulateOptions {
  simgen::SimConfig sim;  ///< d, n, beta, edge probabilities, seed
  bool grid = false;      ///< emit all 18 scenarios instead of one dataset
  fs::path out_dir = "abic_sim";
};

inline int cmd_simulate(const SimulateOptions& opt, std::ostream& log) {
  return detail::guarded(log, [&]() -> int {
    auto out = detail::start(opt.out_dir, opt.grid ? "simulate --grid" : "simulate", opt.sim.seed);
    std::vector<std::pair<std::string, simgen::SimConfig>> jobs;
    if (opt.grid) {
      const auto grid = simgen::scenario_grid();
      for (std::size_t k = 0; k < grid.size(); ++k) {
        simgen::SimConfig c = grid[k];
        c.p_directed = opt.sim.p_directed;
        c.p_bidirected = opt.sim.p_bidirected;
        c.permute = opt.sim.permute;
        c.seed = derive_seed(opt.sim.seed, 2 * k);
        std::ostringstream name;
        name << "scenario_" << (k < 9 ? "0" : "") << k + 1 << "_n" << c.n << "_d" << c.d << "_beta"
             << c.beta << "/";
        jobs.emplace_back(name.str(), c);
      }
    } else {
      jobs.emplace_back("", opt.sim);
    }

    Json scenarios = Json::array();
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      const auto& [prefix, c] = jobs[k];
      c.validate();
      const Parameters truth = simgen::random_admg(c);
      const std::uint64_t data_seed = derive_seed(c.seed, 1);
      const Eigen::MatrixXd X = simgen::generate_data(truth, c.n, c.beta, data_seed);
      std::ostringstream csv;
      io::write_csv(csv, io::default_names(c.d), X);
      io::GraphDocument doc = detail::truth_document(truth);
      doc.variables = io::default_names(c.d);
      doc.manifest = "manifest.json";
      out.write(prefix + "data.csv", csv.str());
      out.write(prefix + "truth.json", io::dump(io::to_json(doc)));
      scenarios.push_back({{"prefix", prefix},
                           {"n", c.n},
                           {"d", c.d},
                           {"beta", c.beta},
                           {"graph_seed", c.seed},
                           {"data_seed", data_seed}});
    }
    out.manifest.config["p_directed"] = opt.sim.p_directed;
    out.manifest.config["p_bidirected"] = opt.sim.p_bidirected;
    out.manifest.config["permute"] = opt.sim.permute;
    out.manifest.extra["scenarios"] = std::move(scenarios);
    out.finish();
    log << "wrote " << jobs.size() << " dataset(s) to " << opt.out_dir.string() << "\n";
    return kSuccess;
  });
}

// --- evaluate -------------------------------------------------------------------

struct EvaluateOptions {
  fs::path estimate;
  fs::path truth;
  std::optional<fs::path> out;  ///< scores CSV; printed to `results` when absent
};

inline int cmd_evaluate(const EvaluateOptions& opt, std::ostream& results, std::ostream& log) {
  return detail::guarded(log, [&]() -> int {
    const io::GraphDocument est = io::read_graph(opt.estimate);
    const io::GraphDocument truth = io::read_graph(opt.truth);
    if (est.structure.dim() != truth.structure.dim())
      throw InputError("estimate has d = " + std::to_string(est.structure.dim()) +
                       " but truth has d = " + std::to_string(truth.structure.dim()));
    const std::string csv = detail::scores_csv(metrics::score_all(est.structure, truth.structure));
    if (opt.out)
      io::write_file(*opt.out, csv);
    else
      results << csv;
    return kSuccess;
  });
}

// --- benchmark ------------------------------------------------------------------

enum class BetaMode { known, estimated };

struct BenchmarkOptions {
  std::vector<int> ns{100, 500, 1000};
  std::vector<int> ds{5, 10};
  std::vector<double> betas{1.0, 3.0, 5.0};
  int replicates = 10;
  std::uint64_t seed = 0;
  BetaMode beta_mode = BetaMode::known;
  double p_directed = 0.3;
  double p_bidirected = 0.2;
  OptimizerConfig config;
  int jobs = 1;
  fs::path out_dir = "abic_bench";
};

struct ReplicateRecord {
  int n = 0;
  int d = 0;
  double beta = 0.0;
  int replicate = 0;
  std::uint64_t graph_seed = 0;
  std::uint64_t data_seed = 0;
  std::string status = "ok";
  double beta_used = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int dual_steps = 0;
  double h_final = std::numeric_limits<double>::quiet_NaN();
  metrics::StructureScores scores;
};

namespace detail {

inline void run_replicate(ReplicateRecord& rec, const BenchmarkOptions& opt) {
  try {
    simgen::SimConfig c;
    c.n = rec.n;
    c.d = rec.d;
    c.beta = rec.beta;
    c.p_directed = opt.p_directed;
    c.p_bidirected = opt.p_bidirected;
    c.seed = rec.graph_seed;
    const Parameters truth = simgen::random_admg(c);
    const Eigen::MatrixXd X = simgen::generate_data(truth, c.n, c.beta, rec.data_seed);
    double beta = rec.beta;
    if (opt.beta_mode == BetaMode::estimated)
      beta = std::max(1.0, mggd::estimate_beta_dataset(X).beta);
    const FitResult fit = discover(X, beta, opt.config);
    rec.beta_used = beta;
    rec.converged = fit.converged;
    rec.dual_steps = fit.dual_steps;
    rec.h_final = fit.h_final;
    rec.scores = metrics::score_all(fit.structure, threshold(truth, 0.0));
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    rec.status = "error: " + msg;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.scores = {{nan, nan, nan}, {nan, nan, nan}, {nan, nan, nan}};
  }
}

inline std::string prf_fields(const metrics::PrfScores& p) {
  return io::format_real(p.precision) + "," + io::format_real(p.recall) + "," +
         io::format_real(p.f1);
}

inline const char* kScoreColumns =
    "skeleton_precision,skeleton_recall,skeleton_f1,arrowhead_precision,arrowhead_recall,"
    "arrowhead_f1,tail_precision,tail_recall,tail_f1";

}  // namespace detail

/// Runs simulate, discover and evaluate over every (n, d, beta) scenario.
/// Writes replicates.csv, summary.csv and manifest.json. The CSVs depend only
/// on the options, not on timing or the number of worker threads.
inline int cmd_benchmark(const BenchmarkOptions& opt, std::ostream& log) {
  return detail::guarded(log, [&]() -> int {
    if (opt.replicates < 1) throw ParameterError("replicates must be >= 1");
    if (opt.jobs < 1) throw ParameterError("jobs must be >= 1");
    if (opt.ns.empty() || opt.ds.empty() || opt.betas.empty())
      throw ParameterError("benchmark grid lists must be non-empty");
    opt.config.validate();

    std::vector<ReplicateRecord> records;
    std::uint64_t stream = 0;
    for (int n : opt.ns)
      for (int d : opt.ds)
        for (double beta : opt.betas) {
          simgen::SimConfig probe;
          probe.n = n;
          probe.d = d;
          probe.beta = beta;
          probe.p_directed = opt.p_directed;
          probe.p_bidirected = opt.p_bidirected;
          probe.validate();
          if (beta < 1.0 && opt.beta_mode == BetaMode::known)
            throw ParameterError("known-beta benchmark needs beta >= 1");
          for (int r = 0; r < opt.replicates; ++r) {
            ReplicateRecord rec;
            rec.n = n;
            rec.d = d;
            rec.beta = beta;
            rec.replicate = r;
            rec.graph_seed = derive_seed(opt.seed, stream++);
            rec.data_seed = derive_seed(opt.seed, stream++);
            records.push_back(rec);
          }
        }

    auto out = detail::start(opt.out_dir, "benchmark", opt.seed);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t k = next++; k < records.size(); k = next++)
        detail::run_replicate(records[k], opt);
    };
    const int threads = std::min<int>(opt.jobs, static_cast<int>(records.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::ostringstream rows;
    rows << "n,d,beta,replicate,graph_seed,data_seed,status,beta_used,converged,dual_steps,h_final,"
         << detail::kScoreColumns << "\n";
    for (const auto& r : records)
      rows << r.n << ',' << r.d << ',' << io::format_real(r.beta) << ',' << r.replicate << ','
           << r.graph_seed << ',' << r.data_seed << ',' << r.status << ','
           << io::format_real(r.beta_used) << ',' << (r.converged ? 1 : 0) << ',' << r.dual_steps
           << ',' << io::format_real(r.h_final) << ',' << detail::prf_fields(r.scores.skeleton)
           << ',' << detail::prf_fields(r.scores.arrowhead) << ','
           << detail::prf_fields(r.scores.tail) << '\n';

    std::ostringstream summary;
    summary << "n,d,beta,replicates,failed,converged," << detail::kScoreColumns << "\n";
    std::size_t failures = 0;
    for (std::size_t start = 0; start < records.size(); start += opt.replicates) {
      const auto& head = records[start];
      int ok = 0;
      int failed = 0;
      int converged = 0;
      std::vector<double> sums(9, 0.0);
      for (int r = 0; r < opt.replicates; ++r) {
        const auto& rec = records[start + static_cast<std::size_t>(r)];
        if (rec.status != "ok") {
          ++failed;
          continue;
        }
        ++ok;
        converged += rec.converged ? 1 : 0;
        const metrics::PrfScores* levels[3] = {&rec.scores.skeleton, &rec.scores.arrowhead,
                                               &rec.scores.tail};
        for (int l = 0; l < 3; ++l) {
          sums[3 * l] += levels[l]->precision;
          sums[3 * l + 1] += levels[l]->recall;
          sums[3 * l + 2] += levels[l]->f1;
        }
      }
      failures += static_cast<std::size_t>(failed);
      summary << head.n << ',' << head.d << ',' << io::format_real(head.beta) << ','
              << opt.replicates << ',' << failed << ',' << converged;
      for (double s : sums)
        summary << ','
                << io::format_real(ok > 0 ? s / ok : std::numeric_limits<double>::quiet_NaN());
      summary << '\n';
    }

    out.write("replicates.csv", rows.str());
    out.write("summary.csv", summary.str());
    out.manifest.config = config_to_json(opt.config);
    out.manifest.config["replicates"] = opt.replicates;
    out.manifest.config["beta_mode"] = opt.beta_mode == BetaMode::known ? "true" : "est";
    out.manifest.config["n"] = opt.ns;
    out.manifest.config["d"] = opt.ds;
    out.manifest.config["beta"] = opt.betas;
    out.manifest.config["p_directed"] = opt.p_directed;
    out.manifest.config["p_bidirected"] = opt.p_bidirected;
    out.manifest.extra["failed_replicates"] = failures;
    out.finish();
    log << records.size() << " replicates, " << failures << " failed\n";
    return kSuccess;
  });
}

// --- estimate-beta --------------------------------------------------------------

struct EstimateBetaOptions {
  fs::path csv;
  std::optional<fs::path> out;
};

/// CSV report: one row per column, then a final "max" row.
inline int cmd_estimate_beta(const EstimateBetaOptions& opt, std::ostream& results,
                             std::ostream& log) {
  return detail::guarded(log, [&]() -> int {
    const io::CsvTable table = io::read_csv(opt.csv);
    const mggd::DatasetBeta est = mggd::estimate_beta_dataset(table.data);
    std::ostringstream csv;
    csv << "column,beta\n";
    for (std::size_t c = 0; c < table.header.size(); ++c)
      csv << table.header[c] << ','
          << (std::isfinite(est.per_column[c]) ? io::format_real(est.per_column[c]) : "failed")
          << '\n';
    csv << "max," << io::format_real(est.beta) << '\n';
    if (opt.out)
      io::write_file(*opt.out, csv.str());
    else
      results << csv.str();
    return kSuccess;
  });
}

}  // namespace abic::cli
