#pragma once

#include <filesystem>
#include <iostream>
#include <string>

#include "percon/analysis.hpp"
#include "percon/harness.hpp"
#include "percon/mfd.hpp"
#include "percon/partition.hpp"

namespace percon::cli {

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kConfigError = 2;

struct CollectArgs {
  std::string config_path;
  std::string out_csv;
  int steps = 0;  // 0 means horizon + prediction margin from the config
  std::uint64_t seed = 0;
  bool seed_set = false;
};

struct RunArgs {
  std::string config_path;
  std::string controller = "baseline";
  std::string data_csv;
  std::string reference_run;  // fit the tracking reference from this run
  int period = 1;
  std::string out_dir;
};

struct FitMfdArgs {
  std::string in_csv;
  std::string out_curve;
  std::string out_summary;
};

struct PartitionArgs {
  std::string roads_csv;
  std::string edges_csv;
  std::string out_csv;
  int num_regions = 2;
  int snake_depth = 0;  // 0 means half the road count
  double decay = 0.9;
  std::uint64_t seed = 0;
};

struct AnalyzeArgs {
  std::string run_dir;
  std::string baseline_dir;  // optional second run for the dual-curve table
  std::string out_dir;
  int components = 0;  // 0 means every actuator
};

namespace detail {

inline std::vector<std::pair<double, double>> region_scatter(const RunRecord& rec,
                                                             int region) {
  std::vector<std::pair<double, double>> pts;
  for (size_t k = 0; k < rec.density.size(); ++k)
    pts.emplace_back(rec.density[k](region), rec.flow[k](region));
  return pts;
}

/// Per-region curve estimates from a finished run.
inline std::vector<MfdEstimate> estimates_from_run(const std::string& run_dir) {
  RunRecord rec = read_run_record(run_dir);
  std::vector<MfdEstimate> ests;
  for (int i = 0; i < rec.num_regions; ++i)
    ests.push_back(fit_mfd(region_scatter(rec, i)));
  return ests;
}

}  // namespace detail

inline int cmd_collect(const CollectArgs& args) {
  try {
    ScenarioConfig cfg = load_scenario(args.config_path);
    const int steps = args.steps > 0
                          ? args.steps
                          : cfg.sim.horizon_cycles + cfg.deepc.t_f;
    const std::uint64_t seed = args.seed_set ? args.seed : cfg.sim.seed;
    CollectResult r = collect_data(cfg, steps, seed);
    write_trajectory_csv(args.out_csv, r.trajectory);
    std::cout << "result command=collect steps=" << steps
              << " rank_full=" << r.full_signal.rank
              << " rank_full_expected=" << r.full_signal.expected
              << " rank_controllable=" << r.controllable_rank
              << " rank_controllable_needed=" << r.controllable_needed
              << " excitation_ok=" << (r.excitation_ok ? 1 : 0) << "\n";
    if (!r.excitation_ok) {
      std::cerr << "collect: excitation check failed, rank " << r.controllable_rank
                << " below " << r.controllable_needed << "\n";
      return kDomainError;
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "collect: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "collect: " << e.what() << "\n";
    return kDomainError;
  }
}

inline int cmd_run(const RunArgs& args) {
  try {
    ScenarioConfig cfg = load_scenario(args.config_path);
    ControllerKind kind = controller_from_string(args.controller);
    RunOptions opts;
    opts.period_multiplier = args.period;
    if (kind == ControllerKind::deepc) {
      if (args.data_csv.empty())
        throw ConfigError("run: the predictive controller needs --data");
      opts.data = read_trajectory_csv(args.data_csv);
    }
    if (!args.reference_run.empty()) {
      std::vector<MfdEstimate> ests = detail::estimates_from_run(args.reference_run);
      Vector rho_cr(static_cast<Eigen::Index>(ests.size()));
      for (size_t i = 0; i < ests.size(); ++i)
        rho_cr(static_cast<Eigen::Index>(i)) = ests[i].rho_cr;
      opts.rho_cr_override = rho_cr;
      opts.fitted_mfd = ests;
    }
    RunRecord rec = run_closed_loop(cfg, kind, opts);
    if (!args.out_dir.empty()) write_run_record(args.out_dir, rec);
    MetricsSummary s = summarize_run(rec);
    int degraded = 0;
    for (const auto& d : rec.solver_log) degraded += d.degraded;
    std::cout << "result command=run controller=" << args.controller
              << " period=" << args.period
              << " total_time_spent_veh_h=" << format_double(s.total_time_spent_veh_h)
              << " trips_completed=" << format_double(s.trips_completed)
              << " mean_travel_time_min="
              << (s.mean_travel_time_min ? format_double(*s.mean_travel_time_min)
                                         : std::string("absent"))
              << " gridlock=" << (s.gridlock ? 1 : 0) << " degraded_steps=" << degraded
              << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "run: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "run: " << e.what() << "\n";
    return kDomainError;
  }
}

inline int cmd_fit_mfd(const FitMfdArgs& args) {
  try {
    auto pts = read_mfd_scatter_csv(args.in_csv);
    MfdEstimate est = fit_mfd(pts);
    double rho_hi = 0.0;
    for (const auto& [rho, flow] : pts) rho_hi = std::max(rho_hi, rho);
    if (!args.out_curve.empty())
      write_mfd_curve_csv(args.out_curve, est, est.rho_max.value_or(rho_hi));
    if (!args.out_summary.empty()) write_mfd_summary_csv(args.out_summary, est);
    std::cout << "result command=fit-mfd rho_cr=" << format_double(est.rho_cr)
              << " rho_max="
              << (est.rho_max ? format_double(*est.rho_max) : std::string("absent"))
              << " rmse=" << format_double(est.rmse) << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "fit-mfd: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "fit-mfd: " << e.what() << "\n";
    return kDomainError;
  }
}

inline int cmd_partition(const PartitionArgs& args) {
  try {
    CsvTable roads = read_csv(args.roads_csv);
    const int cid = roads.column("road_id");
    const int cd = roads.column("density");
    RoadGraph graph;
    graph.density.resize(roads.rows.size());
    graph.adjacency.assign(roads.rows.size(), {});
    for (size_t r = 0; r < roads.rows.size(); ++r) {
      const int line = static_cast<int>(r) + 2;
      const auto id = parse_long(roads.rows[r][cid], args.roads_csv, line);
      if (id < 0 || id >= static_cast<long>(roads.rows.size()))
        throw ConfigError(args.roads_csv + ":" + std::to_string(line) +
                          ": road ids must be dense in [0, n)");
      graph.density[static_cast<size_t>(id)] =
          parse_double(roads.rows[r][cd], args.roads_csv, line);
    }
    CsvTable edges = read_csv(args.edges_csv);
    const int ca = edges.column("road_a");
    const int cb = edges.column("road_b");
    for (size_t r = 0; r < edges.rows.size(); ++r) {
      const int line = static_cast<int>(r) + 2;
      const auto a = parse_long(edges.rows[r][ca], args.edges_csv, line);
      const auto b = parse_long(edges.rows[r][cb], args.edges_csv, line);
      graph.adjacency[static_cast<size_t>(a)].push_back(static_cast<int>(b));
      graph.adjacency[static_cast<size_t>(b)].push_back(static_cast<int>(a));
    }
    const int depth =
        args.snake_depth > 0 ? args.snake_depth : std::max(1, graph.num_roads() / 2);
    SnakeSet snakes = run_snakes(graph, depth);
    Matrix w = compute_similarity(snakes, args.decay, graph.num_roads());
    PartitionResult part = symnmf_cluster(w, args.num_regions, args.seed, graph);
    CsvWriter out(args.out_csv);
    out.row({"road_id", "region"});
    for (size_t i = 0; i < part.assignment.size(); ++i)
      out.row({std::to_string(i), std::to_string(part.assignment[i])});
    std::cout << "result command=partition roads=" << graph.num_roads()
              << " regions=" << args.num_regions << " snake_depth=" << depth
              << " truncated_snakes=" << snakes.truncated
              << " repairs=" << part.repairs << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "partition: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "partition: " << e.what() << "\n";
    return kDomainError;
  }
}

inline int cmd_analyze(const AnalyzeArgs& args) {
  try {
    namespace fs = std::filesystem;
    RunRecord rec = read_run_record(args.run_dir);
    fs::create_directories(args.out_dir);

    Matrix lambda_log(rec.num_actuators, static_cast<int>(rec.lambda_applied.size()));
    for (size_t c = 0; c < rec.lambda_applied.size(); ++c)
      lambda_log.col(static_cast<int>(c)) = rec.lambda_applied[c];
    const int k = args.components > 0
                      ? args.components
                      : std::min<int>(rec.num_actuators,
                                      static_cast<int>(lambda_log.cols()));
    PcaResult p = pca(lambda_log, k);
    write_pca_components_csv(args.out_dir + "/pca_components.csv", p);
    write_loadings_csv(args.out_dir + "/loadings.csv", p);

    MetricsSummary s = summarize_run(rec);
    write_metrics_summary_csv(args.out_dir + "/metrics_summary.csv", s);

    std::vector<std::pair<std::string, MfdEstimate>> curves;
    for (int region = 0; region < rec.num_regions; ++region) {
      curves.emplace_back(rec.controller + "_region" + std::to_string(region),
                          fit_mfd(detail::region_scatter(rec, region)));
    }
    if (!args.baseline_dir.empty()) {
      RunRecord base = read_run_record(args.baseline_dir);
      for (int region = 0; region < base.num_regions; ++region)
        curves.emplace_back(base.controller + "_region" + std::to_string(region),
                            fit_mfd(detail::region_scatter(base, region)));
    }
    write_mfd_comparison_csv(args.out_dir + "/mfd_comparison.csv", curves);

    std::cout << "result command=analyze components=" << k
              << " evr1=" << format_double(p.explained_variance_ratio(0))
              << " gridlock=" << (s.gridlock ? 1 : 0) << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "analyze: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "analyze: " << e.what() << "\n";
    return kDomainError;
  }
}

}  // namespace percon::cli
