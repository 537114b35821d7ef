#include <CLI11.hpp>

#include "percon/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"perimeter-control toolkit: data collection, region building, "
               "closed-loop runs and post-hoc analysis"};
  app.require_subcommand(1);

  percon::cli::CollectArgs collect;
  auto* c = app.add_subcommand("collect", "record an excitation trajectory");
  c->add_option("--config", collect.config_path, "scenario file")->required();
  c->add_option("--out", collect.out_csv, "trajectory csv")->required();
  c->add_option("--steps", collect.steps, "duty cycles to record");
  auto* seed_opt = c->add_option("--seed", collect.seed, "excitation seed");

  percon::cli::RunArgs run;
  auto* r = app.add_subcommand("run", "closed-loop run under one controller");
  r->add_option("--config", run.config_path, "scenario file")->required();
  r->add_option("--controller", run.controller, "baseline | mpc | deepc")->required();
  r->add_option("--data", run.data_csv, "offline trajectory csv (deepc)");
  r->add_option("--reference-run", run.reference_run,
                "fit the tracking reference from this run directory");
  r->add_option("--period", run.period, "replan every this many duty cycles");
  r->add_option("--out", run.out_dir, "run record directory");

  percon::cli::FitMfdArgs fit;
  auto* f = app.add_subcommand("fit-mfd", "fit a flow/density curve from scatter");
  f->add_option("--in", fit.in_csv, "scatter csv with density,flow")->required();
  f->add_option("--out-curve", fit.out_curve, "sampled curve csv");
  f->add_option("--out-summary", fit.out_summary, "summary csv");

  percon::cli::PartitionArgs part;
  auto* p = app.add_subcommand("partition", "group roads into homogeneous regions");
  p->add_option("--roads", part.roads_csv, "road_id,density csv")->required();
  p->add_option("--edges", part.edges_csv, "road_a,road_b csv")->required();
  p->add_option("--out", part.out_csv, "road_id,region csv")->required();
  p->add_option("--regions", part.num_regions, "number of regions");
  p->add_option("--snake-depth", part.snake_depth, "snake length (default n/2)");
  p->add_option("--decay", part.decay, "similarity decay in (0,1)");
  p->add_option("--seed", part.seed, "factorization seed");

  percon::cli::AnalyzeArgs analyze;
  auto* a = app.add_subcommand("analyze", "input patterns and metrics of a run");
  a->add_option("--run", analyze.run_dir, "run record directory")->required();
  a->add_option("--baseline", analyze.baseline_dir, "second run for the curve table");
  a->add_option("--out", analyze.out_dir, "output directory")->required();
  a->add_option("--components", analyze.components, "retained components");

  CLI11_PARSE(app, argc, argv);

  if (c->parsed()) {
    collect.seed_set = seed_opt->count() > 0;
    return percon::cli::cmd_collect(collect);
  }
  if (r->parsed()) return percon::cli::cmd_run(run);
  if (f->parsed()) return percon::cli::cmd_fit_mfd(fit);
  if (p->parsed()) return percon::cli::cmd_partition(part);
  if (a->parsed()) return percon::cli::cmd_analyze(analyze);
  return percon::cli::kConfigError;
}
