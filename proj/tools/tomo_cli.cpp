// tomo: scene generation, map building, planning, export and benchmarks.

#include <array>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/crc.hpp>
#include <fmt/format.h>

#include "tomo/archive.hpp"
#include "tomo/cloud_io.hpp"
#include "tomo/config.hpp"
#include "tomo/errors.hpp"
#include "tomo/export.hpp"
#include "tomo/pipeline.hpp"
#include "tomo/planner.hpp"
#include "tomo/scene.hpp"
#include "tomo/trajectory.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 2, kIo = 3, kNoPath = 4, kInfeasible = 5 };

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
  std::optional<unsigned> threads;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "INI configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "override, e.g. --set traversability.theta_p=1.0");
    cmd->add_option("--threads", threads, "worker threads (0 = all cores)");
  }

  tomo::PipelineConfig resolve() const {
    tomo::PipelineConfig cfg;
    try {
      if (!path.empty()) cfg = tomo::load_config(path);
    } catch (const tomo::FormatError& e) {
      throw tomo::InvalidArgument(e.what());
    }
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw tomo::InvalidArgument(fmt::format("override '{}' lacks '='", o));
      tomo::set_config_value(cfg, o.substr(0, eq), o.substr(eq + 1));
    }
    if (threads) cfg.threads = *threads;
    cfg.validate();
    return cfg;
  }
};

tomo::Point3 to_point(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

// --- gen ---------------------------------------------------------------------

struct GenArgs {
  std::string kind = "flat_plane";
  tomo::SceneSpec spec;
  std::string out;
  std::string format;
};

int run_gen(const GenArgs& a) {
  tomo::SceneSpec spec = a.spec;
  spec.kind = tomo::parse_scene_kind(a.kind);
  const auto format = a.format.empty() ? tomo::format_from_extension(a.out) : tomo::parse_cloud_format(a.format);
  const auto cloud = tomo::generate_scene(spec);
  tomo::save_cloud(cloud, a.out, format);
  fmt::print("wrote {} points to {}\n", cloud.size(), a.out);
  return kOk;
}

// --- build -------------------------------------------------------------------

struct BuildArgs {
  std::string cloud;
  std::string format;
  std::string out;
  bool no_simplify = false;
  ConfigArgs config;
};

int run_build(const BuildArgs& a) {
  const auto cfg = a.config.resolve();
  const auto format = a.format.empty() ? tomo::format_from_extension(a.cloud) : tomo::parse_cloud_format(a.format);
  auto t0 = std::chrono::steady_clock::now();
  const auto cloud = tomo::load_cloud(a.cloud, format);
  const double load_ms = tomo::elapsed_ms(t0);
  const auto map = tomo::build_map(cloud, cfg, !a.no_simplify);
  tomo::save_archive(map.tomogram, a.out);
  fmt::print("points: {} ({} invalid dropped)\n", cloud.size(), cloud.dropped_invalid());
  fmt::print("grid: {} x {} at {} m\n", map.tomogram.grid.cols, map.tomogram.grid.rows, map.tomogram.grid.resolution);
  fmt::print("slices: {} (from {})\n", map.tomogram.size(), map.initial_slices);
  fmt::print("load: {:.2f} ms\nTp: {:.2f} ms\nTe: {:.2f} ms\n", load_ms, map.build_ms, map.evaluate_ms);
  return kOk;
}

// --- plan --------------------------------------------------------------------

struct PlanArgs {
  std::string map;
  std::vector<double> start, goal;
  std::string path_json, path_csv, traj_json, traj_csv;
  double dt = 0.1;
  bool no_smooth = false;
  ConfigArgs config;
};

int run_plan(const PlanArgs& a) {
  const auto cfg = a.config.resolve();
  const auto tomogram = tomo::load_archive(a.map);
  if (!tomogram.evaluated()) throw tomo::InvalidArgument("archive has no cost layers; run build first");
  const tomo::Planner planner(tomogram, cfg.planner_options());
  auto t0 = std::chrono::steady_clock::now();
  const auto path = planner.plan(to_point(a.start), to_point(a.goal));
  const double ts = tomo::elapsed_ms(t0);
  std::size_t slices_used = 0;
  {
    std::vector<bool> seen(tomogram.size(), false);
    for (const auto& w : path.waypoints)
      if (!seen[w.k]) seen[w.k] = true, ++slices_used;
  }
  fmt::print("Ts: {:.2f} ms\nNs: {}\n", ts, path.expanded);
  fmt::print("waypoints: {} over {} slice(s), length {:.3f} m, total cost {:.6g}\n", path.waypoints.size(),
             slices_used, path.length(), path.total_cost);
  if (!a.path_json.empty()) tomo::write_text(a.path_json, tomo::path_to_json(path));
  if (!a.path_csv.empty()) tomo::write_text(a.path_csv, tomo::path_to_csv(path));
  if (a.no_smooth) return kOk;

  const auto opt = cfg.trajectory_options();
  const auto start = tomo::rest_state(path.waypoints.front(), opt.d_ref);
  const auto goal = tomo::rest_state(path.waypoints.back(), opt.d_ref);
  t0 = std::chrono::steady_clock::now();
  const auto report = tomo::optimize_trajectory(tomogram, path, start, goal, opt);
  fmt::print("To: {:.2f} ms\n", tomo::elapsed_ms(t0));
  fmt::print("trajectory: {} piece(s), duration {:.3f} s, objective {:.6g} -> {:.6g} in {} iterations\n",
             report.trajectory.size(), report.trajectory.duration(), report.initial_objective,
             report.final_objective, report.iterations);
  if (!a.traj_json.empty()) tomo::write_text(a.traj_json, tomo::trajectory_to_json(report.trajectory));
  if (!a.traj_csv.empty()) tomo::write_text(a.traj_csv, tomo::trajectory_to_csv(report.trajectory, a.dt));
  return kOk;
}

// --- export ------------------------------------------------------------------

struct ExportArgs {
  std::string map;
  std::string what;
  std::string slice = "all";
  std::string out;
  double c_barrier = 50.0;
};

int run_export(const ExportArgs& a) {
  const auto tomogram = tomo::load_archive(a.map);
  std::vector<std::size_t> which;
  if (a.slice == "all") {
    for (std::size_t k = 0; k < tomogram.size(); ++k) which.push_back(k);
  } else {
    std::size_t k = 0;
    try {
      k = std::stoul(a.slice);
    } catch (const std::exception&) {
      throw tomo::InvalidArgument(fmt::format("slice must be an index or 'all', got '{}'", a.slice));
    }
    if (k >= tomogram.size())
      throw tomo::OutOfBounds(fmt::format("slice {} out of range (archive has {})", k, tomogram.size()));
    which.push_back(k);
  }

  if (a.what == "merged_cloud") {
    tomo::Tomogram subset{tomogram.grid, tomogram.z_min, tomogram.slice_interval, {}};
    for (auto k : which) subset.slices.push_back(tomogram.slices[k]);
    const auto points = tomo::merged_cloud(subset, a.c_barrier);
    tomo::write_text(a.out, tomo::encode_cost_ply(points));
    fmt::print("wrote {} points to {}\n", points.size(), a.out);
    return kOk;
  }
  const bool costmap = a.what == "costmap_pgm";
  if (!costmap && a.what != "ground_pgm") throw tomo::InvalidArgument(fmt::format("unknown export '{}'", a.what));
  if (costmap && !tomogram.evaluated()) throw tomo::InvalidArgument("archive has no cost layers");
  for (auto k : which) {
    const auto& s = tomogram.slices[k];
    const auto img = costmap ? tomo::render_costmap(*s.cost, a.c_barrier) : tomo::render_ground(s.ground);
    std::string file = a.out;
    if (which.size() > 1 || a.slice == "all") {
      const auto dot = file.rfind('.');
      const std::string stem = dot == std::string::npos ? file : file.substr(0, dot);
      file = fmt::format("{}_{}.pgm", stem, k);
    }
    tomo::save_pgm(img, file);
    fmt::print("wrote {}\n", file);
  }
  return kOk;
}

// --- bench -------------------------------------------------------------------

struct BenchArgs {
  std::vector<std::string> kinds{"flat_plane", "spiral_stair", "two_floor_building", "ramp_over_tunnel",
                                 "random_multilayer"};
  std::vector<unsigned> threads{1, 8};
  double density = 400.0;
  std::uint64_t seed = 0;
  std::string csv;
  ConfigArgs config;
};

int run_bench(const BenchArgs& a) {
  auto base = a.config.resolve();
  std::string csv = "scene,threads,Tp,Size,Te,Ts,Ns,To,Tall,checksum\n";
  fmt::print("{:<20} {:>3} {:>10} {:>8} {:>10} {:>9} {:>7} {:>10} {:>10}  {}\n", "scene", "thr", "Tp[ms]",
             "Size[MB]", "Te[ms]", "Ts[ms]", "Ns", "To[ms]", "Tall[ms]", "checksum");
  for (const auto& kind : a.kinds) {
    tomo::SceneSpec spec;
    spec.kind = tomo::parse_scene_kind(kind);
    spec.density = a.density;
    spec.seed = a.seed;
    const auto cloud = tomo::generate_scene(spec);
    for (unsigned threads : a.threads) {
      auto cfg = base;
      cfg.threads = threads;
      const auto map = tomo::build_map(cloud, cfg);
      const auto archive = tomo::encode_archive(map.tomogram);
      boost::crc_32_type crc;
      crc.process_bytes(archive.data(), archive.size());

      double ts = 0.0, to = 0.0;
      std::string ns = "-";
      if (const auto ends = tomo::default_endpoints(map.tomogram, cfg)) {
        const tomo::Planner planner(map.tomogram, cfg.planner_options());
        try {
          auto t0 = std::chrono::steady_clock::now();
          const auto path = planner.plan(ends->first, ends->second);
          ts = tomo::elapsed_ms(t0);
          ns = std::to_string(path.expanded);
          const auto text = tomo::path_to_json(path);
          crc.process_bytes(text.data(), text.size());
          const auto opt = cfg.trajectory_options();
          t0 = std::chrono::steady_clock::now();
          try {
            const auto report = tomo::optimize_trajectory(map.tomogram, path, tomo::rest_state(path.waypoints.front(), opt.d_ref),
                                                          tomo::rest_state(path.waypoints.back(), opt.d_ref), opt);
            const auto traj = tomo::trajectory_to_json(report.trajectory);
            crc.process_bytes(traj.data(), traj.size());
          } catch (const tomo::InfeasibleTrajectoryError& e) {
            const auto traj = tomo::trajectory_to_json(e.report().trajectory);
            crc.process_bytes(traj.data(), traj.size());
          }
          to = tomo::elapsed_ms(t0);
        } catch (const tomo::PlanningError&) {
        }
      }
      const double size_mb = static_cast<double>(archive.size()) / 1e6;
      const double tall = map.build_ms + map.evaluate_ms + ts + to;
      const std::string sum = fmt::format("{:08x}", crc.checksum());
      fmt::print("{:<20} {:>3} {:>10.2f} {:>8.3f} {:>10.2f} {:>9.2f} {:>7} {:>10.2f} {:>10.2f}  {}\n", kind, threads,
                 map.build_ms, size_mb, map.evaluate_ms, ts, ns, to, tall, sum);
      csv += fmt::format("{},{},{:.2f},{:.6f},{:.2f},{:.2f},{},{:.2f},{:.2f},{}\n", kind, threads, map.build_ms,
                         size_mb, map.evaluate_ms, ts, ns, to, tall, sum);
    }
  }
  if (!a.csv.empty()) tomo::write_text(a.csv, csv);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilayer tomogram mapping and planning"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic point cloud");
  gen_cmd->add_option("--kind", gen.kind, "flat_plane | spiral_stair | two_floor_building | ramp_over_tunnel | random_multilayer");
  gen_cmd->add_option("--seed", gen.spec.seed);
  gen_cmd->add_option("--length", gen.spec.length);
  gen_cmd->add_option("--width", gen.spec.width);
  gen_cmd->add_option("--height", gen.spec.height);
  gen_cmd->add_option("--density", gen.spec.density, "points per square metre");
  gen_cmd->add_option("--noise", gen.spec.noise);
  gen_cmd->add_option("--turns", gen.spec.turns);
  gen_cmd->add_option("--rise-per-turn", gen.spec.rise_per_turn);
  gen_cmd->add_option("--inner-radius", gen.spec.inner_radius);
  gen_cmd->add_option("--step-height", gen.spec.step_height);
  gen_cmd->add_option("--format", gen.format, "pcd_ascii | pcd_binary | ply_ascii | xyz_text");
  gen_cmd->add_option("--out", gen.out)->required();

  BuildArgs build;
  auto* build_cmd = app.add_subcommand("build", "build, evaluate and simplify a tomogram archive");
  build_cmd->add_option("--cloud", build.cloud)->required();
  build_cmd->add_option("--format", build.format);
  build_cmd->add_option("--out", build.out)->required();
  build_cmd->add_flag("--no-simplify", build.no_simplify);
  build.config.attach(build_cmd);

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "search a path and optimize a trajectory");
  plan_cmd->add_option("--map", plan.map)->required();
  plan_cmd->add_option("--start", plan.start, "x,y,z")->required()->expected(3)->delimiter(',');
  plan_cmd->add_option("--goal", plan.goal, "x,y,z")->required()->expected(3)->delimiter(',');
  plan_cmd->add_option("--path-json", plan.path_json);
  plan_cmd->add_option("--path-csv", plan.path_csv);
  plan_cmd->add_option("--trajectory-json", plan.traj_json);
  plan_cmd->add_option("--trajectory-csv", plan.traj_csv);
  plan_cmd->add_option("--dt", plan.dt, "trajectory CSV step [s]")->check(CLI::PositiveNumber);
  plan_cmd->add_flag("--no-smooth", plan.no_smooth);
  plan.config.attach(plan_cmd);

  ExportArgs exp;
  auto* export_cmd = app.add_subcommand("export", "render layers or the merged traversable cloud");
  export_cmd->add_option("--map", exp.map)->required();
  export_cmd->add_option("--what", exp.what)->required()->check(
      CLI::IsMember({"costmap_pgm", "ground_pgm", "merged_cloud"}));
  export_cmd->add_option("--slice", exp.slice, "slice index or 'all'");
  export_cmd->add_option("--c-barrier", exp.c_barrier)->check(CLI::PositiveNumber);
  export_cmd->add_option("--out", exp.out)->required();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "time the pipeline over generated scenes");
  bench_cmd->add_option("--kinds", bench.kinds)->delimiter(',');
  bench_cmd->add_option("--thread-counts", bench.threads)->delimiter(',');
  bench_cmd->add_option("--density", bench.density)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed);
  bench_cmd->add_option("--csv", bench.csv);
  bench.config.attach(bench_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*build_cmd) return run_build(build);
    if (*plan_cmd) return run_plan(plan);
    if (*export_cmd) return run_export(exp);
    if (*bench_cmd) return run_bench(bench);
  } catch (const tomo::UnsnappableError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsage;
  } catch (const tomo::PlanningError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kNoPath;
  } catch (const tomo::InfeasibleTrajectoryError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kInfeasible;
  } catch (const tomo::DegeneratePathError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kInfeasible;
  } catch (const tomo::IoError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kIo;
  } catch (const tomo::FormatError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kIo;
  } catch (const tomo::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsage;
  }
  return kUsage;
}
