#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <string>

#include "tomo/archive.hpp"
#include "tomo/config.hpp"
#include "tomo/errors.hpp"
#include "tomo/pipeline.hpp"
#include "tomo/planner.hpp"
#include "tomo/scene.hpp"
#include "tomo/trajectory.hpp"

namespace py = pybind11;
using namespace tomo;

namespace {

using Overrides = std::map<std::string, std::string>;

PipelineConfig make_config(const std::optional<Overrides>& overrides) {
  PipelineConfig cfg;
  if (overrides)
    for (const auto& [key, value] : *overrides) set_config_value(cfg, key, value);
  cfg.validate();
  return cfg;
}

std::vector<Point3> to_points(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw InvalidArgument("points must have shape (N, 3)");
  const auto r = a.unchecked<2>();
  std::vector<Point3> out(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t n = 0; n < r.shape(0); ++n) out[static_cast<std::size_t>(n)] = {r(n, 0), r(n, 1), r(n, 2)};
  return out;
}

py::array_t<double> from_points(std::span<const Point3> points) {
  py::array_t<double> out({static_cast<py::ssize_t>(points.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t n = 0; n < points.size(); ++n) {
    const auto i = static_cast<py::ssize_t>(n);
    w(i, 0) = points[n].x, w(i, 1) = points[n].y, w(i, 2) = points[n].z;
  }
  return out;
}

py::array_t<float> layer_array(const Layer& layer) {
  py::array_t<float> out({static_cast<py::ssize_t>(layer.rows()), static_cast<py::ssize_t>(layer.cols())});
  std::copy(layer.values().begin(), layer.values().end(), out.mutable_data());
  return out;
}

Point3 to_point(const std::array<double, 3>& p) { return {p[0], p[1], p[2]}; }

struct Map {
  Tomogram tomogram;
  std::size_t initial_slices = 0;

  const TomogramSlice& slice(std::size_t k) const {
    if (k >= tomogram.size()) throw py::index_error("slice index out of range");
    return tomogram.slices[k];
  }
};

struct TrajectoryResult {
  Trajectory trajectory;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  bool feasible = true;
};

py::dict sample_dict(const Trajectory& traj, double dt) {
  const auto samples = sample_trajectory(traj, dt);
  const auto n = static_cast<py::ssize_t>(samples.size());
  py::array_t<double> t(n), p({n, py::ssize_t{3}}), v({n, py::ssize_t{3}}), a({n, py::ssize_t{3}});
  auto tw = t.mutable_unchecked<1>();
  auto pw = p.mutable_unchecked<2>(), vw = v.mutable_unchecked<2>(), aw = a.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    tw(i) = s.t;
    for (py::ssize_t c = 0; c < 3; ++c) {
      pw(i, c) = s.position[c];
      vw(i, c) = s.velocity[c];
      aw(i, c) = s.acceleration[c];
    }
  }
  py::dict out;
  out["t"] = t;
  out["position"] = p;
  out["velocity"] = v;
  out["acceleration"] = a;
  return out;
}

}  // namespace

PYBIND11_MODULE(_tomoplan, m) {
  m.doc() = "Layered tomogram maps, multi-slice A* and trajectory smoothing";

  auto base = py::register_exception<Error>(m, "TomoError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<FormatError>(m, "FormatError", base);
  // Bad arguments are both library errors and ValueErrors.
  auto value_error = [&](const char* name) {
    py::object cls = py::reinterpret_steal<py::object>(PyErr_NewException(
        (std::string("tomoplan._tomoplan.") + name).c_str(), py::make_tuple(base, py::handle(PyExc_ValueError)).ptr(),
        nullptr));
    m.attr(name) = cls;
    return cls.release().ptr();
  };
  static PyObject* invalid_argument = value_error("InvalidArgument");
  static PyObject* out_of_bounds = value_error("OutOfBounds");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InvalidArgument& e) {
      PyErr_SetString(invalid_argument, e.what());
    } catch (const OutOfBounds& e) {
      PyErr_SetString(out_of_bounds, e.what());
    }
  });
  auto planning = py::register_exception<PlanningError>(m, "PlanningError", base);
  py::register_exception<UnsnappableError>(m, "UnsnappableError", planning);
  py::register_exception<NoPathError>(m, "NoPathError", planning);
  py::register_exception<DegeneratePathError>(m, "DegeneratePathError", base);

  m.def(
      "generate_scene",
      [](const std::string& kind, double length, double width, double height, double density, double noise,
         std::uint64_t seed, double turns, double rise_per_turn, double inner_radius, double step_height) {
        SceneSpec s;
        s.kind = parse_scene_kind(kind);
        s.length = length, s.width = width, s.height = height, s.density = density, s.noise = noise, s.seed = seed;
        s.turns = turns, s.rise_per_turn = rise_per_turn, s.inner_radius = inner_radius, s.step_height = step_height;
        const auto cloud = generate_scene(s);
        return from_points(cloud.points());
      },
      py::arg("kind") = "flat_plane", py::kw_only(), py::arg("length") = 10.0, py::arg("width") = 10.0,
      py::arg("height") = 3.0, py::arg("density") = 400.0, py::arg("noise") = 0.0, py::arg("seed") = 0,
      py::arg("turns") = 2.0, py::arg("rise_per_turn") = 3.0, py::arg("inner_radius") = 0.4,
      py::arg("step_height") = 0.15, "Procedural point cloud as an (N, 3) float64 array.");

  m.def(
      "load_cloud",
      [](const std::filesystem::path& path, const std::optional<std::string>& format) {
        const auto f = format ? parse_cloud_format(*format) : format_from_extension(path);
        return from_points(load_cloud(path, f).points());
      },
      py::arg("path"), py::arg("format") = py::none());
  m.def(
      "save_cloud",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> points, const std::filesystem::path& path,
         const std::optional<std::string>& format) {
        const auto f = format ? parse_cloud_format(*format) : format_from_extension(path);
        save_cloud(PointCloud(to_points(points)), path, f);
      },
      py::arg("points"), py::arg("path"), py::arg("format") = py::none());

  py::class_<Map>(m, "Map")
      .def_property_readonly("slices", [](const Map& map) { return map.tomogram.size(); })
      .def_property_readonly("initial_slices", [](const Map& map) { return map.initial_slices; })
      .def_property_readonly("shape", [](const Map& map) { return py::make_tuple(map.tomogram.grid.rows, map.tomogram.grid.cols); })
      .def_property_readonly("resolution", [](const Map& map) { return map.tomogram.grid.resolution; })
      .def_property_readonly("origin", [](const Map& map) { return py::make_tuple(map.tomogram.grid.origin_x, map.tomogram.grid.origin_y); })
      .def_property_readonly("plane_heights",
                             [](const Map& map) {
                               std::vector<double> h;
                               for (const auto& s : map.tomogram.slices) h.push_back(s.plane_height);
                               return h;
                             })
      .def("ground", [](const Map& map, std::size_t k) { return layer_array(map.slice(k).ground); }, py::arg("k"))
      .def("ceiling", [](const Map& map, std::size_t k) { return layer_array(map.slice(k).ceiling); }, py::arg("k"))
      .def(
          "cost",
          [](const Map& map, std::size_t k) {
            const auto& s = map.slice(k);
            if (!s.cost) throw InvalidArgument("map has no cost layers");
            return layer_array(*s.cost);
          },
          py::arg("k"))
      .def("save", [](const Map& map, const std::filesystem::path& path) { save_archive(map.tomogram, path); },
           py::arg("path"))
      .def("to_bytes",
           [](const Map& map) {
             const auto bytes = encode_archive(map.tomogram);
             return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
           })
      .def("__repr__", [](const Map& map) {
        return "<tomoplan.Map " + std::to_string(map.tomogram.size()) + " slices, " +
               std::to_string(map.tomogram.grid.rows) + "x" + std::to_string(map.tomogram.grid.cols) + ">";
      });

  m.def(
      "build_map",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> points, const std::optional<Overrides>& config,
         bool simplify) {
        const auto cfg = make_config(config);
        PointCloud cloud(to_points(points));
        py::gil_scoped_release release;
        auto built = tomo::build_map(cloud, cfg, simplify);
        return Map{std::move(built.tomogram), built.initial_slices};
      },
      py::arg("points"), py::arg("config") = py::none(), py::arg("simplify") = true,
      "Build, evaluate and (optionally) simplify a map. `config` maps 'section.key' to a value.");
  m.def(
      "load_map",
      [](const std::filesystem::path& path) {
        auto t = load_archive(path);
        const auto n = t.size();
        return Map{std::move(t), n};
      },
      py::arg("path"));

  py::class_<PathResult>(m, "Path")
      .def_property_readonly("waypoints",
                             [](const PathResult& p) {
                               std::vector<Point3> pts;
                               for (const auto& w : p.waypoints) pts.push_back({w.x, w.y, w.z});
                               return from_points(pts);
                             })
      .def_property_readonly("slices",
                             [](const PathResult& p) {
                               std::vector<std::size_t> k;
                               for (const auto& w : p.waypoints) k.push_back(w.k);
                               return k;
                             })
      .def_readonly("total_cost", &PathResult::total_cost)
      .def_readonly("expanded", &PathResult::expanded)
      .def_property_readonly("length", &PathResult::length)
      .def("__len__", [](const PathResult& p) { return p.waypoints.size(); });

  m.def(
      "plan",
      [](const Map& map, const std::array<double, 3>& start, const std::array<double, 3>& goal,
         const std::optional<Overrides>& config) {
        const auto cfg = make_config(config);
        py::gil_scoped_release release;
        return plan_path(map.tomogram, to_point(start), to_point(goal), cfg.planner_options());
      },
      py::arg("map"), py::arg("start"), py::arg("goal"), py::arg("config") = py::none(),
      "Least-cost path between two ground points; raises NoPathError or UnsnappableError.");

  m.def(
      "default_endpoints",
      [](const Map& map) -> std::optional<py::tuple> {
        const auto ends = default_endpoints(map.tomogram, PipelineConfig{});
        if (!ends) return std::nullopt;
        return py::make_tuple(std::array{ends->first.x, ends->first.y, ends->first.z},
                              std::array{ends->second.x, ends->second.y, ends->second.z});
      },
      py::arg("map"));

  py::class_<TrajectoryResult>(m, "Trajectory")
      .def_property_readonly("duration", [](const TrajectoryResult& r) { return r.trajectory.duration(); })
      .def_property_readonly("pieces", [](const TrajectoryResult& r) { return r.trajectory.size(); })
      .def_readonly("initial_objective", &TrajectoryResult::initial_objective)
      .def_readonly("final_objective", &TrajectoryResult::final_objective)
      .def_readonly("iterations", &TrajectoryResult::iterations)
      .def_readonly("feasible", &TrajectoryResult::feasible)
      .def(
          "eval",
          [](const TrajectoryResult& r, double t, int order) {
            const Eigen::Vector3d q = r.trajectory.eval(t, order);
            return std::array{q.x(), q.y(), q.z()};
          },
          py::arg("t"), py::arg("order") = 0)
      .def("continuity_residual", [](const TrajectoryResult& r, int order) { return r.trajectory.continuity_residual(order); },
           py::arg("order"))
      .def("sample", [](const TrajectoryResult& r, double dt) { return sample_dict(r.trajectory, dt); }, py::arg("dt"),
           "Dict of t, position, velocity and acceleration arrays at step dt plus the final time.");

  m.def(
      "optimize",
      [](const Map& map, const PathResult& path, const std::optional<Overrides>& config, bool strict) {
        const auto cfg = make_config(config).trajectory_options();
        const auto start = rest_state(path.waypoints.front(), cfg.d_ref);
        const auto goal = rest_state(path.waypoints.back(), cfg.d_ref);
        TrajectoryResult out;
        OptimizationReport report;
        {
          py::gil_scoped_release release;
          try {
            report = optimize_trajectory(map.tomogram, path, start, goal, cfg);
          } catch (const InfeasibleTrajectoryError& e) {
            if (strict) throw;
            report = e.report();
            out.feasible = false;
          }
        }
        out.trajectory = std::move(report.trajectory);
        out.initial_objective = report.initial_objective;
        out.final_objective = report.final_objective;
        out.iterations = report.iterations;
        return out;
      },
      py::arg("map"), py::arg("path"), py::arg("config") = py::none(), py::arg("strict") = false,
      "Smooth a path into a quintic trajectory, rest to rest at ground + d_ref. With strict=True an "
      "infeasible result raises InfeasibleTrajectoryError; otherwise it is returned with feasible=False.");

  py::register_exception<InfeasibleTrajectoryError>(m, "InfeasibleTrajectoryError", base);
}
