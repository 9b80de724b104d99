#include "tomo/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "tomo/errors.hpp"

namespace tomo {

namespace {

using FieldPtr = std::variant<double*, int*, unsigned*, bool*>;

struct Field {
  std::string_view section;
  std::string_view key;
  FieldPtr ptr;
};

std::vector<Field> fields(PipelineConfig& c) {
  auto& t = c.traversability;
  auto& o = c.trajectory;
  return {
      {"map", "d_s", &c.d_s},
      {"map", "r_g", &c.r_g},
      {"map", "eps_e", &c.eps_e},
      {"map", "threads", &c.threads},
      {"traversability", "d_min", &t.d_min},
      {"traversability", "d_ref", &t.d_ref},
      {"traversability", "theta_b", &t.theta_b},
      {"traversability", "theta_s", &t.theta_s},
      {"traversability", "theta_p", &t.theta_p},
      {"traversability", "c_barrier", &t.c_barrier},
      {"traversability", "alpha_d", &t.alpha_d},
      {"traversability", "alpha_b", &t.alpha_b},
      {"traversability", "alpha_s", &t.alpha_s},
      {"traversability", "d_inf", &t.d_inf},
      {"traversability", "d_sm", &t.d_sm},
      {"traversability", "r_c", &t.r_c},
      {"traversability", "step_patch_radius", &t.step_patch_radius},
      {"trajectory", "w_z", &o.w_z},
      {"trajectory", "w_t", &o.w_T},
      {"trajectory", "c_safe", &o.c_safe},
      {"trajectory", "ceiling_inflation", &o.ceiling_inflation},
      {"trajectory", "v_max", &o.v_max},
      {"trajectory", "a_max", &o.a_max},
      {"trajectory", "yaw_rate_max", &o.yaw_rate_max},
      {"trajectory", "w_height", &o.w_height},
      {"trajectory", "w_safety", &o.w_safety},
      {"trajectory", "w_kinematic", &o.w_kinematic},
      {"trajectory", "height_margin", &o.height_margin},
      {"trajectory", "cost_margin", &o.cost_margin},
      {"trajectory", "samples_per_piece", &o.samples_per_piece},
      {"trajectory", "max_iterations", &o.max_iterations},
      {"trajectory", "gradient_tolerance", &o.gradient_tolerance},
      {"trajectory", "penalty_rounds", &o.penalty_rounds},
      {"trajectory", "piece_length", &o.piece_length},
      {"trajectory", "min_piece_length", &o.min_piece_length},
      {"trajectory", "min_pieces", &o.min_pieces},
      {"trajectory", "fix_durations", &o.fix_durations},
      {"trajectory", "min_duration", &o.min_duration},
      {"trajectory", "height_tolerance", &o.height_tolerance},
      {"trajectory", "cost_tolerance", &o.cost_tolerance},
      {"trajectory", "kinematic_tolerance", &o.kinematic_tolerance},
  };
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

void assign(const Field& f, std::string_view value, std::string_view source) {
  auto bad = [&](std::string_view what) {
    return FormatError(fmt::format("{}: [{}] {} = '{}' is not {}", source, f.section, f.key, value, what));
  };
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (value == "true" || value == "1") *p = true;
          else if (value == "false" || value == "0") *p = false;
          else throw bad("a boolean");
        } else if constexpr (std::is_same_v<T, unsigned>) {
          if (!parse_number(value, *p)) throw bad("a non-negative integer");
        } else if constexpr (std::is_same_v<T, int>) {
          if (!parse_number(value, *p)) throw bad("an integer");
        } else {
          if (!parse_number(value, *p) || !std::isfinite(*p)) throw bad("a finite number");
        }
      },
      f.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(d_s > 0.0) || !std::isfinite(d_s)) throw InvalidArgument("d_s must be positive");
  if (!(r_g > 0.0) || !std::isfinite(r_g)) throw InvalidArgument("r_g must be positive");
  if (!(eps_e >= 0.0)) throw InvalidArgument("eps_e must be non-negative");
  traversability.validate(r_g);
  trajectory_options().validate();
}

SimplifyOptions PipelineConfig::simplify_options() const {
  SimplifyOptions s;
  s.eps_e = eps_e;
  s.c_barrier = traversability.c_barrier;
  return s;
}

PlannerOptions PipelineConfig::planner_options() const {
  PlannerOptions p;
  p.c_barrier = traversability.c_barrier;
  p.eps_e = eps_e;
  p.d_min = traversability.d_min;
  return p;
}

OptConfig PipelineConfig::trajectory_options() const {
  OptConfig o = trajectory;
  o.d_min = traversability.d_min;
  o.d_ref = traversability.d_ref;
  o.c_barrier = traversability.c_barrier;
  return o;
}

PipelineConfig parse_config(std::string_view text, std::string_view source) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw FormatError(fmt::format("{}:{}: {}", source, e.line(), e.message()));
  }
  PipelineConfig cfg;
  auto table = fields(cfg);
  for (const auto& [section, body] : tree) {
    if (body.empty())
      throw FormatError(fmt::format("{}: key '{}' must appear inside a section", source, section));
    bool known_section = false;
    for (const auto& f : table) known_section |= f.section == section;
    if (!known_section) throw FormatError(fmt::format("{}: unknown section [{}]", source, section));
    for (const auto& [key, value] : body) {
      auto it = std::find_if(table.begin(), table.end(),
                             [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == table.end()) throw FormatError(fmt::format("{}: unknown key '{}' in [{}]", source, key, section));
      assign(*it, trim(value.data()), source);
    }
  }
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(fmt::format("{}: {}", source, e.what()));
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open config '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

void set_config_value(PipelineConfig& config, std::string_view dotted_key, std::string_view value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string_view::npos)
    throw InvalidArgument(fmt::format("override '{}' must look like section.key", dotted_key));
  const auto section = dotted_key.substr(0, dot), key = dotted_key.substr(dot + 1);
  for (const auto& f : fields(config))
    if (f.section == section && f.key == key) {
      try {
        assign(f, trim(value), "override");
      } catch (const FormatError& e) {
        throw InvalidArgument(e.what());
      }
      return;
    }
  throw InvalidArgument(fmt::format("unknown configuration key '{}'", dotted_key));
}

std::string format_config(const PipelineConfig& config) {
  PipelineConfig copy = config;
  std::string out;
  std::string_view current;
  for (const auto& f : fields(copy)) {
    if (f.section != current) {
      out += fmt::format("{}[{}]\n", out.empty() ? "" : "\n", f.section);
      current = f.section;
    }
    std::visit(
        [&](auto* p) {
          if constexpr (std::is_same_v<std::remove_pointer_t<decltype(p)>, bool>)
            out += fmt::format("{} = {}\n", f.key, *p ? "true" : "false");
          else
            out += fmt::format("{} = {}\n", f.key, *p);
        },
        f.ptr);
  }
  return out;
}

}  // namespace tomo
