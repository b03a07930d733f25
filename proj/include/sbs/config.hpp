#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sbs/hamiltonian.hpp"
#include "sbs/optimizer.hpp"
#include "sbs/pattern.hpp"
#include "sbs/sampler.hpp"

// Run configuration: INI text with [section] headers. Every key is listed in
// known_keys(); unknown keys are rejected so typos do not silently fall back to
// defaults. Relative paths resolve against the config file's directory.

namespace sbs {

struct RunConfig {
  // [lattice]
  int lx = 0, ly = 0;
  Boundary boundary = Boundary::open;
  int local_dim = 2;
  // [model]
  std::string model;  // tfi | fxx
  double coupling = 1.0;
  double field = 0.0;
  std::vector<double> fields;  // sweep points
  std::string frustration_file;
  // [pattern]
  std::string generators;
  std::string pattern_file;
  int bond_dim = 2;
  std::vector<std::pair<int, int>> bond_schedule;
  bool real_only = false;
  double init_noise = 0.1;
  // [sampler]
  SamplerConfig sampler;
  // [optimizer]
  OptimizerConfig optimizer;
  int checkpoint_every = 0;
  // [measure]
  std::vector<std::string> observables;
  // [output]
  std::string trajectory_csv;
  std::string checkpoint;
  std::string sweep_csv;
  std::string measure_csv;
  bool wallclock = false;
  bool cold_start = false;

  std::uint64_t hash = 0;  // FNV-1a of the canonical key=value listing
};

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"lattice", {"lx", "ly", "boundary", "d"}},
      {"model", {"model", "J", "h", "h_values", "h_range", "frustration_file"}},
      {"pattern", {"generators", "file", "D", "D_schedule", "real_only", "init_noise"}},
      {"sampler", {"samples", "burn_in", "thinning", "chains", "threads", "seed"}},
      {"optimizer",
       {"eta", "eta_min", "normalization", "samples_growth", "samples_cap", "max_iterations", "window",
        "tolerance", "growth_noise", "checkpoint_every"}},
      {"measure", {"observables"}},
      {"output", {"trajectory", "checkpoint", "sweep", "measure", "wallclock", "cold_start"}},
  };
  return keys;
}

class Reader {
 public:
  explicit Reader(const boost::property_tree::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& key) const {
    if (auto v = tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(key, '.'))) {
      std::string s = *v;
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    }
    return std::nullopt;
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    return raw(key).value_or(fallback);
  }

  std::string required(const std::string& key) const {
    auto v = raw(key);
    if (!v || v->empty()) throw InputError("missing required key '" + key + "'");
    return *v;
  }

  template <class T>
  T number(const std::string& key, T fallback) const {
    auto v = raw(key);
    return v ? parse<T>(key, *v) : fallback;
  }

  template <class T>
  static T parse(const std::string& key, const std::string& s) {
    std::istringstream is(s);
    T out{};
    if (!(is >> out) || !(is >> std::ws).eof()) throw InputError("key '" + key + "': cannot parse '" + s + "'");
    return out;
  }

  bool flag(const std::string& key, bool fallback) const {
    auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw InputError("key '" + key + "': expected true or false, got '" + *v + "'");
  }

 private:
  const boost::property_tree::ptree& tree_;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

inline void require_file(const std::string& key, const std::string& path) {
  if (!path.empty() && !std::filesystem::is_regular_file(path))
    throw InputError("key '" + key + "': file '" + path + "' does not exist");
}

template <class T>
void require(bool ok, const std::string& key, T value, const char* rule) {
  if (!ok) {
    std::ostringstream os;
    os << "key '" << key << "' = " << value << " must be " << rule;
    throw InputError(os.str());
  }
}

}  // namespace detail

/// Parses and validates a configuration. `base` anchors relative paths.
inline RunConfig parse_config(std::istream& is, const std::filesystem::path& base = ".") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InputError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  std::string canonical;
  for (const auto& [section, body] : tree) {
    const auto it = detail::known_keys().find(section);
    if (body.empty() || it == detail::known_keys().end())
      throw InputError("unknown config section '[" + section + "]'");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw InputError("unknown config key '" + section + "." + key + "'");
      canonical += section + "." + key + "=" + value.data() + "\n";
    }
  }

  const detail::Reader r(tree);
  RunConfig c;
  c.hash = fnv1a(canonical);

  c.lx = r.number("lattice.lx", 0);
  c.ly = r.number("lattice.ly", 0);
  detail::require(c.lx >= 1, "lattice.lx", c.lx, ">= 1");
  detail::require(c.ly >= 1, "lattice.ly", c.ly, ">= 1");
  c.boundary = parse_boundary(r.text("lattice.boundary", "open"));
  c.local_dim = r.number("lattice.d", 2);
  detail::require(c.local_dim >= 2, "lattice.d", c.local_dim, ">= 2");

  c.model = r.required("model.model");
  if (c.model == "frustrated_xx") c.model = "fxx";
  if (c.model != "tfi" && c.model != "fxx")
    throw InputError("key 'model.model': unknown model '" + c.model + "' (expected tfi or fxx)");
  c.coupling = r.number("model.J", 1.0);
  c.field = r.number("model.h", 0.0);
  if (r.raw("model.h_values") && r.raw("model.h_range"))
    throw InputError("give either 'model.h_values' or 'model.h_range', not both");
  if (auto hv = r.raw("model.h_values")) {
    for (const auto& tok : detail::split(*hv, ',')) c.fields.push_back(detail::Reader::parse<double>("model.h_values", tok));
  }
  if (auto hr = r.raw("model.h_range")) {
    const auto parts = detail::split(*hr, ':');
    if (parts.size() != 3) throw InputError("key 'model.h_range': expected start:stop:count");
    const double a = detail::Reader::parse<double>("model.h_range", parts[0]);
    const double b = detail::Reader::parse<double>("model.h_range", parts[1]);
    const int count = detail::Reader::parse<int>("model.h_range", parts[2]);
    if (count < 2) throw InputError("key 'model.h_range': count must be at least 2");
    for (int i = 0; i < count; ++i) c.fields.push_back(a + (b - a) * i / (count - 1));
  }
  if (!c.fields.empty()) {
    for (std::size_t i = 1; i < c.fields.size(); ++i)
      if (!(c.fields[i] > c.fields[i - 1]) && !(c.fields[i] < c.fields[i - 1]))
        throw InputError("key 'model.h_values': repeated field value");
    const bool up = std::is_sorted(c.fields.begin(), c.fields.end());
    const bool down = std::is_sorted(c.fields.rbegin(), c.fields.rend());
    if (!up && !down) throw InputError("key 'model.h_values': field values must be monotone");
  }
  c.frustration_file = detail::resolve(base, r.text("model.frustration_file", ""));
  detail::require_file("model.frustration_file", c.frustration_file);
  if (!c.frustration_file.empty() && c.model != "fxx")
    throw InputError("key 'model.frustration_file' only applies to model fxx");

  c.generators = r.text("pattern.generators", "");
  c.pattern_file = detail::resolve(base, r.text("pattern.file", ""));
  detail::require_file("pattern.file", c.pattern_file);
  if (c.generators.empty() && c.pattern_file.empty())
    throw InputError("config needs 'pattern.generators' or 'pattern.file'");
  c.bond_dim = r.number("pattern.D", 2);
  detail::require(c.bond_dim >= 1, "pattern.D", c.bond_dim, ">= 1");
  if (auto sched = r.raw("pattern.D_schedule")) {
    int last_iter = -1, last_dim = c.bond_dim;
    for (const auto& tok : detail::split(*sched, ',')) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw InputError("key 'pattern.D_schedule': expected iteration:D, got '" + tok + "'");
      const int at = detail::Reader::parse<int>("pattern.D_schedule", tok.substr(0, colon));
      const int dim = detail::Reader::parse<int>("pattern.D_schedule", tok.substr(colon + 1));
      if (at <= last_iter || dim <= last_dim)
        throw InputError("key 'pattern.D_schedule': iterations and D must both increase");
      c.bond_schedule.emplace_back(at, dim);
      last_iter = at;
      last_dim = dim;
    }
  }
  c.real_only = r.flag("pattern.real_only", false);
  c.init_noise = r.number("pattern.init_noise", 0.1);
  detail::require(c.init_noise >= 0.0, "pattern.init_noise", c.init_noise, ">= 0");

  SamplerConfig& s = c.sampler;
  s.seed = detail::Reader::parse<std::uint64_t>("sampler.seed", r.required("sampler.seed"));
  s.samples = r.number<std::size_t>("sampler.samples", 2000);
  detail::require(s.samples >= 1, "sampler.samples", s.samples, ">= 1");
  s.burn_in_sweeps = r.number<long>("sampler.burn_in", -1);
  s.thinning = r.number<std::size_t>("sampler.thinning", 1);
  detail::require(s.thinning >= 1, "sampler.thinning", s.thinning, ">= 1");
  s.chains = r.number("sampler.chains", 1);
  detail::require(s.chains >= 1, "sampler.chains", s.chains, ">= 1");
  s.threads = r.number("sampler.threads", 1);
  detail::require(s.threads >= 1, "sampler.threads", s.threads, ">= 1");

  OptimizerConfig& o = c.optimizer;
  o.seed = s.seed;
  o.samples = s.samples;
  o.bond_schedule = c.bond_schedule;
  o.eta = r.number("optimizer.eta", o.eta);
  detail::require(o.eta > 0.0, "optimizer.eta", o.eta, "> 0");
  o.eta_min = r.number("optimizer.eta_min", o.eta_min);
  detail::require(o.eta_min > 0.0 && o.eta_min <= o.eta, "optimizer.eta_min", o.eta_min, "in (0, eta]");
  o.normalization = parse_normalization(r.text("optimizer.normalization", "global"));
  o.samples_growth = r.number("optimizer.samples_growth", o.samples_growth);
  detail::require(o.samples_growth >= 1.0, "optimizer.samples_growth", o.samples_growth, ">= 1");
  o.samples_cap = r.number("optimizer.samples_cap", std::max(o.samples_cap, s.samples));
  detail::require(o.samples_cap >= s.samples, "optimizer.samples_cap", o.samples_cap, ">= sampler.samples");
  o.max_iterations = r.number("optimizer.max_iterations", o.max_iterations);
  detail::require(o.max_iterations >= 1, "optimizer.max_iterations", o.max_iterations, ">= 1");
  o.window = r.number("optimizer.window", o.window);
  detail::require(o.window >= 1, "optimizer.window", o.window, ">= 1");
  o.tolerance = r.number("optimizer.tolerance", o.tolerance);
  detail::require(o.tolerance >= 0.0, "optimizer.tolerance", o.tolerance, ">= 0");
  o.growth_noise = r.number("optimizer.growth_noise", o.growth_noise);
  c.checkpoint_every = r.number("optimizer.checkpoint_every", 0);
  detail::require(c.checkpoint_every >= 0, "optimizer.checkpoint_every", c.checkpoint_every, ">= 0");

  c.observables = detail::split(r.text("measure.observables", "mx,mz2"), ',');

  c.trajectory_csv = detail::resolve(base, r.text("output.trajectory", ""));
  c.checkpoint = detail::resolve(base, r.text("output.checkpoint", ""));
  c.sweep_csv = detail::resolve(base, r.text("output.sweep", ""));
  c.measure_csv = detail::resolve(base, r.text("output.measure", ""));
  c.wallclock = r.flag("output.wallclock", false);
  c.cold_start = r.flag("output.cold_start", false);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config '" + path + "'");
  const auto base = std::filesystem::absolute(path).parent_path();
  try {
    return parse_config(is, base);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline Lattice make_lattice(const RunConfig& c) { return Lattice(c.lx, c.ly, c.boundary, c.local_dim); }

inline StringPattern make_pattern(const RunConfig& c, const Lattice& lat) {
  std::vector<StringPattern> parts;
  if (!c.generators.empty()) parts.push_back(named_pattern(lat, c.generators));
  if (!c.pattern_file.empty()) parts.push_back(load_pattern_file(c.pattern_file, lat.size()));
  return parts.size() == 1 ? parts.front() : combine(parts);
}

inline LocalHamiltonian make_hamiltonian(const RunConfig& c, const Lattice& lat, double field) {
  if (c.model == "tfi") return build_tfi(lat, c.coupling, field);
  if (!c.frustration_file.empty())
    return build_frustrated_xx(lat, c.coupling, field, load_frustration_file(c.frustration_file, lat));
  return build_frustrated_xx(lat, c.coupling, field);
}

}  // namespace sbs
