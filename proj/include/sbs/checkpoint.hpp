#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "sbs/optimizer.hpp"
#include "sbs/state.hpp"

// Text checkpoints:
//
//   SBSv1 Lx Ly boundary d D seed
//   strings <count>
//   closed: 0 1 2
//   ...
//   real_only <0|1>
//   tensors
//   <one line per (string, position): every entry as re+imj, level-major, row-major>
//   progress <iteration> <eta> <samples>      (optional)
//   end

namespace sbs {

inline constexpr const char* kCheckpointVersion = "SBSv1";

struct Checkpoint {
  StringBondState state;
  std::uint64_t seed = 0;
  std::optional<OptimizerProgress> progress;
};

/// Shortest text that reads back to the same double (17 significant digits).
inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string format_complex(cplx z) {
  char buf[80];
  std::snprintf(buf, sizeof buf, "%.17g%+.17gj", z.real(), z.imag());
  return buf;
}

inline cplx parse_complex(const std::string& tok) {
  if (tok.size() < 4 || tok.back() != 'j') throw InputError("bad complex token '" + tok + "'");
  // the imaginary part starts at the last sign that is not an exponent sign
  std::size_t cut = std::string::npos;
  for (std::size_t i = tok.size() - 1; i-- > 1;) {
    if ((tok[i] == '+' || tok[i] == '-') && tok[i - 1] != 'e' && tok[i - 1] != 'E') {
      cut = i;
      break;
    }
  }
  if (cut == std::string::npos) throw InputError("bad complex token '" + tok + "'");
  try {
    std::size_t used_re = 0, used_im = 0;
    const std::string re = tok.substr(0, cut), im = tok.substr(cut, tok.size() - cut - 1);
    const double a = std::stod(re, &used_re), b = std::stod(im, &used_im);
    if (used_re != re.size() || used_im != im.size()) throw std::invalid_argument("trailing");
    return {a, b};
  } catch (const std::exception&) {
    throw InputError("bad complex token '" + tok + "'");
  }
}

inline void write_checkpoint(std::ostream& os, const StringBondState& st, std::uint64_t seed,
                             const std::optional<OptimizerProgress>& progress = std::nullopt) {
  const Lattice& lat = st.lattice();
  os << kCheckpointVersion << ' ' << lat.lx() << ' ' << lat.ly() << ' ' << to_string(lat.boundary()) << ' '
     << lat.local_dim() << ' ' << st.bond_dim() << ' ' << seed << '\n';
  os << "strings " << st.num_strings() << '\n';
  write_pattern(os, st.pattern());
  os << "real_only " << (st.real_only() ? 1 : 0) << '\n';
  os << "tensors\n";
  for (const auto& id : st.tensors()) {
    const auto t = st.tensor(id.string, id.position);
    for (std::size_t i = 0; i < t.size(); ++i) os << (i ? " " : "") << format_complex(t[i]);
    os << '\n';
  }
  if (progress)
    os << "progress " << progress->iteration << ' ' << format_real(progress->eta) << ' ' << progress->samples
       << '\n';
  os << "end\n";
}

namespace detail {

inline std::string expect_line(std::istream& is, const char* what) {
  std::string line;
  if (!std::getline(is, line)) throw InputError(std::string("checkpoint truncated before ") + what);
  return line;
}

}  // namespace detail

inline Checkpoint read_checkpoint(std::istream& is) {
  std::istringstream head(detail::expect_line(is, "header"));
  std::string version, boundary;
  int lx = 0, ly = 0, d = 0, dim = 0;
  std::uint64_t seed = 0;
  head >> version;
  if (version != kCheckpointVersion)
    throw InputError("checkpoint version '" + version + "' is not supported (expected " + kCheckpointVersion + ")");
  if (!(head >> lx >> ly >> boundary >> d >> dim >> seed)) throw InputError("malformed checkpoint header");

  Lattice lat(lx, ly, parse_boundary(boundary), d);
  std::istringstream count_line(detail::expect_line(is, "string count"));
  std::string key;
  int count = -1;
  if (!(count_line >> key >> count) || key != "strings" || count < 1)
    throw InputError("expected 'strings <count>' in checkpoint");
  StringPattern pattern(read_pattern_strings(is, count), lat.size());
  if (pattern.num_strings() != count) throw InputError("checkpoint pattern block is truncated");

  std::istringstream ro(detail::expect_line(is, "real_only flag"));
  int real_only = -1;
  if (!(ro >> key >> real_only) || key != "real_only" || (real_only != 0 && real_only != 1))
    throw InputError("expected 'real_only 0|1' in checkpoint");
  if (detail::expect_line(is, "tensors") != "tensors") throw InputError("expected 'tensors' in checkpoint");

  StringBondState st(lat, std::move(pattern), dim, real_only == 1);
  for (const auto& id : st.tensors()) {
    std::istringstream row(detail::expect_line(is, "tensor data"));
    auto t = st.tensor(id.string, id.position);
    std::string tok;
    std::size_t i = 0;
    while (row >> tok) {
      if (i == t.size()) throw InputError("too many entries for a tensor in checkpoint");
      t[i++] = parse_complex(tok);
    }
    if (i != t.size()) throw InputError("too few entries for a tensor in checkpoint");
  }

  Checkpoint cp{std::move(st), seed, std::nullopt};
  std::string line = detail::expect_line(is, "end marker");
  if (line.rfind("progress ", 0) == 0) {
    std::istringstream pl(line.substr(9));
    OptimizerProgress p;
    std::string eta;
    if (!(pl >> p.iteration >> eta >> p.samples)) throw InputError("malformed progress line in checkpoint");
    p.eta = std::stod(eta);
    cp.progress = p;
    line = detail::expect_line(is, "end marker");
  }
  if (line != "end") throw InputError("expected 'end' in checkpoint, got '" + line + "'");
  return cp;
}

inline void save_checkpoint(const std::string& path, const StringBondState& st, std::uint64_t seed,
                            const std::optional<OptimizerProgress>& progress = std::nullopt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint '" + tmp + "'");
    write_checkpoint(os, st, seed, progress);
    if (!os) throw std::runtime_error("failed while writing checkpoint '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot move checkpoint into place at '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open checkpoint '" + path + "'");
  try {
    return read_checkpoint(is);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace sbs
