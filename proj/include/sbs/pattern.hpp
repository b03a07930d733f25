#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sbs/lattice.hpp"

namespace sbs {

enum class Topology { closed, open };

/// An ordered list of sites carrying one matrix-product factor. Closed
/// strings contribute a trace; open strings are contracted with boundary
/// vectors.
struct String {
  std::vector<int> sites;
  Topology topology = Topology::closed;
};

struct Incidence {
  int string = 0;
  int position = 0;
  friend bool operator==(const Incidence&, const Incidence&) = default;
};

class StringPattern {
 public:
  StringPattern() = default;

  /// Validates and indexes `strings`. Every site in [0, n_sites) must be
  /// covered; no site may repeat within a string.
  StringPattern(std::vector<String> strings, int n_sites)
      : strings_(std::move(strings)), incidence_(static_cast<std::size_t>(n_sites)) {
    if (n_sites < 1) throw InputError("pattern needs at least one site");
    for (std::size_t s = 0; s < strings_.size(); ++s) {
      const auto& str = strings_[s];
      if (str.sites.empty()) throw InputError("string " + std::to_string(s) + " is empty");
      for (std::size_t p = 0; p < str.sites.size(); ++p) {
        const int x = str.sites[p];
        if (x < 0 || x >= n_sites)
          throw InputError("string " + std::to_string(s) + ": site " + std::to_string(x) +
                           " out of range [0, " + std::to_string(n_sites) + ")");
        auto& inc = incidence_[static_cast<std::size_t>(x)];
        if (!inc.empty() && inc.back().string == static_cast<int>(s))
          throw InputError("string " + std::to_string(s) + ": duplicate site " +
                           std::to_string(x));
        inc.push_back({static_cast<int>(s), static_cast<int>(p)});
      }
    }
    for (int x = 0; x < n_sites; ++x)
      if (incidence_[static_cast<std::size_t>(x)].empty())
        throw InputError("site " + std::to_string(x) + " is not covered by any string");
  }

  const std::vector<String>& strings() const { return strings_; }
  const String& string(int s) const { return strings_[static_cast<std::size_t>(s)]; }
  int num_strings() const { return static_cast<int>(strings_.size()); }
  int num_sites() const { return static_cast<int>(incidence_.size()); }

  /// (string, position) pairs for every string through `site`, by string id.
  const std::vector<Incidence>& incidence(int site) const {
    return incidence_[static_cast<std::size_t>(site)];
  }

 private:
  std::vector<String> strings_;
  std::vector<std::vector<Incidence>> incidence_;
};

/// Concatenates the strings of several patterns over the same sites.
inline StringPattern combine(const std::vector<StringPattern>& parts) {
  if (parts.empty()) throw InputError("combine needs at least one pattern");
  std::vector<String> all;
  for (const auto& p : parts) {
    if (p.num_sites() != parts.front().num_sites())
      throw InputError("combined patterns disagree on the site count");
    all.insert(all.end(), p.strings().begin(), p.strings().end());
  }
  return StringPattern(std::move(all), parts.front().num_sites());
}

/// One string per row and one per column; closed on periodic lattices.
inline StringPattern lines_pattern(const Lattice& lat) {
  const Topology topo = lat.boundary() == Boundary::periodic ? Topology::closed : Topology::open;
  std::vector<String> strings;
  if (lat.lx() >= 2 || lat.size() == 1) {
    for (int y = 0; y < lat.ly(); ++y) {
      String s{{}, topo};
      for (int x = 0; x < lat.lx(); ++x) s.sites.push_back(lat.site(x, y));
      strings.push_back(std::move(s));
    }
  }
  if (lat.ly() >= 2) {
    for (int x = 0; x < lat.lx(); ++x) {
      String s{{}, topo};
      for (int y = 0; y < lat.ly(); ++y) s.sites.push_back(lat.site(x, y));
      strings.push_back(std::move(s));
    }
  }
  return StringPattern(std::move(strings), lat.size());
}

/// One closed 4-site string per plaquette.
inline StringPattern loops_pattern(const Lattice& lat) {
  std::vector<String> strings;
  for (const auto& q : lat.plaquettes())
    strings.push_back({{q.begin(), q.end()}, Topology::closed});
  return StringPattern(std::move(strings), lat.size());
}

/// A single open string visiting rows boustrophedon.
inline StringPattern snake_pattern(const Lattice& lat) {
  String s{{}, Topology::open};
  for (int y = 0; y < lat.ly(); ++y)
    for (int i = 0; i < lat.lx(); ++i) s.sites.push_back(lat.site(y % 2 == 0 ? i : lat.lx() - 1 - i, y));
  return StringPattern({std::move(s)}, lat.size());
}

/// N strings of length one; with D=1 the state is a product state.
inline StringPattern single_site_pattern(const Lattice& lat) {
  std::vector<String> strings;
  for (int x = 0; x < lat.size(); ++x) strings.push_back({{x}, Topology::closed});
  return StringPattern(std::move(strings), lat.size());
}

/// Builds a pattern from a name such as "lines", "loops", "snake",
/// "single" or a '+'-joined combination ("lines+loops").
inline StringPattern named_pattern(const Lattice& lat, const std::string& name) {
  std::vector<StringPattern> parts;
  std::stringstream ss(name);
  std::string token;
  while (std::getline(ss, token, '+')) {
    if (token == "lines") parts.push_back(lines_pattern(lat));
    else if (token == "loops") parts.push_back(loops_pattern(lat));
    else if (token == "snake") parts.push_back(snake_pattern(lat));
    else if (token == "single") parts.push_back(single_site_pattern(lat));
    else throw InputError("unknown pattern generator '" + token + "'");
  }
  if (parts.size() == 1) return parts.front();
  return combine(parts);
}

// Descriptor format: one string per line, `closed: i0 i1 ...` or
// `open: i0 i1 ...`; blank lines and lines starting with '#' are skipped.

inline void write_pattern(std::ostream& os, const StringPattern& pattern) {
  for (const auto& s : pattern.strings()) {
    os << (s.topology == Topology::closed ? "closed:" : "open:");
    for (int x : s.sites) os << ' ' << x;
    os << '\n';
  }
}

/// Parses `count` descriptor lines, or until end of input when count < 0.
inline std::vector<String> read_pattern_strings(std::istream& is, int count = -1) {
  std::vector<String> strings;
  std::string line;
  int line_no = 0;
  while ((count < 0 || static_cast<int>(strings.size()) < count) && std::getline(is, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw InputError("pattern line " + std::to_string(line_no) + ": missing ':'");
    std::string head = line.substr(first, colon - first);
    head.erase(head.find_last_not_of(" \t") + 1);
    String s;
    if (head == "closed") s.topology = Topology::closed;
    else if (head == "open") s.topology = Topology::open;
    else
      throw InputError("pattern line " + std::to_string(line_no) + ": unknown topology '" +
                       head + "'");
    std::istringstream rest(line.substr(colon + 1));
    std::string tok;
    while (rest >> tok) {
      try {
        std::size_t used = 0;
        s.sites.push_back(std::stoi(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw InputError("pattern line " + std::to_string(line_no) + ": bad site '" + tok + "'");
      }
    }
    strings.push_back(std::move(s));
  }
  if (count >= 0 && static_cast<int>(strings.size()) != count)
    throw InputError("pattern block ended early");
  return strings;
}

inline StringPattern load_pattern(std::istream& is, int n_sites) {
  return StringPattern(read_pattern_strings(is), n_sites);
}

inline StringPattern load_pattern_file(const std::string& path, int n_sites) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open pattern file '" + path + "'");
  return load_pattern(in, n_sites);
}

}  // namespace sbs
