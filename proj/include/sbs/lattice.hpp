#pragma once

#include <array>
#include <cstdlib>
#include <string>
#include <vector>

#include "sbs/types.hpp"

namespace sbs {

enum class Boundary { open, periodic };

inline std::string to_string(Boundary b) { return b == Boundary::open ? "open" : "periodic"; }

inline Boundary parse_boundary(const std::string& s) {
  if (s == "open" || s == "obc") return Boundary::open;
  if (s == "periodic" || s == "pbc") return Boundary::periodic;
  throw InputError("unknown boundary '" + s + "' (expected open|periodic)");
}

struct Bond {
  int a = 0;
  int b = 0;
  bool horizontal = true;
  std::vector<int> plaquettes;  // indices into Lattice::plaquettes()
};

/// Four sites in cyclic order: (x,y), (x+1,y), (x+1,y+1), (x,y+1).
using Plaquette = std::array<int, 4>;

/// A 2D square lattice with row-major site indexing, site 0 at (0,0).
///
/// A periodic dimension of extent 1 carries no bonds along it, so 1xN
/// periodic lattices describe rings. Extent 2 is rejected for periodic
/// boundaries because it would create the same bond twice.
class Lattice {
 public:
  Lattice(int lx, int ly, Boundary boundary, int local_dim = 2)
      : lx_(lx), ly_(ly), boundary_(boundary), d_(local_dim) {
    if (lx < 1 || ly < 1) throw InputError("lattice extents must be positive");
    if (local_dim < 1) throw InputError("local dimension must be positive");
    if (boundary == Boundary::periodic && (lx == 2 || ly == 2))
      throw InputError("periodic boundary requires extents of 1 or at least 3, got " +
                       std::to_string(lx) + "x" + std::to_string(ly));
    build_plaquettes();
    build_bonds();
  }

  int lx() const { return lx_; }
  int ly() const { return ly_; }
  Boundary boundary() const { return boundary_; }
  int local_dim() const { return d_; }
  int size() const { return lx_ * ly_; }

  int site(int x, int y) const { return y * lx_ + x; }
  int x_of(int s) const { return s % lx_; }
  int y_of(int s) const { return s / lx_; }

  const std::vector<Bond>& bonds() const { return bonds_; }
  const std::vector<Plaquette>& plaquettes() const { return plaquettes_; }

  /// Whether sites a and b are nearest neighbours under this boundary.
  bool adjacent(int a, int b) const {
    if (a == b) return false;
    const int dx = std::abs(x_of(a) - x_of(b));
    const int dy = std::abs(y_of(a) - y_of(b));
    const bool wrap = boundary_ == Boundary::periodic;
    const bool nx = dx == 1 || (wrap && lx_ >= 3 && dx == lx_ - 1);
    const bool ny = dy == 1 || (wrap && ly_ >= 3 && dy == ly_ - 1);
    return (dy == 0 && nx) || (dx == 0 && ny);
  }

 private:
  // Returns -1 when stepping off an open edge.
  int right(int x, int y) const {
    if (x + 1 < lx_) return site(x + 1, y);
    if (boundary_ == Boundary::periodic && lx_ >= 3) return site(0, y);
    return -1;
  }
  int down(int x, int y) const {
    if (y + 1 < ly_) return site(x, y + 1);
    if (boundary_ == Boundary::periodic && ly_ >= 3) return site(x, 0);
    return -1;
  }

  void build_plaquettes() {
    for (int y = 0; y < ly_; ++y) {
      for (int x = 0; x < lx_; ++x) {
        const int r = right(x, y);
        const int dn = down(x, y);
        if (r < 0 || dn < 0) continue;
        const int rd = down(x_of(r), y_of(r));
        plaquettes_.push_back({site(x, y), r, rd, dn});
      }
    }
  }

  void build_bonds() {
    auto attach = [this](Bond& bond) {
      for (std::size_t p = 0; p < plaquettes_.size(); ++p) {
        const auto& q = plaquettes_[p];
        for (int e = 0; e < 4; ++e) {
          const int u = q[e], v = q[(e + 1) % 4];
          if ((u == bond.a && v == bond.b) || (u == bond.b && v == bond.a)) {
            bond.plaquettes.push_back(static_cast<int>(p));
            break;
          }
        }
      }
    };
    for (int y = 0; y < ly_; ++y) {
      for (int x = 0; x < lx_; ++x) {
        if (const int r = right(x, y); r >= 0) {
          Bond b{site(x, y), r, true, {}};
          attach(b);
          bonds_.push_back(std::move(b));
        }
        if (const int dn = down(x, y); dn >= 0) {
          Bond b{site(x, y), dn, false, {}};
          attach(b);
          bonds_.push_back(std::move(b));
        }
      }
    }
  }

  int lx_;
  int ly_;
  Boundary boundary_;
  int d_;
  std::vector<Bond> bonds_;
  std::vector<Plaquette> plaquettes_;
};

inline Lattice build_lattice(int lx, int ly, Boundary boundary, int local_dim = 2) {
  return Lattice(lx, ly, boundary, local_dim);
}

}  // namespace sbs
