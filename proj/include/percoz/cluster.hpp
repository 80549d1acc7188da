#pragma once

#include <vector>

#include "percoz/explorer.hpp"
#include "percoz/lattice.hpp"

namespace percoz {

/// The open cluster of a site inside a box, with its boundaries. All sets are
/// sorted vectors. Plaquettes are named by their dual edge, so `plaquettes`
/// and `external_boundary` hold the same edges.
struct ClusterData {
  std::vector<Point> vertices;
  std::vector<Edge> open_edges;
  std::vector<Edge> graph_boundary;
  std::vector<Point> filled_vertices;
  std::vector<Edge> external_boundary;
  std::vector<Edge> plaquettes;
  bool touches_box_boundary = false;
  bool filled = false;

  bool contains(const Point& p) const;
};

/// Open component of x in `config`. Fill data is left empty; see fill().
ClusterData component(const BondConfig& config, const Point& x);

/// Adds the finite holes of the complement (complement components of the box
/// that avoid the shell) and the external boundary. Throws DomainError with
/// "indeterminate fill" when the cluster touches the shell.
ClusterData fill(const ClusterData& cluster, const Box& box);

/// Edges of Z^d with exactly one endpoint in `vertices` (no box involved).
std::vector<Edge> edge_boundary(const std::vector<Point>& vertices);
/// Number of such edges; cheaper than materializing them.
long edge_boundary_size(const std::vector<Point>& vertices);

/// Filled closure on the infinite lattice: the set together with every
/// finite component of its complement. Output is sorted.
std::vector<Point> fill_infinite(const std::vector<Point>& vertices);

/// True iff the closed dual (d-1)-cells of two distinct edges meet in a
/// (d-2)-cell.
bool plaquette_adjacency(const Edge& p1, const Edge& p2);

/// Connected components of a plaquette set under plaquette_adjacency; each
/// component sorted, components ordered by their smallest member.
std::vector<std::vector<Edge>> surface_components(const std::vector<Edge>& plaquettes);

}  // namespace percoz
