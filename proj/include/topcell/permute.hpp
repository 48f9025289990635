/*!
  \file permute.hpp
  \brief Pivot-net topology permutation of pull networks

  A pivot is an internal net touched by the channels of exactly one device
  type.  Its swap region is bounded by the nearest common ancestor (NCA) of
  its up-neighbors and the nearest common descendant (NCD) of its
  down-neighbors.  Swapping rewires the sub-network between NCA and the pivot
  below the one between the pivot and NCD, which preserves the function of a
  series-parallel network.
*/

#pragma once

#include "topcell/netlist.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace topcell
{

enum class pull_network
{
  pull_up,
  pull_down
};

char const* to_string( pull_network network );

/*! \brief Directed channel graph of one device type, edges drain -> source. */
struct network_graph
{
  struct edge
  {
    std::size_t device; ///< index into cell_netlist::devices
    std::string drain;
    std::string source;
  };

  std::vector<edge> edges;
  std::map<std::string, net_ref> nodes;
  std::map<std::string, std::set<std::string>> up;   ///< node -> drains of edges ending at it
  std::map<std::string, std::set<std::string>> down; ///< node -> sources of edges leaving it

  std::set<std::string> ancestors( std::string const& node ) const;   ///< inclusive
  std::set<std::string> descendants( std::string const& node ) const; ///< inclusive
};

struct net_graph
{
  network_graph pull_up;
  network_graph pull_down;

  network_graph const& operator[]( pull_network n ) const { return n == pull_network::pull_up ? pull_up : pull_down; }
};

/*! \brief Builds both channel graphs; the cell must be orientation-normalized. */
net_graph build_graph( cell_netlist const& cell );

struct pivot_candidate
{
  net_ref net;
  pull_network network;

  bool operator==( pivot_candidate const& ) const = default;
};

/*! \brief Accepts nets on the channels of one device type only; throws invalid_pivot. */
pivot_candidate validate_pivot( cell_netlist const& cell, std::string_view pivot );

struct terminal_change
{
  net_ref drain;
  net_ref source;
};

struct swap_region
{
  net_ref pivot;
  net_ref nca;
  net_ref ncd;
  std::set<std::string> up_neighbors;
  std::set<std::string> down_neighbors;
  std::set<std::string> up_boundary;
  std::set<std::string> down_boundary;
  std::set<std::string> interior; ///< nets on NCA -> pivot -> NCD paths, ends included
  std::map<std::size_t, terminal_change> delta; ///< device index -> new terminals
};

swap_region find_swap_region( net_graph const& graph, pivot_candidate const& pivot );

/*! \brief Applies one pivot swap to the orientation-normalized form of `cell`. */
cell_netlist swap_net( cell_netlist const& cell, std::string_view pivot );

/*! \brief Swap plus the region that produced it. */
cell_netlist swap_net( cell_netlist const& cell, std::string_view pivot, swap_region& region );

/*! \brief All pivots with a non-empty swap region, ordered by net name. */
std::vector<pivot_candidate> list_valid_pivots( cell_netlist const& cell );

struct enumeration
{
  std::vector<pivot_candidate> pivots;
  std::vector<cell_netlist> variants;    ///< emitted, seed first, before dedup
  std::vector<bool> interacting;         ///< a pivot turned invalid while applying the subset
  std::vector<std::size_t> unique;       ///< indices of first occurrences by canonical hash
  std::vector<std::uint64_t> digests;    ///< canonical hash per emitted variant

  std::size_t duplicates() const noexcept { return variants.size() - unique.size(); }
};

/*! \brief Applies pivot subsets in binary-counter order, emitting min(cap, 2^n) variants. */
enumeration enumerate_topologies( cell_netlist const& cell, std::size_t cap );

/*! \brief Labeling-independent text form: pins plus sorted device tuples. */
std::string canonical_form( cell_netlist const& cell );

/*! \brief 64-bit FNV-1a digest of canonical_form. */
std::uint64_t canonical_hash( cell_netlist const& cell );

std::string digest_hex( std::uint64_t digest );

} // namespace topcell
