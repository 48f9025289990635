#pragma once

#include "topcell/logic.hpp"
#include "topcell/netlist.hpp"
#include "topcell/permute.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace topcell::test
{

inline constexpr char const* inverter_text = R"(.SUBCKT INV A Y VDD GND
MP1 VDD A Y VDD PMOS
MN1 Y A GND GND NMOS
.ENDS
)";

inline constexpr char const* nand2_text = R"(.SUBCKT NAND2 A B Y VDD GND
MP1 VDD A Y VDD PMOS
MP2 VDD B Y VDD PMOS
MN1 Y A N1 GND NMOS
MN2 N1 B GND GND NMOS
.ENDS
)";

inline truth_table table_of( unsigned n, auto&& f )
{
  std::uint64_t bits = 0;
  for ( std::uint64_t a = 0; a < ( std::uint64_t{ 1 } << n ); ++a )
  {
    if ( f( a ) )
      bits |= std::uint64_t{ 1 } << a;
  }
  return truth_table( n, bits );
}

inline truth_table aoi221_table()
{
  return table_of( 5, []( std::uint64_t a ) {
    bool A1 = a & 1, A2 = a >> 1 & 1, B1 = a >> 2 & 1, B2 = a >> 3 & 1, C = a >> 4 & 1;
    return !( ( A1 && A2 ) || ( B1 && B2 ) || C );
  } );
}

inline cell_netlist synth_function( truth_table const& tt, std::string const& name = "CELL",
                                    std::vector<std::string> const& inputs = {} )
{
  return synth_cell( name, factor_expr( minimize_sop( table_to_sop( tt ), tt.n_inputs() ) ), tt, inputs );
}

inline cell_netlist aoi221_cell()
{
  return synth_function( aoi221_table(), "AOI221", { "A1", "A2", "B1", "B2", "C" } );
}

/* Independent brute-force diffusion-break oracle.

   Devices are grouped into islands joined by shared non-rail channel nets.
   In each island every PMOS order is tried together with every NMOS order
   whose gate sequence matches it column for column, and every orientation
   of every device; a row costs one break per adjacent pair whose facing
   terminals differ. */
inline std::size_t row_breaks( std::vector<device const*> const& row )
{
  std::size_t best = row.size();
  for ( std::uint32_t flips = 0; flips < ( 1u << row.size() ); ++flips )
  {
    std::size_t breaks = 0;
    for ( std::size_t i = 0; i + 1 < row.size(); ++i )
    {
      auto right = ( flips >> i & 1 ) ? row[i]->drain.name : row[i]->source.name;
      auto left = ( flips >> ( i + 1 ) & 1 ) ? row[i + 1]->source.name : row[i + 1]->drain.name;
      breaks += right != left;
    }
    best = std::min( best, breaks );
  }
  return best;
}

inline std::vector<std::vector<device const*>> islands( cell_netlist const& cell )
{
  std::vector<std::size_t> parent( cell.devices.size() );
  std::iota( parent.begin(), parent.end(), 0 );
  auto find = [&]( std::size_t x ) {
    while ( parent[x] != x )
      x = parent[x] = parent[parent[x]];
    return x;
  };
  std::map<std::string, std::size_t> first;
  for ( std::size_t i = 0; i < cell.devices.size(); ++i )
  {
    for ( auto const* t : { &cell.devices[i].drain, &cell.devices[i].source } )
    {
      if ( t->is_rail() )
        continue;
      auto [it, fresh] = first.emplace( t->name, i );
      if ( !fresh )
        parent[find( i )] = find( it->second );
    }
  }
  std::map<std::size_t, std::vector<device const*>> groups;
  for ( std::size_t i = 0; i < cell.devices.size(); ++i )
    groups[find( i )].push_back( &cell.devices[i] );
  std::vector<std::vector<device const*>> out;
  for ( auto& [_, g] : groups )
    out.push_back( g );
  return out;
}

inline std::size_t brute_force_breaks( cell_netlist const& cell )
{
  std::size_t total = 0;
  for ( auto const& island : islands( cell ) )
  {
    std::vector<device const*> p, n;
    for ( auto const* d : island )
      ( d->type == mos_type::pmos ? p : n ).push_back( d );
    auto by_name = []( device const* a, device const* b ) { return a->name < b->name; };
    std::sort( p.begin(), p.end(), by_name );
    std::size_t best = p.size() + n.size();
    do
    {
      std::size_t bp = row_breaks( p );
      if ( bp >= best )
        continue;
      std::sort( n.begin(), n.end(), by_name );
      do
      {
        bool paired = true;
        for ( std::size_t i = 0; i < p.size() && paired; ++i )
          paired = p[i]->gate.name == n[i]->gate.name;
        if ( paired )
          best = std::min( best, bp + row_breaks( n ) );
      } while ( std::next_permutation( n.begin(), n.end(), by_name ) );
    } while ( std::next_permutation( p.begin(), p.end(), by_name ) );
    total += best;
  }
  return total;
}

inline std::size_t largest_island( cell_netlist const& cell )
{
  std::size_t m = 0;
  for ( auto const& island : islands( cell ) )
    m = std::max( m, island.size() / 2 );
  return m;
}

} // namespace topcell::test
