#include "topcell/reward.hpp"

#include <map>

namespace topcell
{

std::size_t edge_category( mos_type type, connection relation )
{
  return ( type == mos_type::pmos ? 0u : 6u ) + static_cast<std::size_t>( relation );
}

std::string edge_category_name( std::size_t category )
{
  static char const* const relations[] = { "gate-to-drain(rail)",  "gate-to-drain(output)",
                                           "gate-to-drain(internal)", "gate-to-source(rail)",
                                           "gate-to-source(output)", "gate-to-source(internal)" };
  return std::string( category < 6 ? "PMOS " : "NMOS " ) + relations[category % 6];
}

void cell_graph::index()
{
  in_edges.assign( names.size(), {} );
  for ( std::size_t e = 0; e < edges.size(); ++e )
    in_edges[edges[e].dst].push_back( e );
}

namespace
{

connection classify( bool drain_side, net_ref const& terminal )
{
  std::size_t cls = terminal.is_rail() ? 0 : terminal.kind == net_kind::output_pin ? 1 : 2;
  return static_cast<connection>( ( drain_side ? 0 : 3 ) + cls );
}

} // namespace

cell_graph encode_cell_graph( cell_netlist const& cell )
{
  cell_graph g;
  std::map<std::string, std::size_t> id;
  for ( auto const& n : cell.nets() )
  {
    id.emplace( n.name, g.names.size() );
    g.names.push_back( n.name );
    g.kinds.push_back( static_cast<std::size_t>( n.kind ) );
  }
  for ( auto const& d : cell.devices )
  {
    g.edges.push_back( { id.at( d.gate.name ), id.at( d.drain.name ), edge_category( d.type, classify( true, d.drain ) ) } );
    g.edges.push_back(
        { id.at( d.gate.name ), id.at( d.source.name ), edge_category( d.type, classify( false, d.source ) ) } );
  }
  g.index();
  return g;
}

} // namespace topcell
