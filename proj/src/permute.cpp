#include "topcell/permute.hpp"

#include "topcell/error.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace topcell
{

char const* to_string( pull_network network )
{
  return network == pull_network::pull_up ? "PullUp" : "PullDown";
}

/* graph */

namespace
{

std::set<std::string> closure( std::map<std::string, std::set<std::string>> const& adj, std::string const& start )
{
  std::set<std::string> seen{ start };
  std::vector<std::string> stack{ start };
  while ( !stack.empty() )
  {
    auto n = std::move( stack.back() );
    stack.pop_back();
    auto it = adj.find( n );
    if ( it == adj.end() )
      continue;
    for ( auto const& m : it->second )
    {
      if ( seen.insert( m ).second )
        stack.push_back( m );
    }
  }
  return seen;
}

void check_acyclic( network_graph const& g )
{
  std::map<std::string, std::size_t> indegree;
  for ( auto const& [n, _] : g.nodes )
    indegree[n] = 0;
  for ( auto const& [n, ups] : g.up )
    indegree[n] = ups.size();
  std::deque<std::string> ready;
  for ( auto const& [n, d] : indegree )
  {
    if ( d == 0 )
      ready.push_back( n );
  }
  std::size_t visited = 0;
  while ( !ready.empty() )
  {
    auto n = ready.front();
    ready.pop_front();
    ++visited;
    auto it = g.down.find( n );
    if ( it == g.down.end() )
      continue;
    for ( auto const& m : it->second )
    {
      if ( --indegree[m] == 0 )
        ready.push_back( m );
    }
  }
  if ( visited != g.nodes.size() )
    throw cyclic_network();
}

} // namespace

std::set<std::string> network_graph::ancestors( std::string const& node ) const
{
  return closure( up, node );
}

std::set<std::string> network_graph::descendants( std::string const& node ) const
{
  return closure( down, node );
}

net_graph build_graph( cell_netlist const& cell )
{
  net_graph graph;
  for ( std::size_t i = 0; i < cell.devices.size(); ++i )
  {
    auto const& d = cell.devices[i];
    auto& g = d.type == mos_type::pmos ? graph.pull_up : graph.pull_down;
    g.edges.push_back( { i, d.drain.name, d.source.name } );
    g.nodes.emplace( d.drain.name, d.drain );
    g.nodes.emplace( d.source.name, d.source );
    g.down[d.drain.name].insert( d.source.name );
    g.up[d.source.name].insert( d.drain.name );
  }
  check_acyclic( graph.pull_up );
  check_acyclic( graph.pull_down );
  return graph;
}

/* pivots */

pivot_candidate validate_pivot( cell_netlist const& cell, std::string_view pivot )
{
  auto net = cell.find_net( pivot );
  if ( !net )
    throw invalid_pivot( std::string( pivot ), invalid_pivot_reason::not_found );

  bool on_pmos = false, on_nmos = false;
  for ( auto const& d : cell.devices )
  {
    if ( d.touches_channel( pivot ) )
    {
      on_pmos |= d.type == mos_type::pmos;
      on_nmos |= d.type == mos_type::nmos;
    }
  }
  if ( on_pmos && on_nmos )
    throw invalid_pivot( net->name, invalid_pivot_reason::mixed_networks );
  if ( !on_pmos && !on_nmos )
    throw invalid_pivot( net->name, invalid_pivot_reason::gate_only );
  if ( net->kind != net_kind::internal )
    throw invalid_pivot( net->name, invalid_pivot_reason::rail_or_pin );
  return { *net, on_pmos ? pull_network::pull_up : pull_network::pull_down };
}

namespace
{

// nearest node reachable (inclusively) from every start along `adj`;
// grows all BFS frontiers one layer at a time, ties broken by name
std::string nearest_common( std::map<std::string, std::set<std::string>> const& adj,
                            std::set<std::string> const& starts )
{
  constexpr auto inf = std::numeric_limits<std::size_t>::max();
  std::vector<std::map<std::string, std::size_t>> dist;
  for ( auto const& s : starts )
  {
    std::map<std::string, std::size_t> d{ { s, 0 } };
    std::deque<std::string> queue{ s };
    while ( !queue.empty() )
    {
      auto n = queue.front();
      queue.pop_front();
      auto it = adj.find( n );
      if ( it == adj.end() )
        continue;
      for ( auto const& m : it->second )
      {
        if ( d.emplace( m, d[n] + 1 ).second )
          queue.push_back( m );
      }
    }
    dist.push_back( std::move( d ) );
  }

  std::string best;
  std::size_t best_depth = inf;
  for ( auto const& [node, _] : dist.front() )
  {
    std::size_t depth = 0;
    for ( auto const& d : dist )
    {
      auto it = d.find( node );
      if ( it == d.end() )
      {
        depth = inf;
        break;
      }
      depth = std::max( depth, it->second );
    }
    if ( depth < best_depth )
    {
      best = node;
      best_depth = depth;
    }
  }
  return best;
}

std::set<std::string> intersect( std::set<std::string> const& a, std::set<std::string> const& b )
{
  std::set<std::string> out;
  std::set_intersection( a.begin(), a.end(), b.begin(), b.end(), std::inserter( out, out.end() ) );
  return out;
}

std::set<std::string> neighbors( network_graph const& g, std::string const& node )
{
  std::set<std::string> out;
  if ( auto it = g.up.find( node ); it != g.up.end() )
    out.insert( it->second.begin(), it->second.end() );
  if ( auto it = g.down.find( node ); it != g.down.end() )
    out.insert( it->second.begin(), it->second.end() );
  return out;
}

} // namespace

swap_region find_swap_region( net_graph const& graph, pivot_candidate const& pivot )
{
  auto const& g = graph[pivot.network];
  auto const& p = pivot.net.name;
  auto up_it = g.up.find( p );
  auto down_it = g.down.find( p );
  if ( up_it == g.up.end() || down_it == g.down.end() )
    throw degenerate_region( p );

  swap_region region;
  region.pivot = pivot.net;
  region.up_neighbors = up_it->second;
  region.down_neighbors = down_it->second;

  auto nca = nearest_common( g.up, region.up_neighbors );
  auto ncd = nearest_common( g.down, region.down_neighbors );
  if ( nca.empty() || ncd.empty() || nca == p || ncd == p )
    throw degenerate_region( p );
  region.nca = g.nodes.at( nca );
  region.ncd = g.nodes.at( ncd );

  // nets on some path NCA -> pivot, and on some path pivot -> NCD
  auto above = intersect( g.ancestors( p ), g.descendants( nca ) );
  auto below = intersect( g.descendants( p ), g.ancestors( ncd ) );
  region.up_boundary = intersect( neighbors( g, nca ), above );
  region.down_boundary = intersect( neighbors( g, ncd ), below );
  region.interior = above;
  region.interior.insert( below.begin(), below.end() );

  for ( auto const& e : g.edges )
  {
    auto d_new = e.drain, s_new = e.source;
    if ( e.drain == nca && region.up_boundary.count( e.source ) )
      d_new = p;
    if ( e.drain == p && region.down_neighbors.count( e.source ) )
      d_new = nca;
    if ( e.source == ncd && region.down_boundary.count( e.drain ) )
      s_new = p;
    if ( e.source == p && region.up_neighbors.count( e.drain ) )
      s_new = ncd;
    if ( d_new != e.drain || s_new != e.source )
      region.delta.emplace( e.device, terminal_change{ g.nodes.at( d_new ), g.nodes.at( s_new ) } );
  }
  if ( region.delta.empty() )
    throw degenerate_region( p );
  return region;
}

cell_netlist swap_net( cell_netlist const& cell, std::string_view pivot, swap_region& region )
{
  auto candidate = validate_pivot( cell, pivot );
  auto out = normalize_orientation( cell );
  region = find_swap_region( build_graph( out ), candidate );
  for ( auto const& [index, change] : region.delta )
  {
    out.devices[index].drain = change.drain;
    out.devices[index].source = change.source;
  }
  return out;
}

cell_netlist swap_net( cell_netlist const& cell, std::string_view pivot )
{
  swap_region region;
  return swap_net( cell, pivot, region );
}

std::vector<pivot_candidate> list_valid_pivots( cell_netlist const& cell )
{
  auto normalized = normalize_orientation( cell );
  auto graph = build_graph( normalized );
  std::vector<pivot_candidate> out;
  for ( auto const& net : normalized.nets() )
  {
    try
    {
      auto candidate = validate_pivot( normalized, net.name );
      find_swap_region( graph, candidate );
      out.push_back( candidate );
    }
    catch ( invalid_pivot const& )
    {
    }
    catch ( degenerate_region const& )
    {
    }
  }
  return out;
}

enumeration enumerate_topologies( cell_netlist const& cell, std::size_t cap )
{
  if ( cap == 0 )
    throw error( error_category::input, "enumeration cap must be at least 1" );
  enumeration result;
  result.pivots = list_valid_pivots( cell );
  auto const n = result.pivots.size();
  std::size_t total = n >= 63 ? cap : std::min<std::size_t>( cap, std::size_t{ 1 } << n );

  std::set<std::uint64_t> seen;
  for ( std::size_t subset = 0; subset < total; ++subset )
  {
    cell_netlist variant = cell;
    bool interacting = false;
    for ( std::size_t i = 0; i < n; ++i )
    {
      if ( !( ( subset >> i ) & 1u ) )
        continue;
      try
      {
        variant = swap_net( variant, result.pivots[i].net.name );
      }
      catch ( invalid_pivot const& )
      {
        interacting = true;
      }
      catch ( degenerate_region const& )
      {
        interacting = true;
      }
    }
    auto digest = canonical_hash( variant );
    if ( seen.insert( digest ).second )
      result.unique.push_back( result.variants.size() );
    result.digests.push_back( digest );
    result.interacting.push_back( interacting );
    result.variants.push_back( std::move( variant ) );
  }
  return result;
}

} // namespace topcell
