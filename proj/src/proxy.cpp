#include "topcell/error.hpp"
#include "topcell/reward.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <mutex>
#include <numeric>
#include <unordered_map>

namespace topcell
{

namespace
{

constexpr std::size_t max_exhaustive = 12;
constexpr std::size_t max_columns = 16;
constexpr std::size_t max_nets = 128;

struct row_device
{
  std::size_t index; ///< position in cell.devices
  std::size_t gate;
  std::size_t a, b;  ///< channel terminal net ids, 1-based
};

// A state packs the placed P and N devices and the exposed right-hand
// diffusion net of each row (0 while a row is empty).
using state = std::uint64_t;

state pack( std::uint64_t mask_p, std::uint64_t mask_n, std::uint64_t right_p, std::uint64_t right_n )
{
  return mask_p | mask_n << 16 | right_p << 32 | right_n << 48;
}

std::uint64_t mask_p( state s ) { return s & 0xffff; }
std::uint64_t mask_n( state s ) { return s >> 16 & 0xffff; }
std::uint64_t right_p( state s ) { return s >> 32 & 0xffff; }
std::uint64_t right_n( state s ) { return s >> 48; }

struct node
{
  std::size_t cost;
  std::size_t bound; ///< cost plus the remaining-break lower bound
  state parent;
  std::pair<std::size_t, std::size_t> column;
};

class placer
{
public:
  placer( cell_netlist const& cell, std::vector<std::size_t> const& devices, proxy_options const& options )
      : options_( options )
  {
    std::map<std::string, std::size_t> ids;
    auto id = [&]( std::string const& n ) { return ids.emplace( n, ids.size() + 1 ).first->second; };
    for ( auto i : devices )
    {
      auto const& d = cell.devices[i];
      row_device r{ i, id( d.gate.name ), id( d.drain.name ), id( d.source.name ) };
      ( d.type == mos_type::pmos ? p_ : n_ ).push_back( r );
    }
    num_nets_ = ids.size() + 1;
    if ( num_nets_ > max_nets )
      throw too_large( "proxy search supports at most " + std::to_string( max_nets - 1 ) + " nets" );
    if ( p_.size() != n_.size() )
      throw error( error_category::domain, "proxy needs equal PMOS and NMOS counts" );
    auto same = []( auto const& rows, std::size_t g ) {
      return std::count_if( rows.begin(), rows.end(), [g]( auto const& r ) { return r.gate == g; } );
    };
    for ( auto const& p : p_ )
    {
      if ( same( p_, p.gate ) != same( n_, p.gate ) )
        throw error( error_category::domain, "proxy needs one NMOS per PMOS on every gate net" );
    }
    if ( p_.size() > max_columns )
      throw too_large( "proxy search supports at most " + std::to_string( max_columns ) + " devices per network" );
    beam_ = p_.size() > options.exhaustive_limit;
    if ( beam_ && !options.greedy )
    {
      if ( p_.size() > max_exhaustive )
        throw too_large( "exhaustive proxy search is limited to " + std::to_string( max_exhaustive ) +
                         " devices per network" );
      beam_ = false;
    }
  }

  proxy_result run() const
  {
    proxy_result result;
    result.exact = !beam_;
    if ( p_.empty() )
      return result;

    std::unordered_map<state, node> nodes;
    nodes.reserve( 1024 );
    nodes.emplace( 0, node{ 0, lower_bound( 0 ), 0, {} } );
    state goal = beam_ ? run_beam( nodes ) : run_exact( nodes );
    result.breaks = nodes.at( goal ).cost;
    result.score = 0.0 - static_cast<double>( result.breaks );
    for ( state s = goal; s != 0; s = nodes.at( s ).parent )
      result.columns.push_back( nodes.at( s ).column );
    std::reverse( result.columns.begin(), result.columns.end() );
    return result;
  }

private:
  std::uint64_t full() const { return ( std::uint64_t{ 1 } << p_.size() ) - 1; }

  static std::size_t gap( std::uint64_t right, std::size_t left ) { return right != 0 && right != left ? 1 : 0; }

  // Unplaced devices of a row need at least (trail cover size - 1) more breaks;
  // a component with 2k odd-degree nets needs max(1, k) trails.
  std::size_t row_bound( std::vector<row_device> const& row, std::uint64_t placed ) const
  {
    std::array<std::uint8_t, max_nets> parent, degree{}, odd{};
    std::array<bool, max_nets> used{};
    for ( std::size_t n = 0; n < num_nets_; ++n )
      parent[n] = static_cast<std::uint8_t>( n );
    auto find = [&]( std::size_t x ) {
      while ( parent[x] != x )
        x = parent[x] = parent[parent[x]];
      return x;
    };
    for ( std::size_t i = 0; i < row.size(); ++i )
    {
      if ( placed >> i & 1u )
        continue;
      ++degree[row[i].a];
      ++degree[row[i].b];
      parent[find( row[i].a )] = static_cast<std::uint8_t>( find( row[i].b ) );
    }
    for ( std::size_t n = 1; n < num_nets_; ++n )
    {
      if ( degree[n] == 0 )
        continue;
      auto r = find( n );
      used[r] = true;
      odd[r] += degree[n] % 2;
    }
    std::size_t trails = 0;
    for ( std::size_t n = 1; n < num_nets_; ++n )
    {
      if ( used[n] )
        trails += std::max<std::size_t>( 1, odd[n] / 2 );
    }
    return trails > 0 ? trails - 1 : 0;
  }

  std::size_t lower_bound( state s ) const { return row_bound( p_, mask_p( s ) ) + row_bound( n_, mask_n( s ) ); }

  template<typename Fn>
  void successors( state s, Fn&& fn ) const
  {
    for ( std::size_t i = 0; i < p_.size(); ++i )
    {
      if ( mask_p( s ) >> i & 1u )
        continue;
      for ( std::size_t j = 0; j < n_.size(); ++j )
      {
        if ( ( mask_n( s ) >> j & 1u ) || n_[j].gate != p_[i].gate )
          continue;
        for ( int fp = 0; fp < 2; ++fp )
        {
          auto lp = fp ? p_[i].b : p_[i].a, rp = fp ? p_[i].a : p_[i].b;
          for ( int fn_ = 0; fn_ < 2; ++fn_ )
          {
            auto ln = fn_ ? n_[j].b : n_[j].a, rn = fn_ ? n_[j].a : n_[j].b;
            state t = pack( mask_p( s ) | std::uint64_t{ 1 } << i, mask_n( s ) | std::uint64_t{ 1 } << j, rp, rn );
            fn( t, gap( right_p( s ), lp ) + gap( right_n( s ), ln ), std::pair{ p_[i].index, n_[j].index } );
          }
        }
      }
    }
  }

  // offers a path to t; returns true when it improved the stored cost
  bool relax( std::unordered_map<state, node>& nodes, state s, state t, std::size_t cost,
              std::pair<std::size_t, std::size_t> column ) const
  {
    auto it = nodes.find( t );
    if ( it == nodes.end() )
    {
      nodes.emplace( t, node{ cost, cost + lower_bound( t ), s, column } );
      return true;
    }
    if ( cost >= it->second.cost )
      return false;
    it->second.bound -= it->second.cost - cost;
    it->second.cost = cost;
    it->second.parent = s;
    it->second.column = column;
    return true;
  }

  // A* with bucketed bounds; states are reopened when a cheaper path appears
  state run_exact( std::unordered_map<state, node>& nodes ) const
  {
    std::vector<std::vector<state>> buckets( nodes.at( 0 ).bound + 1 );
    buckets.back().push_back( 0 );
    for ( std::size_t f = 0; f < buckets.size(); ++f )
    {
      for ( std::size_t k = 0; k < buckets[f].size(); ++k )
      {
        state s = buckets[f][k];
        auto const n = nodes.at( s );
        if ( std::max( n.bound, f ) != f )
          continue;
        if ( mask_p( s ) == full() )
          return s;
        successors( s, [&]( state t, std::size_t step, std::pair<std::size_t, std::size_t> column ) {
          if ( !relax( nodes, s, t, n.cost + step, column ) )
            return;
          auto b = std::max( f, nodes.at( t ).bound );
          if ( buckets.size() <= b )
            buckets.resize( b + 1 );
          buckets[b].push_back( t );
        } );
      }
    }
    throw error( error_category::internal, "proxy search found no complete placement" );
  }

  state run_beam( std::unordered_map<state, node>& nodes ) const
  {
    std::vector<state> layer{ 0 };
    for ( std::size_t k = 0; k < p_.size(); ++k )
    {
      std::vector<state> next;
      for ( auto s : layer )
      {
        auto cost = nodes.at( s ).cost;
        successors( s, [&]( state t, std::size_t step, std::pair<std::size_t, std::size_t> column ) {
          bool fresh = !nodes.count( t );
          relax( nodes, s, t, cost + step, column );
          if ( fresh )
            next.push_back( t );
        } );
      }
      std::vector<std::pair<std::size_t, state>> ranked;
      for ( auto t : next )
        ranked.emplace_back( nodes.at( t ).bound, t );
      std::sort( ranked.begin(), ranked.end() );
      ranked.resize( std::min( ranked.size(), std::max<std::size_t>( 1, options_.beam_width ) ) );
      layer.clear();
      for ( auto const& [_, t] : ranked )
        layer.push_back( t );
    }
    return layer.front();
  }

  proxy_options options_;
  std::vector<row_device> p_, n_;
  std::size_t num_nets_ = 0;
  bool beam_ = false;
};

// Devices joined through non-rail channel nets form one stage; stages are
// separate diffusion islands, so only breaks inside a stage are counted.
std::vector<std::vector<std::size_t>> stages( cell_netlist const& cell )
{
  std::vector<std::size_t> parent( cell.devices.size() );
  std::iota( parent.begin(), parent.end(), 0 );
  auto find = [&]( std::size_t x ) {
    while ( parent[x] != x )
      x = parent[x] = parent[parent[x]];
    return x;
  };
  std::map<std::string, std::size_t> owner;
  for ( std::size_t i = 0; i < cell.devices.size(); ++i )
  {
    for ( auto const* n : { &cell.devices[i].drain, &cell.devices[i].source } )
    {
      if ( n->is_rail() )
        continue;
      auto [it, inserted] = owner.emplace( n->name, i );
      if ( !inserted )
        parent[find( i )] = find( it->second );
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for ( std::size_t i = 0; i < cell.devices.size(); ++i )
    groups[find( i )].push_back( i );
  std::vector<std::vector<std::size_t>> out;
  for ( auto& [_, g] : groups )
    out.push_back( std::move( g ) );
  return out;
}

} // namespace

proxy_result proxy_score( cell_netlist const& cell, proxy_options const& options )
{
  // training and inference rescore the same few netlists many times
  static std::mutex mutex;
  static std::map<std::string, proxy_result> memo;
  auto key = std::to_string( options.greedy ) + ":" + std::to_string( options.exhaustive_limit ) + ":" +
             std::to_string( options.beam_width ) + "\n" + serialize_spice( cell );
  {
    std::lock_guard lock( mutex );
    if ( auto it = memo.find( key ); it != memo.end() )
      return it->second;
  }
  proxy_result result;
  for ( auto const& stage : stages( cell ) )
  {
    auto part = placer( cell, stage, options ).run();
    result.breaks += part.breaks;
    result.exact = result.exact && part.exact;
    result.columns.insert( result.columns.end(), part.columns.begin(), part.columns.end() );
  }
  result.score = 0.0 - static_cast<double>( result.breaks );
  std::lock_guard lock( mutex );
  if ( memo.size() >= 1u << 16 )
    memo.clear();
  memo.emplace( std::move( key ), result );
  return result;
}

} // namespace topcell
