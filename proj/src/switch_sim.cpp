#include "topcell/error.hpp"
#include "topcell/logic.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace topcell
{

char to_char( logic_value v )
{
  switch ( v )
  {
  case logic_value::zero:
    return '0';
  case logic_value::one:
    return '1';
  case logic_value::x:
    return 'X';
  }
  return '?';
}

switch_simulator::switch_simulator( cell_netlist const& cell )
{
  std::map<std::string, std::size_t> index;
  auto id = [&]( net_ref const& n ) {
    auto [it, inserted] = index.emplace( n.name, index.size() );
    return it->second;
  };
  for ( auto const& n : cell.nets() )
    id( n );
  num_nets_ = index.size();

  auto power = cell.power();
  auto ground = cell.ground();
  if ( !power )
    throw missing_rail( "power" );
  if ( !ground )
    throw missing_rail( "ground" );
  power_ = id( *power );
  ground_ = id( *ground );
  output_ = id( cell.output() );
  for ( auto const& p : cell.input_pins() )
    inputs_.push_back( id( p ) );

  incident_.resize( num_nets_ );
  std::set<std::size_t> p_side, n_side;
  for ( auto const& d : cell.devices )
  {
    channel ch{ id( d.drain ), id( d.source ), id( d.gate ), d.type == mos_type::pmos };
    incident_[ch.drain].push_back( channels_.size() );
    incident_[ch.source].push_back( channels_.size() );
    channels_.push_back( ch );
    auto& side = ch.pmos ? p_side : n_side;
    side.insert( ch.drain );
    side.insert( ch.source );
  }

  std::set<std::size_t> stages{ output_ };
  for ( auto n : p_side )
  {
    if ( n_side.count( n ) && n != power_ && n != ground_ )
      stages.insert( n );
  }

  // resolve stages in dependency order: a stage is ready once every gate in
  // its channel-connected group is an input or an already resolved stage
  std::vector<bool> known( num_nets_, false );
  for ( auto i : inputs_ )
    known[i] = true;

  auto group_gates = [&]( std::size_t stage ) {
    std::set<std::size_t> gates, seen{ stage };
    std::vector<std::size_t> stack{ stage };
    while ( !stack.empty() )
    {
      auto n = stack.back();
      stack.pop_back();
      for ( auto c : incident_[n] )
      {
        auto const& ch = channels_[c];
        gates.insert( ch.gate );
        auto other = ch.drain == n ? ch.source : ch.drain;
        if ( other != power_ && other != ground_ && seen.insert( other ).second )
          stack.push_back( other );
      }
    }
    return gates;
  };

  std::map<std::size_t, std::set<std::size_t>> pending;
  for ( auto s : stages )
    pending.emplace( s, group_gates( s ) );
  while ( !pending.empty() )
  {
    bool progress = false;
    for ( auto it = pending.begin(); it != pending.end(); )
    {
      bool ready = std::all_of( it->second.begin(), it->second.end(), [&]( auto g ) { return known[g]; } );
      if ( ready )
      {
        known[it->first] = true;
        stage_order_.push_back( it->first );
        it = pending.erase( it );
        progress = true;
      }
      else
      {
        ++it;
      }
    }
    if ( !progress )
    {
      auto name_of = [&]( std::size_t net ) {
        for ( auto const& [name, i] : index )
        {
          if ( i == net )
            return name;
        }
        return std::string{};
      };
      // prefer a gate that is neither an input nor any stage (pass-gate style)
      for ( auto const& [stage, gates] : pending )
      {
        for ( auto g : gates )
        {
          if ( !known[g] && !pending.count( g ) )
            throw unresolved_gate( name_of( g ) );
        }
      }
      throw unresolved_gate( name_of( pending.begin()->first ) );
    }
  }
}

logic_value switch_simulator::evaluate( std::uint64_t assignment ) const
{
  std::vector<logic_value> value( num_nets_, logic_value::x );
  for ( std::size_t i = 0; i < inputs_.size(); ++i )
    value[inputs_[i]] = ( ( assignment >> i ) & 1u ) ? logic_value::one : logic_value::zero;

  // conduction: 1 on, 0 off, 2 unknown
  auto state = [&]( channel const& ch ) {
    auto g = value[ch.gate];
    if ( g == logic_value::x )
      return 2;
    return ( g == logic_value::zero ) == ch.pmos ? 1 : 0;
  };

  std::vector<char> seen( num_nets_ );
  std::vector<std::size_t> stack;
  auto reaches = [&]( std::size_t from, std::size_t blocked, std::size_t target, bool allow_unknown ) {
    std::fill( seen.begin(), seen.end(), 0 );
    stack.assign( 1, from );
    seen[from] = 1;
    while ( !stack.empty() )
    {
      auto n = stack.back();
      stack.pop_back();
      if ( n == target )
        return true;
      if ( n == blocked )
        continue;
      for ( auto c : incident_[n] )
      {
        auto const& ch = channels_[c];
        int s = state( ch );
        if ( s == 0 || ( s == 2 && !allow_unknown ) )
          continue;
        auto other = ch.drain == n ? ch.source : ch.drain;
        if ( !seen[other] )
        {
          seen[other] = 1;
          stack.push_back( other );
        }
      }
    }
    return false;
  };

  for ( auto stage : stage_order_ )
  {
    bool up_def = reaches( power_, ground_, stage, false );
    bool up_pos = reaches( power_, ground_, stage, true );
    bool down_def = reaches( ground_, power_, stage, false );
    bool down_pos = reaches( ground_, power_, stage, true );
    if ( up_def && !down_pos )
      value[stage] = logic_value::one;
    else if ( down_def && !up_pos )
      value[stage] = logic_value::zero;
    else
      value[stage] = logic_value::x;
  }
  return value[output_];
}

logic_value switch_sim( cell_netlist const& cell, std::uint64_t assignment )
{
  return switch_simulator( cell ).evaluate( assignment );
}

equiv_report equiv_check( cell_netlist const& cell, truth_table const& tt )
{
  switch_simulator sim( cell );
  if ( sim.num_inputs() != tt.n_inputs() )
    throw error( error_category::input, "cell has " + std::to_string( sim.num_inputs() ) + " inputs, function has " +
                                            std::to_string( tt.n_inputs() ) );
  equiv_report report;
  for ( std::uint64_t a = 0; a < tt.num_assignments(); ++a )
  {
    auto v = sim.evaluate( a );
    bool expected = tt( a );
    if ( v == logic_value::x || ( v == logic_value::one ) != expected )
      report.failing.push_back( a );
  }
  report.pass = report.failing.empty();
  return report;
}

} // namespace topcell
