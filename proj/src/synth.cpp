#include "topcell/error.hpp"
#include "topcell/logic.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace topcell
{

std::vector<std::string> default_input_names( unsigned n_inputs )
{
  std::vector<std::string> names;
  for ( unsigned i = 0; i < n_inputs; ++i )
    names.emplace_back( 1, static_cast<char>( 'A' + i ) );
  return names;
}

namespace
{

class cell_builder
{
public:
  cell_builder( std::string const& name, unsigned n_inputs, std::vector<std::string> const& input_names )
  {
    names_ = input_names.empty() ? default_input_names( n_inputs ) : input_names;
    if ( names_.size() != n_inputs )
      throw error( error_category::input, "input name count does not match the function" );
    cell_.name = name;
    for ( auto const& n : names_ )
    {
      if ( n == "Y" || n == "VDD" || n == "GND" || ( n.size() > 1 && n[0] == 'N' &&
                                                     std::all_of( n.begin() + 1, n.end(), []( unsigned char c ) { return std::isdigit( c ); } ) ) )
        throw error( error_category::input, "input name '" + n + "' clashes with a reserved net" );
      cell_.pins.push_back( { n, net_kind::input_pin } );
    }
    cell_.pins.push_back( y_ );
    cell_.pins.push_back( vdd_ );
    cell_.pins.push_back( gnd_ );
  }

  void build( bool_expr const& g )
  {
    if ( g.has_constant() )
      throw unsupported_expr( "constant nodes cannot be realized as a transistor network" );
    std::set<unsigned> inverted;
    collect_inverted( g, inverted );
    for ( auto v : inverted )
    {
      net_ref out = fresh();
      inverters_.emplace( v, out );
      add( mos_type::pmos, vdd_, input( v ), out );
      add( mos_type::nmos, out, input( v ), gnd_ );
    }
    pull_up( g, vdd_, y_ );
    pull_down( g, y_, gnd_ );
  }

  cell_netlist take() { return std::move( cell_ ); }

private:
  void collect_inverted( bool_expr const& e, std::set<unsigned>& out ) const
  {
    if ( e.type == bool_expr::node::literal && e.negated )
      out.insert( e.var );
    for ( auto const& c : e.children )
      collect_inverted( c, out );
  }

  net_ref input( unsigned var ) const { return { names_.at( var ), net_kind::input_pin }; }

  net_ref gate_of( bool_expr const& lit ) const
  {
    if ( lit.var >= names_.size() )
      throw error( error_category::input, "expression uses more variables than the cell has inputs" );
    return lit.negated ? inverters_.at( lit.var ) : input( lit.var );
  }

  net_ref fresh() { return { "N" + std::to_string( ++net_counter_ ), net_kind::internal }; }

  void add( mos_type type, net_ref const& drain, net_ref const& gate, net_ref const& source )
  {
    bool p = type == mos_type::pmos;
    std::string name = std::string( p ? "MP" : "MN" ) + std::to_string( p ? ++p_counter_ : ++n_counter_ );
    cell_.devices.push_back( device{ name, type, drain, gate, source, p ? vdd_ : gnd_, std::nullopt, std::nullopt } );
  }

  // series chain of `parts` between top and bottom, fresh nets at each junction
  template<typename Fn>
  void series( std::vector<bool_expr> const& parts, net_ref const& top, net_ref const& bottom, Fn&& recurse )
  {
    net_ref upper = top;
    for ( std::size_t i = 0; i < parts.size(); ++i )
    {
      net_ref lower = i + 1 == parts.size() ? bottom : fresh();
      recurse( parts[i], upper, lower );
      upper = lower;
    }
  }

  void pull_down( bool_expr const& e, net_ref const& top, net_ref const& bottom )
  {
    auto self = [this]( auto const& x, auto const& t, auto const& b ) { pull_down( x, t, b ); };
    switch ( e.type )
    {
    case bool_expr::node::literal:
      add( mos_type::nmos, top, gate_of( e ), bottom );
      break;
    case bool_expr::node::conjunction:
      series( e.children, top, bottom, self );
      break;
    case bool_expr::node::disjunction:
      for ( auto const& c : e.children )
        pull_down( c, top, bottom );
      break;
    case bool_expr::node::constant:
      throw unsupported_expr( "constant node" );
    }
  }

  void pull_up( bool_expr const& e, net_ref const& top, net_ref const& bottom )
  {
    auto self = [this]( auto const& x, auto const& t, auto const& b ) { pull_up( x, t, b ); };
    switch ( e.type )
    {
    case bool_expr::node::literal:
      add( mos_type::pmos, top, gate_of( e ), bottom );
      break;
    case bool_expr::node::conjunction:
      for ( auto const& c : e.children )
        pull_up( c, top, bottom );
      break;
    case bool_expr::node::disjunction:
      series( e.children, top, bottom, self );
      break;
    case bool_expr::node::constant:
      throw unsupported_expr( "constant node" );
    }
  }

  cell_netlist cell_;
  std::vector<std::string> names_;
  std::map<unsigned, net_ref> inverters_;
  net_ref const y_{ "Y", net_kind::output_pin };
  net_ref const vdd_{ "VDD", net_kind::power };
  net_ref const gnd_{ "GND", net_kind::ground };
  unsigned net_counter_ = 0, p_counter_ = 0, n_counter_ = 0;
};

} // namespace

cell_netlist synth_from_pull_down( std::string const& name, bool_expr const& g, unsigned n_inputs,
                                   std::vector<std::string> const& input_names )
{
  cell_builder builder( name, n_inputs, input_names );
  builder.build( g );
  return builder.take();
}

cell_netlist synth_cell( std::string const& name, bool_expr const& expr, truth_table const& tt,
                         std::vector<std::string> const& input_names )
{
  if ( expr.has_constant() )
    throw unsupported_expr( "constant nodes cannot be realized as a transistor network" );
  if ( expr.to_table( tt.n_inputs() ) != tt )
    throw error( error_category::input, "expression is not equivalent to the truth table" );
  if ( tt.is_trivial() )
    throw trivial_function();
  return synth_from_pull_down( name, pull_down_function( tt ), tt.n_inputs(), input_names );
}

} // namespace topcell
