#include "topcell/netlist.hpp"

#include "topcell/error.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace topcell
{

char const* to_string( net_kind kind )
{
  switch ( kind )
  {
  case net_kind::power:
    return "Power";
  case net_kind::ground:
    return "Ground";
  case net_kind::input_pin:
    return "InputPin";
  case net_kind::output_pin:
    return "OutputPin";
  case net_kind::internal:
    return "Internal";
  }
  return "?";
}

char const* to_string( mos_type type )
{
  return type == mos_type::pmos ? "PMOS" : "NMOS";
}

char const* to_string( violation_kind kind )
{
  switch ( kind )
  {
  case violation_kind::rail_gated_device:
    return "rail-gated device";
  case violation_kind::floating_net:
    return "floating internal net";
  case violation_kind::unattached_output:
    return "output pin without channel attachment";
  case violation_kind::device_count_mismatch:
    return "PMOS/NMOS count mismatch";
  case violation_kind::missing_output:
    return "no output pin";
  case violation_kind::multiple_outputs:
    return "multiple output pins";
  case violation_kind::multiple_rails:
    return "more than one power or ground net";
  }
  return "?";
}

/* cell_netlist */

std::vector<net_ref> cell_netlist::input_pins() const
{
  std::vector<net_ref> out;
  std::copy_if( pins.begin(), pins.end(), std::back_inserter( out ),
                []( auto const& p ) { return p.kind == net_kind::input_pin; } );
  return out;
}

std::vector<net_ref> cell_netlist::output_pins() const
{
  std::vector<net_ref> out;
  std::copy_if( pins.begin(), pins.end(), std::back_inserter( out ),
                []( auto const& p ) { return p.kind == net_kind::output_pin; } );
  return out;
}

net_ref const& cell_netlist::output() const
{
  auto it = std::find_if( pins.begin(), pins.end(), []( auto const& p ) { return p.kind == net_kind::output_pin; } );
  if ( it == pins.end() )
  {
    throw error( error_category::input, "cell '" + name + "' has no output pin" );
  }
  return *it;
}

std::vector<net_ref> cell_netlist::nets() const
{
  std::map<std::string, net_ref> all;
  for ( auto const& p : pins )
  {
    all.emplace( p.name, p );
  }
  for ( auto const& d : devices )
  {
    for ( auto const* n : { &d.drain, &d.gate, &d.source, &d.bulk } )
    {
      all.emplace( n->name, *n );
    }
  }
  std::vector<net_ref> out;
  out.reserve( all.size() );
  for ( auto& [_, n] : all )
  {
    out.push_back( n );
  }
  return out;
}

std::optional<net_ref> cell_netlist::find_net( std::string_view net_name ) const
{
  for ( auto const& p : pins )
  {
    if ( p.name == net_name )
      return p;
  }
  for ( auto const& d : devices )
  {
    for ( auto const* n : { &d.drain, &d.gate, &d.source, &d.bulk } )
    {
      if ( n->name == net_name )
        return *n;
    }
  }
  return std::nullopt;
}

std::optional<net_ref> cell_netlist::power() const
{
  for ( auto const& n : nets() )
  {
    if ( n.kind == net_kind::power )
      return n;
  }
  return std::nullopt;
}

std::optional<net_ref> cell_netlist::ground() const
{
  for ( auto const& n : nets() )
  {
    if ( n.kind == net_kind::ground )
      return n;
  }
  return std::nullopt;
}

std::size_t cell_netlist::count( mos_type type ) const
{
  return static_cast<std::size_t>(
      std::count_if( devices.begin(), devices.end(), [type]( auto const& d ) { return d.type == type; } ) );
}

/* parsing */

namespace
{

struct logical_line
{
  std::size_t number;
  std::vector<std::string> tokens;
};

std::string upper( std::string_view s )
{
  std::string out( s );
  std::transform( out.begin(), out.end(), out.begin(),
                  []( unsigned char c ) { return static_cast<char>( std::toupper( c ) ); } );
  return out;
}

std::vector<std::string> tokenize( std::string_view line )
{
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while ( i < line.size() )
  {
    while ( i < line.size() && std::isspace( static_cast<unsigned char>( line[i] ) ) )
      ++i;
    std::size_t j = i;
    while ( j < line.size() && !std::isspace( static_cast<unsigned char>( line[j] ) ) )
      ++j;
    if ( j > i )
      tokens.push_back( upper( line.substr( i, j - i ) ) );
    i = j;
  }
  return tokens;
}

std::vector<logical_line> split_lines( std::string_view text )
{
  std::vector<logical_line> lines;
  std::size_t number = 0;
  std::size_t pos = 0;
  while ( pos <= text.size() )
  {
    auto end = text.find( '\n', pos );
    if ( end == std::string_view::npos )
      end = text.size();
    auto raw = text.substr( pos, end - pos );
    if ( !raw.empty() && raw.back() == '\r' )
      raw.remove_suffix( 1 );
    ++number;
    pos = end + 1;

    auto first = raw.find_first_not_of( " \t" );
    if ( first == std::string_view::npos )
      continue;
    raw.remove_prefix( first );
    if ( raw.front() == '*' )
      continue;
    if ( raw.front() == '+' )
    {
      if ( lines.empty() )
        throw syntax_error( number, "continuation line without a preceding line" );
      for ( auto& t : tokenize( raw.substr( 1 ) ) )
        lines.back().tokens.push_back( std::move( t ) );
      continue;
    }
    auto tokens = tokenize( raw );
    if ( !tokens.empty() )
      lines.push_back( { number, std::move( tokens ) } );
  }
  return lines;
}

bool is_power_name( std::string_view n ) { return n == "VDD" || n == "VCC"; }
bool is_ground_name( std::string_view n ) { return n == "VSS" || n == "GND" || n == "0"; }

std::optional<int> parse_dimension( std::string_view token, std::string_view key, std::size_t line )
{
  // <key>=<int>N
  auto body = token.substr( key.size() );
  if ( body.size() < 2 || body.back() != 'N' )
    throw syntax_error( line, "expected " + std::string( key ) + "<int>n, got '" + std::string( token ) + "'" );
  body.remove_suffix( 1 );
  if ( !std::all_of( body.begin(), body.end(), []( unsigned char c ) { return std::isdigit( c ); } ) || body.size() > 9 )
    throw syntax_error( line, "invalid dimension '" + std::string( token ) + "'" );
  int value = std::stoi( std::string( body ) );
  if ( value <= 0 )
    throw syntax_error( line, "dimension must be positive in '" + std::string( token ) + "'" );
  return value;
}

struct raw_device
{
  std::string name;
  mos_type type;
  std::string drain, gate, source, bulk;
  std::optional<int> width_nm, length_nm;
};

} // namespace

cell_netlist parse_spice( std::string_view text )
{
  auto const lines = split_lines( text );

  std::string cell_name;
  std::vector<std::string> pin_names;
  std::vector<raw_device> raws;
  bool in_subckt = false;
  bool done = false;
  std::size_t last_line = 0;

  for ( auto const& ln : lines )
  {
    last_line = ln.number;
    auto const& tok = ln.tokens;
    auto const& head = tok.front();
    if ( done )
      throw syntax_error( ln.number, "content after .ENDS" );

    if ( head == ".SUBCKT" )
    {
      if ( in_subckt )
        throw syntax_error( ln.number, "nested .SUBCKT" );
      if ( tok.size() < 3 )
        throw syntax_error( ln.number, ".SUBCKT needs a name and at least one pin" );
      cell_name = tok[1];
      std::set<std::string> seen;
      for ( std::size_t i = 2; i < tok.size(); ++i )
      {
        if ( !seen.insert( tok[i] ).second )
          throw syntax_error( ln.number, "pin '" + tok[i] + "' declared twice" );
        pin_names.push_back( tok[i] );
      }
      in_subckt = true;
    }
    else if ( head == ".ENDS" )
    {
      if ( !in_subckt )
        throw syntax_error( ln.number, ".ENDS without .SUBCKT" );
      if ( tok.size() > 2 || ( tok.size() == 2 && tok[1] != cell_name ) )
        throw syntax_error( ln.number, "malformed .ENDS" );
      in_subckt = false;
      done = true;
    }
    else if ( head.front() == 'M' )
    {
      if ( !in_subckt )
        throw syntax_error( ln.number, "device outside .SUBCKT" );
      if ( tok.size() < 6 || tok.size() > 8 )
        throw syntax_error( ln.number, "device line needs drain gate source bulk model" );
      raw_device rd;
      rd.name = tok[0];
      rd.drain = tok[1];
      rd.gate = tok[2];
      rd.source = tok[3];
      rd.bulk = tok[4];
      if ( tok[5] == "PMOS" )
        rd.type = mos_type::pmos;
      else if ( tok[5] == "NMOS" )
        rd.type = mos_type::nmos;
      else
        throw syntax_error( ln.number, "unknown model '" + tok[5] + "'" );
      for ( std::size_t i = 6; i < tok.size(); ++i )
      {
        if ( tok[i].starts_with( "W=" ) && !rd.width_nm )
          rd.width_nm = parse_dimension( tok[i], "W=", ln.number );
        else if ( tok[i].starts_with( "L=" ) && !rd.length_nm )
          rd.length_nm = parse_dimension( tok[i], "L=", ln.number );
        else
          throw syntax_error( ln.number, "unexpected parameter '" + tok[i] + "'" );
      }
      if ( rd.drain == rd.source )
        throw syntax_error( ln.number, "device '" + rd.name + "' has drain tied to source" );
      if ( std::any_of( raws.begin(), raws.end(), [&]( auto const& r ) { return r.name == rd.name; } ) )
        throw duplicate_device( rd.name );
      raws.push_back( std::move( rd ) );
    }
    else
    {
      throw syntax_error( ln.number, "unsupported statement '" + head + "'" );
    }
  }
  if ( in_subckt )
    throw syntax_error( last_line, "missing .ENDS" );
  if ( !done )
    throw syntax_error( last_line, "no .SUBCKT found" );
  if ( raws.empty() )
    throw syntax_error( last_line, "subcircuit has no devices" );

  std::unordered_set<std::string> channel_nets;
  for ( auto const& r : raws )
  {
    channel_nets.insert( r.drain );
    channel_nets.insert( r.source );
  }
  std::unordered_set<std::string> pin_set( pin_names.begin(), pin_names.end() );
  auto kind_of = [&]( std::string const& n ) {
    if ( is_power_name( n ) )
      return net_kind::power;
    if ( is_ground_name( n ) )
      return net_kind::ground;
    if ( pin_set.count( n ) )
      return channel_nets.count( n ) ? net_kind::output_pin : net_kind::input_pin;
    return net_kind::internal;
  };
  auto ref = [&]( std::string const& n ) { return net_ref{ n, kind_of( n ) }; };

  cell_netlist cell;
  cell.name = cell_name;
  for ( auto const& p : pin_names )
    cell.pins.push_back( ref( p ) );
  for ( auto const& r : raws )
  {
    cell.devices.push_back(
        device{ r.name, r.type, ref( r.drain ), ref( r.gate ), ref( r.source ), ref( r.bulk ), r.width_nm, r.length_nm } );
  }
  if ( !cell.power() )
    throw missing_rail( "power" );
  if ( !cell.ground() )
    throw missing_rail( "ground" );
  return cell;
}

std::string serialize_spice( cell_netlist const& cell )
{
  std::ostringstream os;
  os << ".SUBCKT " << cell.name;
  for ( auto const& p : cell.pins )
    os << ' ' << p.name;
  os << '\n';
  for ( auto const& d : cell.devices )
  {
    os << d.name << ' ' << d.drain.name << ' ' << d.gate.name << ' ' << d.source.name << ' ' << d.bulk.name << ' '
       << to_string( d.type );
    if ( d.width_nm )
      os << " W=" << *d.width_nm << 'n';
    if ( d.length_nm )
      os << " L=" << *d.length_nm << 'n';
    os << '\n';
  }
  os << ".ENDS\n";
  return os.str();
}

/* validation */

std::size_t validation_report::count( violation_kind kind ) const
{
  return static_cast<std::size_t>(
      std::count_if( violations.begin(), violations.end(), [kind]( auto const& v ) { return v.kind == kind; } ) );
}

validation_report validate_cell( cell_netlist const& cell )
{
  validation_report report;
  auto add = [&]( violation_kind k, std::string subject ) { report.violations.push_back( { k, std::move( subject ) } ); };

  std::size_t n_power = 0, n_ground = 0;
  for ( auto const& n : cell.nets() )
  {
    n_power += n.kind == net_kind::power;
    n_ground += n.kind == net_kind::ground;
  }
  if ( n_power > 1 || n_ground > 1 )
    add( violation_kind::multiple_rails, cell.name );

  for ( auto const& d : cell.devices )
  {
    if ( d.gate.is_rail() )
      add( violation_kind::rail_gated_device, d.name );
  }

  std::map<std::string, std::size_t> attachments;
  for ( auto const& d : cell.devices )
  {
    ++attachments[d.drain.name];
    ++attachments[d.gate.name];
    ++attachments[d.source.name];
  }
  for ( auto const& n : cell.nets() )
  {
    if ( n.kind == net_kind::internal && attachments[n.name] == 1 )
      add( violation_kind::floating_net, n.name );
  }

  auto outputs = cell.output_pins();
  if ( outputs.empty() )
    add( violation_kind::missing_output, cell.name );
  if ( outputs.size() > 1 )
    add( violation_kind::multiple_outputs, cell.name );
  for ( auto const& p : cell.pins )
  {
    bool on_channel = std::any_of( cell.devices.begin(), cell.devices.end(),
                                   [&]( auto const& d ) { return d.touches_channel( p.name ); } );
    if ( p.kind == net_kind::output_pin && !on_channel )
      add( violation_kind::unattached_output, p.name );
  }

  if ( cell.count( mos_type::pmos ) != cell.count( mos_type::nmos ) )
    add( violation_kind::device_count_mismatch, cell.name );
  return report;
}

/* orientation */

namespace
{

void orient_network( cell_netlist& cell, mos_type type, std::set<std::string> const& top,
                     std::set<std::string> const& bottom )
{
  std::vector<std::size_t> devs;
  for ( std::size_t i = 0; i < cell.devices.size(); ++i )
  {
    if ( cell.devices[i].type == type )
      devs.push_back( i );
  }
  if ( devs.empty() )
    return;

  std::map<std::string, std::vector<std::size_t>> incident;
  for ( auto i : devs )
  {
    incident[cell.devices[i].drain.name].push_back( i );
    incident[cell.devices[i].source.name].push_back( i );
  }

  // upper terminal of each device once oriented
  std::unordered_map<std::size_t, std::string> up;

  std::vector<std::pair<std::size_t, std::string>> path; // (device, entry net)
  std::set<std::string> on_path;
  std::size_t budget = 1u << 20;

  std::function<void( std::string const& )> dfs = [&]( std::string const& net ) {
    if ( budget == 0 )
      return;
    --budget;
    if ( !path.empty() && bottom.count( net ) )
    {
      for ( auto const& [dev, from] : path )
        up.emplace( dev, from );
      return;
    }
    if ( !path.empty() && top.count( net ) )
      return;
    for ( auto dev : incident[net] )
    {
      auto const& d = cell.devices[dev];
      auto const& other = d.drain.name == net ? d.source.name : d.drain.name;
      if ( on_path.count( other ) )
        continue;
      on_path.insert( other );
      path.emplace_back( dev, net );
      dfs( other );
      path.pop_back();
      on_path.erase( other );
    }
  };
  for ( auto const& t : top )
  {
    if ( !incident.count( t ) )
      continue;
    on_path = { t };
    dfs( t );
  }

  auto bfs = [&]( std::set<std::string> const& sources ) {
    std::map<std::string, std::size_t> dist;
    std::deque<std::string> queue;
    for ( auto const& s : sources )
    {
      if ( incident.count( s ) )
      {
        dist[s] = 0;
        queue.push_back( s );
      }
    }
    while ( !queue.empty() )
    {
      auto n = queue.front();
      queue.pop_front();
      for ( auto dev : incident[n] )
      {
        auto const& d = cell.devices[dev];
        auto const& other = d.drain.name == n ? d.source.name : d.drain.name;
        if ( !dist.count( other ) )
        {
          dist[other] = dist[n] + 1;
          queue.push_back( other );
        }
      }
    }
    return dist;
  };
  auto const from_top = bfs( top );
  auto const from_bottom = bfs( bottom );
  constexpr auto inf = std::numeric_limits<std::size_t>::max();
  auto lookup = []( auto const& m, std::string const& k ) {
    auto it = m.find( k );
    return it == m.end() ? inf : it->second;
  };

  for ( auto i : devs )
  {
    auto& d = cell.devices[i];
    if ( auto it = up.find( i ); it != up.end() )
    {
      if ( d.drain.name != it->second )
        std::swap( d.drain, d.source );
      continue;
    }
    auto td = lookup( from_top, d.drain.name ), ts = lookup( from_top, d.source.name );
    auto bd = lookup( from_bottom, d.drain.name ), bs = lookup( from_bottom, d.source.name );
    if ( td == inf && bd == inf )
      throw disconnected_network( d.name );
    if ( ts < td || ( ts == td && bs > bd ) )
      std::swap( d.drain, d.source );
  }
}

} // namespace

cell_netlist normalize_orientation( cell_netlist const& cell )
{
  cell_netlist out = cell;
  auto power = cell.power();
  auto ground = cell.ground();
  if ( !power )
    throw missing_rail( "power" );
  if ( !ground )
    throw missing_rail( "ground" );

  std::set<std::string> p_channel, n_channel;
  for ( auto const& d : cell.devices )
  {
    auto& s = d.type == mos_type::pmos ? p_channel : n_channel;
    s.insert( d.drain.name );
    s.insert( d.source.name );
  }
  std::set<std::string> stage_outputs;
  for ( auto const& p : cell.output_pins() )
    stage_outputs.insert( p.name );
  for ( auto const& n : p_channel )
  {
    if ( n_channel.count( n ) && n != power->name && n != ground->name )
      stage_outputs.insert( n );
  }

  orient_network( out, mos_type::pmos, { power->name }, stage_outputs );
  orient_network( out, mos_type::nmos, stage_outputs, { ground->name } );
  return out;
}

} // namespace topcell
