#include "topcell/permute.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

namespace topcell
{

namespace
{

// Internal nets are relabeled by colour refinement with individualization;
// all other nets keep their names.
class canonizer
{
public:
  explicit canonizer( cell_netlist const& cell ) : cell_( cell )
  {
    for ( auto const& n : cell.nets() )
    {
      if ( n.kind == net_kind::internal )
      {
        index_.emplace( n.name, internal_.size() );
        internal_.push_back( n.name );
      }
    }
    incident_.resize( internal_.size() );
    for ( std::size_t d = 0; d < cell.devices.size(); ++d )
    {
      auto const& dev = cell.devices[d];
      for ( auto const* n : { &dev.drain, &dev.gate, &dev.source, &dev.bulk } )
      {
        if ( auto it = index_.find( n->name ); it != index_.end() )
          incident_[it->second].push_back( d );
      }
    }
    for ( auto& v : incident_ )
      v.erase( std::unique( v.begin(), v.end() ), v.end() );
  }

  std::string run()
  {
    std::vector<std::size_t> colors( internal_.size(), 0 );
    refine( colors );
    return search( colors );
  }

private:
  std::string label( std::string const& net, std::vector<std::size_t> const& colors, std::string const* self ) const
  {
    if ( self && net == *self )
      return "*";
    auto it = index_.find( net );
    return it == index_.end() ? "=" + net : "#" + std::to_string( colors[it->second] );
  }

  std::string render( device const& d, std::vector<std::size_t> const& colors, std::string const* self ) const
  {
    std::string s = to_string( d.type );
    for ( auto const* n : { &d.drain, &d.gate, &d.source, &d.bulk } )
      s += " " + label( n->name, colors, self );
    if ( d.width_nm )
      s += " W=" + std::to_string( *d.width_nm );
    if ( d.length_nm )
      s += " L=" + std::to_string( *d.length_nm );
    return s;
  }

  static std::size_t num_classes( std::vector<std::size_t> const& colors )
  {
    std::vector<std::size_t> c = colors;
    std::sort( c.begin(), c.end() );
    return static_cast<std::size_t>( std::unique( c.begin(), c.end() ) - c.begin() );
  }

  void refine( std::vector<std::size_t>& colors ) const
  {
    auto classes = num_classes( colors );
    while ( true )
    {
      std::vector<std::string> sigs( internal_.size() );
      for ( std::size_t i = 0; i < internal_.size(); ++i )
      {
        std::vector<std::string> entries;
        for ( auto d : incident_[i] )
          entries.push_back( render( cell_.devices[d], colors, &internal_[i] ) );
        std::sort( entries.begin(), entries.end() );
        sigs[i] = std::to_string( colors[i] );
        for ( auto const& e : entries )
          sigs[i] += "|" + e;
      }
      std::vector<std::string> sorted = sigs;
      std::sort( sorted.begin(), sorted.end() );
      sorted.erase( std::unique( sorted.begin(), sorted.end() ), sorted.end() );
      for ( std::size_t i = 0; i < internal_.size(); ++i )
        colors[i] = static_cast<std::size_t>( std::lower_bound( sorted.begin(), sorted.end(), sigs[i] ) - sorted.begin() );
      auto next = sorted.size();
      if ( next == classes )
        return;
      classes = next;
    }
  }

  std::string search( std::vector<std::size_t> const& colors ) const
  {
    // smallest colour shared by several nets
    std::map<std::size_t, std::vector<std::size_t>> cells;
    for ( std::size_t i = 0; i < colors.size(); ++i )
      cells[colors[i]].push_back( i );
    auto tie = std::find_if( cells.begin(), cells.end(), []( auto const& c ) { return c.second.size() > 1; } );
    if ( tie == cells.end() )
      return form( colors );

    std::string best;
    bool first = true;
    for ( auto member : tie->second )
    {
      auto branch = colors;
      branch[member] = internal_.size();
      refine( branch );
      auto candidate = search( branch );
      if ( first || candidate < best )
      {
        best = std::move( candidate );
        first = false;
      }
    }
    return best;
  }

  std::string form( std::vector<std::size_t> const& colors ) const
  {
    std::string out = "PINS";
    for ( auto const& p : cell_.pins )
      out += " " + p.name + ":" + to_string( p.kind );
    std::vector<std::string> devices;
    for ( auto const& d : cell_.devices )
      devices.push_back( render( d, colors, nullptr ) );
    std::sort( devices.begin(), devices.end() );
    for ( auto const& d : devices )
      out += "\n" + d;
    return out;
  }

  cell_netlist const& cell_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> internal_;
  std::vector<std::vector<std::size_t>> incident_;
};

} // namespace

std::string canonical_form( cell_netlist const& cell )
{
  return canonizer( cell ).run();
}

std::uint64_t canonical_hash( cell_netlist const& cell )
{
  std::uint64_t h = 0xcbf29ce484222325ull;
  for ( unsigned char c : canonical_form( cell ) )
  {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string digest_hex( std::uint64_t digest )
{
  char buf[17];
  std::snprintf( buf, sizeof buf, "%016llx", static_cast<unsigned long long>( digest ) );
  return buf;
}

} // namespace topcell
