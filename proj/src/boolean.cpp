#include "topcell/error.hpp"
#include "topcell/logic.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <optional>
#include <set>

namespace topcell
{

/* bool_expr */

bool_expr bool_expr::literal( unsigned var, bool negated )
{
  bool_expr e;
  e.type = node::literal;
  e.var = var;
  e.negated = negated;
  return e;
}

bool_expr bool_expr::constant( bool value )
{
  bool_expr e;
  e.type = node::constant;
  e.value = value;
  return e;
}

namespace
{

bool_expr combine( bool_expr::node type, std::vector<bool_expr> operands )
{
  if ( operands.empty() )
    throw unsupported_expr( "empty And/Or" );
  std::vector<bool_expr> flat;
  for ( auto& op : operands )
  {
    if ( op.type == type )
    {
      for ( auto& c : op.children )
        flat.push_back( std::move( c ) );
    }
    else
    {
      flat.push_back( std::move( op ) );
    }
  }
  if ( flat.size() == 1 )
    return std::move( flat.front() );
  bool_expr e;
  e.type = type;
  e.children = std::move( flat );
  return e;
}

} // namespace

bool_expr bool_expr::conj( std::vector<bool_expr> operands )
{
  return combine( node::conjunction, std::move( operands ) );
}

bool_expr bool_expr::disj( std::vector<bool_expr> operands )
{
  return combine( node::disjunction, std::move( operands ) );
}

bool bool_expr::evaluate( std::uint64_t assignment ) const
{
  switch ( type )
  {
  case node::literal:
    return ( ( assignment >> var ) & 1u ) != static_cast<unsigned>( negated );
  case node::constant:
    return value;
  case node::conjunction:
    return std::all_of( children.begin(), children.end(), [&]( auto const& c ) { return c.evaluate( assignment ); } );
  case node::disjunction:
    return std::any_of( children.begin(), children.end(), [&]( auto const& c ) { return c.evaluate( assignment ); } );
  }
  return false;
}

std::size_t bool_expr::literal_count() const
{
  if ( type == node::literal )
    return 1;
  std::size_t n = 0;
  for ( auto const& c : children )
    n += c.literal_count();
  return n;
}

unsigned bool_expr::support_bound() const
{
  if ( type == node::literal )
    return var + 1;
  unsigned n = 0;
  for ( auto const& c : children )
    n = std::max( n, c.support_bound() );
  return n;
}

bool bool_expr::has_constant() const
{
  if ( type == node::constant )
    return true;
  return std::any_of( children.begin(), children.end(), []( auto const& c ) { return c.has_constant(); } );
}

truth_table bool_expr::to_table( unsigned n_inputs ) const
{
  if ( support_bound() > n_inputs )
    throw error( error_category::input, "expression uses more variables than the table has inputs" );
  std::uint64_t bits = 0;
  for ( std::uint64_t a = 0; a < ( std::uint64_t{ 1 } << n_inputs ); ++a )
  {
    if ( evaluate( a ) )
      bits |= std::uint64_t{ 1 } << a;
  }
  return truth_table( n_inputs, bits );
}

std::string bool_expr::to_string( std::vector<std::string> const& names ) const
{
  switch ( type )
  {
  case node::constant:
    return value ? "1" : "0";
  case node::literal:
  {
    std::string name = var < names.size() ? names[var] : std::string( 1, static_cast<char>( 'a' + var ) );
    return negated ? "!" + name : name;
  }
  case node::conjunction:
  case node::disjunction:
  {
    std::string out;
    char const* sep = type == node::conjunction ? " & " : " | ";
    for ( std::size_t i = 0; i < children.size(); ++i )
    {
      if ( i )
        out += sep;
      auto const& c = children[i];
      bool wrap = c.type == node::conjunction || c.type == node::disjunction;
      out += wrap ? "(" + c.to_string( names ) + ")" : c.to_string( names );
    }
    return out;
  }
  }
  return {};
}

unsigned implicant::literal_count() const noexcept
{
  return static_cast<unsigned>( std::popcount( mask ) );
}

/* cubes */

namespace
{

// literal as (var, negated); ordering puts lower variables and positive phase first
using lit = std::pair<unsigned, bool>;
using cube = std::vector<lit>;

cube to_cube( implicant const& imp, unsigned n_inputs )
{
  cube c;
  for ( unsigned v = 0; v < n_inputs; ++v )
  {
    if ( ( imp.mask >> v ) & 1u )
      c.emplace_back( v, ( ( imp.value >> v ) & 1u ) == 0 );
  }
  return c;
}

bool_expr cube_expr( cube const& c )
{
  if ( c.empty() )
    return bool_expr::constant( true );
  std::vector<bool_expr> lits;
  for ( auto [v, neg] : c )
    lits.push_back( bool_expr::literal( v, neg ) );
  return bool_expr::conj( std::move( lits ) );
}

bool_expr cubes_expr( std::vector<cube> const& cubes )
{
  if ( cubes.empty() )
    return bool_expr::constant( false );
  std::vector<bool_expr> terms;
  for ( auto const& c : cubes )
    terms.push_back( cube_expr( c ) );
  return bool_expr::disj( std::move( terms ) );
}

std::optional<cube> as_cube( bool_expr const& e )
{
  if ( e.type == bool_expr::node::literal )
    return cube{ { e.var, e.negated } };
  if ( e.type != bool_expr::node::conjunction )
    return std::nullopt;
  cube c;
  for ( auto const& ch : e.children )
  {
    if ( ch.type != bool_expr::node::literal )
      return std::nullopt;
    c.emplace_back( ch.var, ch.negated );
  }
  return c;
}

std::optional<std::vector<cube>> as_cubes( bool_expr const& e )
{
  if ( e.type == bool_expr::node::disjunction )
  {
    std::vector<cube> cubes;
    for ( auto const& ch : e.children )
    {
      auto c = as_cube( ch );
      if ( !c )
        return std::nullopt;
      cubes.push_back( std::move( *c ) );
    }
    return cubes;
  }
  if ( auto c = as_cube( e ) )
    return std::vector<cube>{ std::move( *c ) };
  return std::nullopt;
}

} // namespace

bool_expr table_to_sop( truth_table const& tt )
{
  if ( tt.is_trivial() )
    throw trivial_function();
  std::vector<cube> cubes;
  for ( std::uint64_t m = 0; m < tt.num_assignments(); ++m )
  {
    if ( !tt( m ) )
      continue;
    cube c;
    for ( unsigned v = 0; v < tt.n_inputs(); ++v )
      c.emplace_back( v, ( ( m >> v ) & 1u ) == 0 );
    cubes.push_back( std::move( c ) );
  }
  return cubes_expr( cubes );
}

std::vector<implicant> prime_implicants( truth_table const& tt )
{
  std::uint32_t const full = ( 1u << tt.n_inputs() ) - 1;
  std::set<std::pair<std::uint32_t, std::uint32_t>> current;
  for ( std::uint64_t m = 0; m < tt.num_assignments(); ++m )
  {
    if ( tt( m ) )
      current.emplace( full, static_cast<std::uint32_t>( m ) );
  }

  std::vector<implicant> primes;
  while ( !current.empty() )
  {
    std::set<std::pair<std::uint32_t, std::uint32_t>> next;
    std::set<std::pair<std::uint32_t, std::uint32_t>> merged;
    for ( auto it = current.begin(); it != current.end(); ++it )
    {
      for ( auto jt = std::next( it ); jt != current.end(); ++jt )
      {
        if ( it->first != jt->first )
          continue;
        auto diff = it->second ^ jt->second;
        if ( std::popcount( diff ) != 1 )
          continue;
        next.emplace( it->first & ~diff, it->second & ~diff );
        merged.insert( *it );
        merged.insert( *jt );
      }
    }
    for ( auto const& imp : current )
    {
      if ( !merged.count( imp ) )
        primes.push_back( { imp.first, imp.second } );
    }
    current = std::move( next );
  }
  return primes;
}

bool_expr minimize_sop( bool_expr const& sop, unsigned n_inputs )
{
  auto tt = sop.to_table( n_inputs );
  if ( tt.bits() == 0 )
    return bool_expr::constant( false );
  if ( tt.is_trivial() )
    return bool_expr::constant( true );

  auto primes = prime_implicants( tt );
  std::vector<std::uint64_t> on_set;
  for ( std::uint64_t m = 0; m < tt.num_assignments(); ++m )
  {
    if ( tt( m ) )
      on_set.push_back( m );
  }

  std::vector<bool> chosen( primes.size(), false );
  std::set<std::uint64_t> uncovered( on_set.begin(), on_set.end() );
  auto take = [&]( std::size_t i ) {
    chosen[i] = true;
    for ( auto it = uncovered.begin(); it != uncovered.end(); )
      it = primes[i].covers( *it ) ? uncovered.erase( it ) : std::next( it );
  };

  // essential primes
  for ( auto m : on_set )
  {
    std::size_t count = 0, last = 0;
    for ( std::size_t i = 0; i < primes.size(); ++i )
    {
      if ( primes[i].covers( m ) )
      {
        ++count;
        last = i;
      }
    }
    if ( count == 1 && !chosen[last] )
      take( last );
  }

  // greedy: most new minterms, then fewest literals, then cube order
  auto key = [&]( std::size_t i ) { return to_cube( primes[i], n_inputs ); };
  while ( !uncovered.empty() )
  {
    std::size_t best = primes.size();
    std::size_t best_gain = 0;
    for ( std::size_t i = 0; i < primes.size(); ++i )
    {
      if ( chosen[i] )
        continue;
      auto gain = static_cast<std::size_t>(
          std::count_if( uncovered.begin(), uncovered.end(), [&]( auto m ) { return primes[i].covers( m ); } ) );
      if ( gain == 0 )
        continue;
      bool better = best == primes.size() || gain > best_gain ||
                    ( gain == best_gain && ( primes[i].literal_count() < primes[best].literal_count() ||
                                             ( primes[i].literal_count() == primes[best].literal_count() &&
                                               key( i ) < key( best ) ) ) );
      if ( better )
      {
        best = i;
        best_gain = gain;
      }
    }
    take( best );
  }

  // drop primes made redundant by later picks
  for ( std::size_t i = primes.size(); i-- > 0; )
  {
    if ( !chosen[i] )
      continue;
    bool redundant = std::all_of( on_set.begin(), on_set.end(), [&]( auto m ) {
      if ( !primes[i].covers( m ) )
        return true;
      for ( std::size_t j = 0; j < primes.size(); ++j )
      {
        if ( j != i && chosen[j] && primes[j].covers( m ) )
          return true;
      }
      return false;
    } );
    if ( redundant )
      chosen[i] = false;
  }

  std::vector<cube> cubes;
  for ( std::size_t i = 0; i < primes.size(); ++i )
  {
    if ( chosen[i] )
      cubes.push_back( to_cube( primes[i], n_inputs ) );
  }
  std::sort( cubes.begin(), cubes.end() );
  auto result = cubes_expr( cubes );

  if ( result.literal_count() > sop.literal_count() )
  {
    if ( auto input = as_cubes( sop ) )
    {
      for ( auto& c : *input )
        std::sort( c.begin(), c.end() );
      return cubes_expr( *input );
    }
  }
  return result;
}

bool_expr minimize_sop( bool_expr const& sop )
{
  return minimize_sop( sop, std::max( 1u, sop.support_bound() ) );
}

namespace
{

bool_expr factor_cubes( std::vector<cube> const& cubes )
{
  if ( cubes.size() == 1 )
    return cube_expr( cubes.front() );

  std::map<lit, std::size_t> freq;
  for ( auto const& c : cubes )
  {
    for ( auto const& l : c )
      ++freq[l];
  }
  // std::map order is (var asc, positive first); keep the first maximum
  lit best{};
  std::size_t best_count = 0;
  for ( auto const& [l, n] : freq )
  {
    if ( n > best_count )
    {
      best = l;
      best_count = n;
    }
  }
  if ( best_count <= 1 )
    return cubes_expr( cubes );

  std::vector<cube> quotient, remainder;
  bool absorbed = false;
  for ( auto const& c : cubes )
  {
    auto it = std::find( c.begin(), c.end(), best );
    if ( it == c.end() )
    {
      remainder.push_back( c );
      continue;
    }
    cube q = c;
    q.erase( q.begin() + ( it - c.begin() ) );
    absorbed |= q.empty();
    quotient.push_back( std::move( q ) );
  }

  auto divisor = bool_expr::literal( best.first, best.second );
  bool_expr term = absorbed ? divisor : bool_expr::conj( { divisor, factor_cubes( quotient ) } );
  if ( remainder.empty() )
    return term;
  return bool_expr::disj( { std::move( term ), factor_cubes( remainder ) } );
}

} // namespace

bool_expr factor_expr( bool_expr const& sop )
{
  auto cubes = as_cubes( sop );
  if ( !cubes )
    return sop;
  return factor_cubes( *cubes );
}

bool_expr pull_down_function( truth_table const& tt )
{
  auto g = ~tt;
  return factor_expr( minimize_sop( table_to_sop( g ), g.n_inputs() ) );
}

} // namespace topcell
