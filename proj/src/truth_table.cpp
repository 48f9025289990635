#include "topcell/error.hpp"
#include "topcell/logic.hpp"

#include <cctype>

namespace topcell
{

truth_table::truth_table( unsigned n_inputs, std::uint64_t bits ) : n_inputs_( n_inputs ), bits_( bits )
{
  if ( n_inputs < 1 || n_inputs > max_inputs )
    throw error( error_category::input, "truth table needs 1 to 6 inputs" );
  if ( ( bits & ~full_mask() ) != 0 )
    throw error( error_category::input, "truth table bits exceed 2^n entries" );
}

truth_table truth_table::parse( std::string_view text )
{
  auto colon = text.find( ':' );
  if ( colon == std::string_view::npos || colon == 0 || colon + 1 >= text.size() )
    throw error( error_category::input, "function spec must look like <n>:<hex>" );
  auto n_part = text.substr( 0, colon );
  auto hex = text.substr( colon + 1 );
  if ( n_part.size() != 1 || !std::isdigit( static_cast<unsigned char>( n_part[0] ) ) )
    throw error( error_category::input, "invalid input count in '" + std::string( text ) + "'" );
  unsigned n = static_cast<unsigned>( n_part[0] - '0' );
  if ( hex.size() > 16 )
    throw error( error_category::input, "hex table too long in '" + std::string( text ) + "'" );
  std::uint64_t bits = 0;
  for ( char c : hex )
  {
    int digit;
    if ( c >= '0' && c <= '9' )
      digit = c - '0';
    else if ( c >= 'a' && c <= 'f' )
      digit = c - 'a' + 10;
    else if ( c >= 'A' && c <= 'F' )
      digit = c - 'A' + 10;
    else
      throw error( error_category::input, "invalid hex digit in '" + std::string( text ) + "'" );
    bits = ( bits << 4 ) | static_cast<std::uint64_t>( digit );
  }
  return truth_table( n, bits );
}

std::string truth_table::to_string() const
{
  static constexpr char digits[] = "0123456789ABCDEF";
  std::size_t width = n_inputs_ <= 2 ? 1 : ( std::size_t{ 1 } << n_inputs_ ) / 4;
  std::string hex( width, '0' );
  for ( std::size_t i = 0; i < width; ++i )
    hex[width - 1 - i] = digits[( bits_ >> ( 4 * i ) ) & 0xF];
  return std::to_string( n_inputs_ ) + ":" + hex;
}

} // namespace topcell
