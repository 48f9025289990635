#include "topcell/error.hpp"

namespace topcell
{

syntax_error::syntax_error( std::size_t line, std::string const& msg )
    : error( error_category::input, "line " + std::to_string( line ) + ": " + msg ), line_( line )
{
}

char const* to_string( invalid_pivot_reason reason )
{
  switch ( reason )
  {
  case invalid_pivot_reason::not_found:
    return "NotFound";
  case invalid_pivot_reason::gate_only:
    return "GateOnly";
  case invalid_pivot_reason::mixed_networks:
    return "MixedNetworks";
  case invalid_pivot_reason::rail_or_pin:
    return "RailOrPin";
  }
  return "Unknown";
}

invalid_pivot::invalid_pivot( std::string const& net, invalid_pivot_reason reason )
    : error( error_category::domain, std::string( invalid_pivot_prompt ) + " (" + net + ": " + to_string( reason ) + ")" ),
      net_( net ),
      reason_( reason )
{
}

} // namespace topcell
