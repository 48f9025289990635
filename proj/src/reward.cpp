#include "topcell/error.hpp"
#include "topcell/permute.hpp"
#include "topcell/reward.hpp"

namespace topcell
{

double reward_of( reward_source const& source, cell_netlist const& cell )
{
  if ( auto const* params = std::get_if<gnn_params>( &source ) )
    return gnn_forward( encode_cell_graph( cell ), *params );
  if ( std::holds_alternative<proxy_reward>( source ) )
    return proxy_score( cell ).score;

  auto const& table = std::get<reward_table>( source );
  auto digest = canonical_hash( cell );
  auto it = table.find( digest );
  if ( it == table.end() )
    throw missing_table_entry( digest_hex( digest ) );
  return it->second;
}

} // namespace topcell
