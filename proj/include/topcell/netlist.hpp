/*!
  \file netlist.hpp
  \brief Transistor-level standard-cell netlists in a small SPICE subset

  Grammar accepted by parse_spice:

      .SUBCKT <cell_name> <pin>+
      M<name> <drain> <gate> <source> <bulk> <PMOS|NMOS> [W=<int>n] [L=<int>n]
      .ENDS

  Lines starting with `*` are comments, `+` continues the previous line and
  identifiers are upper-cased.  Throughout the toolkit the drain of a device
  is its "up" terminal: closer to VDD in the pull-up network and closer to
  the stage output in the pull-down network (see normalize_orientation).
*/

#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace topcell
{

enum class net_kind
{
  power,
  ground,
  input_pin,
  output_pin,
  internal
};

char const* to_string( net_kind kind );

struct net_ref
{
  std::string name;
  net_kind kind = net_kind::internal;

  bool operator==( net_ref const& ) const = default;
  auto operator<=>( net_ref const& ) const = default;

  bool is_rail() const noexcept { return kind == net_kind::power || kind == net_kind::ground; }
  bool is_pin() const noexcept { return kind == net_kind::input_pin || kind == net_kind::output_pin; }
};

enum class mos_type
{
  pmos,
  nmos
};

char const* to_string( mos_type type );

struct device
{
  std::string name;
  mos_type type = mos_type::nmos;
  net_ref drain;
  net_ref gate;
  net_ref source;
  net_ref bulk;
  std::optional<int> width_nm;
  std::optional<int> length_nm;

  bool operator==( device const& ) const = default;

  bool touches_channel( std::string_view net ) const noexcept
  {
    return drain.name == net || source.name == net;
  }
};

struct cell_netlist
{
  std::string name;
  std::vector<net_ref> pins; ///< declaration order, rails included when declared
  std::vector<device> devices;

  bool operator==( cell_netlist const& ) const = default;

  /*! \brief Input pins in declaration order; pin i drives truth-table variable i. */
  std::vector<net_ref> input_pins() const;
  std::vector<net_ref> output_pins() const;
  /*! \brief The single output pin; throws if there is none. */
  net_ref const& output() const;

  /*! \brief Every distinct net of the cell, sorted by name. */
  std::vector<net_ref> nets() const;
  std::optional<net_ref> find_net( std::string_view name ) const;

  std::optional<net_ref> power() const;
  std::optional<net_ref> ground() const;

  std::size_t count( mos_type type ) const;
};

cell_netlist parse_spice( std::string_view text );
std::string serialize_spice( cell_netlist const& cell );

enum class violation_kind
{
  rail_gated_device,
  floating_net,
  unattached_output,
  device_count_mismatch,
  missing_output,
  multiple_outputs,
  multiple_rails
};

char const* to_string( violation_kind kind );

struct violation
{
  violation_kind kind;
  std::string subject;
};

struct validation_report
{
  std::vector<violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::size_t count( violation_kind kind ) const;
};

validation_report validate_cell( cell_netlist const& cell );

/*! \brief Reorients every device so that drain is the "up" terminal.

  A pull-up device is oriented along the rail-to-output paths of the PMOS
  channel graph (drain toward VDD); a pull-down device along the output-to-
  ground paths of the NMOS channel graph (drain toward the output).  Stage
  outputs are the output pins plus every net touched by channels of both
  types, so input inverters are handled like the main stage.  Devices that
  lie on no such path fall back to hop distance from the upper terminal.
  The result depends only on the undirected connectivity, hence the pass is
  idempotent and preserves the switch-level function.
*/
cell_netlist normalize_orientation( cell_netlist const& cell );

} // namespace topcell
