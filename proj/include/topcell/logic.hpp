/*!
  \file logic.hpp
  \brief Boolean functions, two-level minimization, factoring, static CMOS
         synthesis and switch-level equivalence checking
*/

#pragma once

#include "topcell/netlist.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace topcell
{

/*! \brief Truth table over 1 to 6 inputs.

  Bit i holds the output for input assignment i, input 0 being the least
  significant position of the assignment.
*/
class truth_table
{
public:
  static constexpr unsigned max_inputs = 6;

  truth_table( unsigned n_inputs, std::uint64_t bits );

  /*! \brief Parses `<n_inputs>:<hex>`, e.g. `3:E8` for majority. */
  static truth_table parse( std::string_view text );

  unsigned n_inputs() const noexcept { return n_inputs_; }
  std::uint64_t bits() const noexcept { return bits_; }
  std::uint64_t num_assignments() const noexcept { return std::uint64_t{ 1 } << n_inputs_; }
  bool operator()( std::uint64_t assignment ) const noexcept { return ( bits_ >> assignment ) & 1u; }

  bool is_trivial() const noexcept { return bits_ == 0 || bits_ == full_mask(); }
  truth_table operator~() const { return truth_table( n_inputs_, ~bits_ & full_mask() ); }

  std::string to_string() const;

  bool operator==( truth_table const& ) const = default;

private:
  std::uint64_t full_mask() const noexcept
  {
    return n_inputs_ == 6 ? ~std::uint64_t{ 0 } : ( ( std::uint64_t{ 1 } << ( 1u << n_inputs_ ) ) - 1 );
  }

  unsigned n_inputs_;
  std::uint64_t bits_;
};

/*! \brief Boolean expression in negation-normal form. */
struct bool_expr
{
  enum class node
  {
    literal,
    conjunction,
    disjunction,
    constant
  };

  node type = node::constant;
  unsigned var = 0;     ///< literal only
  bool negated = false; ///< literal only
  bool value = false;   ///< constant only
  std::vector<bool_expr> children;

  static bool_expr literal( unsigned var, bool negated = false );
  static bool_expr constant( bool value );
  /*! \brief Flattened And; a single operand is returned as is. */
  static bool_expr conj( std::vector<bool_expr> operands );
  /*! \brief Flattened Or; a single operand is returned as is. */
  static bool_expr disj( std::vector<bool_expr> operands );

  bool evaluate( std::uint64_t assignment ) const;
  std::size_t literal_count() const;
  /*! \brief One past the largest variable index used. */
  unsigned support_bound() const;
  bool has_constant() const;
  truth_table to_table( unsigned n_inputs ) const;

  /*! \brief Infix text with `&`, `|`, `!`; variables named a, b, ... unless names are given. */
  std::string to_string( std::vector<std::string> const& names = {} ) const;

  bool operator==( bool_expr const& ) const = default;
};

struct implicant
{
  std::uint32_t mask = 0;  ///< fixed variables
  std::uint32_t value = 0; ///< their values; zero outside mask

  bool covers( std::uint64_t minterm ) const noexcept { return ( minterm & mask ) == value; }
  unsigned literal_count() const noexcept;
  bool operator==( implicant const& ) const = default;
};

/*! \brief Minterm expansion, one product per 1-minterm in ascending order. */
bool_expr table_to_sop( truth_table const& tt );

/*! \brief Prime implicants of the on-set (Quine-McCluskey). */
std::vector<implicant> prime_implicants( truth_table const& tt );

/*! \brief Two-level minimization: QM primes, essential primes, greedy cover. */
bool_expr minimize_sop( bool_expr const& sop, unsigned n_inputs );
bool_expr minimize_sop( bool_expr const& sop );

/*! \brief Algebraic factoring by repeated division with the most frequent literal. */
bool_expr factor_expr( bool_expr const& sop );

/*! \brief Factored pull-down function g of a cell computing `tt` (g = !tt). */
bool_expr pull_down_function( truth_table const& tt );

/*! \brief Static CMOS single stage computing `tt` at pin Y.

  `expr` must be equivalent to `tt`.  The pull-down network is the
  series-parallel realization of g = factor(minimize(sop(!tt))) between Y
  and GND, the pull-up network its dual between VDD and Y.  Inverted
  literals use shared input inverters.  Inputs are named A, B, C, ... unless
  `input_names` is given; internal nets are N1, N2, ... in construction
  order (inverters first, then pull-up, then pull-down).
*/
cell_netlist synth_cell( std::string const& name, bool_expr const& expr, truth_table const& tt,
                         std::vector<std::string> const& input_names = {} );

/*! \brief Same construction from an explicit pull-down function. */
cell_netlist synth_from_pull_down( std::string const& name, bool_expr const& g, unsigned n_inputs,
                                   std::vector<std::string> const& input_names = {} );

std::vector<std::string> default_input_names( unsigned n_inputs );

enum class logic_value
{
  zero,
  one,
  x
};

char to_char( logic_value v );

/*! \brief Switch-level evaluator for static CMOS cells.

  Stage outputs (output pins and nets shared by PMOS and NMOS channels) are
  evaluated in dependency order; a stage output is 1 when a conducting path
  reaches it from VDD and none from GND, 0 for the converse, X otherwise.
*/
class switch_simulator
{
public:
  explicit switch_simulator( cell_netlist const& cell );

  std::size_t num_inputs() const noexcept { return inputs_.size(); }
  logic_value evaluate( std::uint64_t assignment ) const;

private:
  struct channel
  {
    std::size_t drain, source, gate;
    bool pmos;
  };

  std::size_t power_ = 0, ground_ = 0, output_ = 0, num_nets_ = 0;
  std::vector<std::size_t> inputs_;
  std::vector<std::size_t> stage_order_;
  std::vector<channel> channels_;
  std::vector<std::vector<std::size_t>> incident_;
};

logic_value switch_sim( cell_netlist const& cell, std::uint64_t assignment );

struct equiv_report
{
  bool pass = true;
  std::vector<std::uint64_t> failing; ///< assignments whose output differs or is X
};

equiv_report equiv_check( cell_netlist const& cell, truth_table const& tt );

} // namespace topcell
