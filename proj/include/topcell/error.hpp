#pragma once

#include <stdexcept>
#include <string>

namespace topcell
{

/*! \brief Classifies errors for callers that map them to exit codes. */
enum class error_category
{
  input,    ///< malformed input or invalid request
  domain,   ///< well-formed request that the algorithm rejects
  internal  ///< broken invariant
};

class error : public std::runtime_error
{
public:
  error( error_category category, std::string const& what )
      : std::runtime_error( what ), category_( category )
  {
  }

  error_category category() const noexcept { return category_; }

private:
  error_category category_;
};

/* netlist */

class syntax_error : public error
{
public:
  syntax_error( std::size_t line, std::string const& msg );
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class duplicate_device : public error
{
public:
  explicit duplicate_device( std::string const& name )
      : error( error_category::input, "duplicate device '" + name + "'" ) {}
};

class missing_rail : public error
{
public:
  explicit missing_rail( std::string const& which )
      : error( error_category::input, "missing " + which + " rail" ) {}
};

class disconnected_network : public error
{
public:
  explicit disconnected_network( std::string const& device )
      : error( error_category::domain, "device '" + device + "' is disconnected from its rail and the output" ) {}
};

/* logic */

class trivial_function : public error
{
public:
  trivial_function() : error( error_category::input, "trivial function (constant 0 or 1)" ) {}
};

class unsupported_expr : public error
{
public:
  explicit unsupported_expr( std::string const& msg ) : error( error_category::input, msg ) {}
};

class unresolved_gate : public error
{
public:
  explicit unresolved_gate( std::string const& net )
      : error( error_category::domain, "gate net '" + net + "' cannot be resolved" ) {}
};

/* permute */

class cyclic_network : public error
{
public:
  cyclic_network() : error( error_category::domain, "pull network contains a directed cycle" ) {}
};

enum class invalid_pivot_reason
{
  not_found,
  gate_only,
  mixed_networks,
  rail_or_pin
};

char const* to_string( invalid_pivot_reason reason );

/*! \brief The message a policy receives when its pivot is rejected. */
inline constexpr char const* invalid_pivot_prompt = "Invalid pivot! Please select a new valid net.";

class invalid_pivot : public error
{
public:
  invalid_pivot( std::string const& net, invalid_pivot_reason reason );
  invalid_pivot_reason reason() const noexcept { return reason_; }
  std::string const& net() const noexcept { return net_; }

private:
  std::string net_;
  invalid_pivot_reason reason_;
};

class degenerate_region : public error
{
public:
  explicit degenerate_region( std::string const& pivot )
      : error( error_category::domain, "swap region around '" + pivot + "' is degenerate" ) {}
};

/* reward */

class too_large : public error
{
public:
  explicit too_large( std::string const& msg ) : error( error_category::domain, msg ) {}
};

class shape_mismatch : public error
{
public:
  explicit shape_mismatch( std::string const& msg ) : error( error_category::input, "shape mismatch: " + msg ) {}
};

class degenerate_data : public error
{
public:
  degenerate_data() : error( error_category::domain, "training data contains a single class" ) {}
};

class missing_table_entry : public error
{
public:
  explicit missing_table_entry( std::string const& digest )
      : error( error_category::domain, "no reward table entry for digest " + digest ) {}
};

class format_error : public error
{
public:
  explicit format_error( std::string const& msg ) : error( error_category::input, msg ) {}
};

/* grpo */

class zero_old_prob : public error
{
public:
  explicit zero_old_prob( std::string const& token )
      : error( error_category::domain, "token '" + token + "' has zero probability under the old policy" ) {}
};

class support_mismatch : public error
{
public:
  support_mismatch() : error( error_category::domain, "policy has mass outside the reference support" ) {}
};

class no_valid_pivots : public error
{
public:
  explicit no_valid_pivots( std::string const& cell )
      : error( error_category::domain, "cell '" + cell + "' has no valid pivot" ) {}
};

class empty_dataset : public error
{
public:
  empty_dataset() : error( error_category::input, "dataset is empty" ) {}
};

/* dataset */

class too_few_functions : public error
{
public:
  too_few_functions() : error( error_category::domain, "split needs at least two functions" ) {}
};

} // namespace topcell
