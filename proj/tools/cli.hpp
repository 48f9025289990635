#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace topcell
{

/*! \brief Entry point of the `topcell` command; args exclude the program name.

  Returns 0 on success, 2 for usage or input errors, 3 for domain errors such
  as invalid pivots or failed checks, 4 for internal invariant violations.
*/
int run_cli( std::vector<std::string> const& args, std::ostream& out, std::ostream& err );

} // namespace topcell
