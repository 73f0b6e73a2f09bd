#ifndef RDBOUNDS_CLI_HPP
#define RDBOUNDS_CLI_HPP

#include <iosfwd>

namespace rdb {

/// Command-line front end. Verbs: solve, bounds, sample, verify, sweep,
/// report. Returns 0 on success, 1 on computation error, 2 on usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

} // namespace rdb

#endif
