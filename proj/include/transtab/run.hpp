#ifndef TRANSTAB_RUN_HPP
#define TRANSTAB_RUN_HPP

#include <string>
#include <vector>

namespace transtab {

/// Executes one config-driven run (simulate / field / ridge / monitor /
/// equilibria). `overrides` are dotted key=value pairs applied onto the
/// config JSON. Returns the process exit status: 0 success (an unstable
/// verdict is a result, not an error), 1 config error, 2 numerical failure.
int run_config(const std::string& config_path,
               const std::vector<std::string>& overrides, int jobs);

}  // namespace transtab

#endif
