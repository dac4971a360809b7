// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace mdd {

// Subcommand dispatcher behind the `mdd` binary. Exit codes: 0 success,
// 1 usage error, 2 data error, 3 numerical failure.
int cli_dispatch(const std::vector<std::string>& argv);
int cli_dispatch(int argc, char** argv);

}  // namespace mdd
