#pragma once

#include <string>
#include <vector>

namespace moodminer::cli {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
int cli_dispatch(int argc, const char* const* argv);
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace moodminer::cli
