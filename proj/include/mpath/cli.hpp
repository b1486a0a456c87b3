#pragma once

#include <string>
#include <vector>

namespace mpath::cli {

// Exit codes: 0 success, 1 usage error, 2 data error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without the program name

}  // namespace mpath::cli
