#pragma once

#include <string>
#include <vector>

namespace gddsg::cli {

/// Entry point of the `gddsg` tool. Returns the process exit code:
/// 0 on success, 2 on invalid input or any library error.
int run(int argc, char** argv);

/// Same, with arguments given without the program name.
int run(const std::vector<std::string>& args);

}  // namespace gddsg::cli
