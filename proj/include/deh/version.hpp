#pragma once

#include <string>

namespace deh {

// `git describe --always --dirty` at configure time, or "unknown".
std::string git_describe();

}  // namespace deh
