#include "deh/version.hpp"

namespace deh {

std::string git_describe() { return DEH_GIT_DESCRIBE; }

}  // namespace deh
