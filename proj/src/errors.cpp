#include "hfvol/errors.hpp"

namespace hfvol {

void throw_config(const std::string& what) { throw ConfigError(what); }

}  // namespace hfvol
