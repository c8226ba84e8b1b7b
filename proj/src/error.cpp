#include "mrieval/error.hpp"

namespace mrieval {

NiftiError::NiftiError(const std::string& what, std::size_t offset)
    : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

}  // namespace mrieval
