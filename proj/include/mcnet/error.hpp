#pragma once

#include <stdexcept>
#include <string>

namespace mcnet {

// Every recoverable failure in the library surfaces as this exception type.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace mcnet
