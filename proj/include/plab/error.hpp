#pragma once

#include <stdexcept>
#include <string>

namespace plab {

// All precondition and schema failures surface as this type; `where` names
// the module so the CLI can report context.
class Error : public std::runtime_error {
public:
    Error(std::string where, const std::string& what) : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

}  // namespace plab
