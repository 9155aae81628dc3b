#pragma once

#include <stdexcept>
#include <string>

namespace umss {

// Error raised by every module on contract violations (bad configs,
// malformed files, shape mismatches). CLI maps it to a nonzero exit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

} // namespace umss
