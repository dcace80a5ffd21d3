#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hscr {

// Domain-error check for public preconditions.
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Runtime-failure check (I/O, divergence, broken files).
inline void ensure(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

}  // namespace hscr
