#pragma once

#include <cstdio>
#include <string>

namespace genemut {

// Shortest round-trippable decimal form; all text output goes through this so
// identical runs emit identical bytes.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace genemut
