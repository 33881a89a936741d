#ifndef PARTSDET_VERSION_HPP
#define PARTSDET_VERSION_HPP

namespace partsdet {
constexpr const char* kVersion = "0.1.0";
}

#endif
