#ifndef D2DCACHE_VERSION_HPP
#define D2DCACHE_VERSION_HPP

namespace d2dcache {

inline constexpr const char* kVersion = "0.1.0";

}

#endif
