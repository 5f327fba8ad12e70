#include "npeb/version.hpp"

namespace npeb {

const char* version() {
#ifdef NPEB_VERSION
  return NPEB_VERSION;
#else
  return "unknown";
#endif
}

}  // namespace npeb
