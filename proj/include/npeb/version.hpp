#pragma once

namespace npeb {

// Git-describable version string baked in at configure time.
const char* version();

}  // namespace npeb
