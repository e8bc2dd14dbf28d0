#pragma once

namespace lamelab {

inline const char* artifact_version() { return "0.1.0"; }

} // namespace lamelab
