#pragma once

#include <string>

namespace rgdno {

// Data exports for a persisted solve trace:
//   path.svg      top-down root path with obstacle outlines
//   features.csv  per-frame feature table
//   footspeed.csv foot-speed curves with detected step markers
void plot_trace(const std::string& trace_dir, const std::string& out_dir);

}  // namespace rgdno
