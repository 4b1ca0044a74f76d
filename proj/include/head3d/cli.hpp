#pragma once

#include <iostream>

namespace head3d {

/// Command-line entry point: render-synthetic, estimate-canonical, transfer,
/// novel-view, metrics, ablation, serve. Returns 0 on success, 1 on usage
/// errors and 2 on runtime failures.
int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace head3d
