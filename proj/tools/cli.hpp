#pragma once

#include <iosfwd>

namespace funnelkit::cli {

// Exit codes: 0 success or ship, 1 runtime error, 2 usage error,
// 3 funnel shortcut exit, 4 funnel inconclusive.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace funnelkit::cli
