#pragma once

namespace ventrl::cli {

/// Entry point shared by the ventrl binary and in-process callers; returns
/// the process exit status.
int run(int argc, const char* const* argv);

}  // namespace ventrl::cli
