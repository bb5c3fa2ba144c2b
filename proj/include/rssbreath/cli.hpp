#pragma once

// Command-line front end. Kept in the library so tests can drive subcommands
// in-process; the installed binary is a two-line main() around run().
//
// Exit codes: 0 success, 2 usage or configuration error, 3 data error while
// reading or writing files.

namespace rssbreath::cli {

inline constexpr const char* kVersion = "1.0.0";

int run(int argc, const char* const* argv);

}  // namespace rssbreath::cli
