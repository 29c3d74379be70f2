#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ldnhim/sections.hpp"

namespace ldnhim::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kVerifyFailed = 1;
inline constexpr int kUsage = 2;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "all", "<model>/*" or a section name; throws UnknownSectionError.
std::vector<SectionSpec> resolve_targets(const std::vector<std::string>& targets);

}  // namespace ldnhim::cli
