#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace extmil::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name). Never throws.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

/// Flat key=value run manifest, one entry per line.
using Manifest = std::map<std::string, std::string>;

Manifest read_manifest(const std::string& path);
std::string render_manifest(const Manifest& manifest);
/// Command line that reproduces the manifest's run.
std::vector<std::string> manifest_to_args(const Manifest& manifest);

}  // namespace extmil::cli
