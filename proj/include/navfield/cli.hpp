#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace navfield {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitNegative = 1, kExitInput = 2, kExitIo = 3 };

/// Entry point of the `navfield` tool. argv[0] is the program name.
/// Subcommands: validate, simulate, field, critical, transform, rerun.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a file's bytes. Throws IoError.
std::string sha256_file(const std::filesystem::path& path);

const char* tool_version();

}  // namespace navfield
