#ifndef LMVR_CLI_HPP
#define LMVR_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace lmvr::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kTargetMissed = 3,
};

/// Runs one subcommand. `args` excludes the program name. A path of "-"
/// (the default for --input/--output) selects `in` / `out`.
int run(const std::vector<std::string>& args, std::istream& in,
        std::ostream& out, std::ostream& err);

}  // namespace lmvr::cli

#endif  // LMVR_CLI_HPP
