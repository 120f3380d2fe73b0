#pragma once

#include <string>
#include <vector>

namespace coxmix::cli {

// Exit codes returned by run().
enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kDataError = 3,
    kModelError = 4,
    kTrainingError = 5,
    kMetricError = 6,
};

// Runs `coxmix <subcommand> ...`. args[0] is the program name.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace coxmix::cli
