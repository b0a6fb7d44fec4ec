#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ckagg/executor.hpp"

namespace ckagg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitUsage = 2;

struct Hooks {
  // Called between the flush phase and verification of every execute run.
  std::function<void(const exec::RunDirectory&)> after_flush;
};

/// Entry point shared by the ckagg tool and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Hooks& hooks = {});

}  // namespace ckagg::cli
