#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace ode::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;    // validation, parse, missing input, io
inline constexpr int kExitTransport = 2;  // service unreachable or misbehaving
inline constexpr int kExitUsage = 64;

using Getenv = std::function<const char*(const char*)>;

/// Runs one command line (without the program name). Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const Getenv& getenv_fn = {});

}  // namespace ode::cli
