#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "ccassg/pipeline.hpp"

namespace ccassg {

/// Everything a train/eval run needs besides command-line overrides.
///
///     dataset = "data/cora"      # relative paths resolve against the file
///     seeds = 20
///     [train]
///     steps = 50
///     hidden = [512, 512]
///     lambda = 2e-3
///     ...
///     [probe]
///     lr = 1e-2
///
/// Unknown sections or keys are rejected with a ConfigError naming them.
struct RunConfig {
  std::filesystem::path dataset;
  std::size_t seeds = 1;
  TrainConfig train;
  ProbeConfig probe;
};

/// Parses the TOML subset above: `[section]` headers, `key = value` lines,
/// `#` comments, double-quoted strings, booleans, numbers and flat arrays of
/// numbers. `source` only decorates error messages.
RunConfig parse_run_config(std::string_view text, const std::string& source = "<config>");

/// Reads and parses a file; a relative `dataset` becomes relative to the
/// file's directory. Missing file -> IoError.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ccassg
