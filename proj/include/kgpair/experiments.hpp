#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kgpair/config.hpp"

namespace kgpair {

struct OutputFile {
  std::string name;
  std::string contents;
};

struct RunOutput {
  std::vector<OutputFile> files;
  std::vector<std::string> summary;  // short human-readable lines
};

struct RunOptions {
  int threads = 1;
};

std::string code_version();
std::uint64_t fnv1a(std::string_view data);

// Runs the experiment entirely in memory; nothing touches the disk until
// write_outputs, so a failed run leaves no partial results behind.
RunOutput run_experiment(const ExperimentConfig& cfg, std::string_view config_text,
                         const RunOptions& options);

void write_outputs(const RunOutput& out, const std::filesystem::path& dir);

}  // namespace kgpair
