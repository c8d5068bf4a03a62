#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "bimatch/error.hpp"
#include "manifest.hpp"

namespace bimatch::cli {

inline constexpr std::uint64_t kDefaultSeed = 20240601;

enum class Format { kText, kJson };

Format parse_format(const std::string& name);

struct OutputOptions {
  Format format = Format::kText;
  /// Output file; stdout when empty. A manifest is written next to it.
  std::string out;
};

struct DiagnoseOptions {
  std::string edges;
  bool largest_component = false;
  OutputOptions output;
};

struct EstimateOptions {
  std::string edges;
  std::string worker_instruments;
  std::string firm_instruments;
  /// `id,side,value` file with true productivities, for oracle labeling.
  std::string truth;
  std::string labeling = "rank";
  double gamma = 0.10;
  std::uint64_t seed = kDefaultSeed;
  bool largest_component = false;
  bool include_cycles = false;
  OutputOptions output;
};

struct SimulateOptions {
  std::string grid;  // default grid when empty
  std::size_t reps = 10000;
  std::uint64_t seed = kDefaultSeed;
  std::size_t threads = 1;
  OutputOptions output;
};

struct ProductivityOptions {
  std::string edges;
  std::string mode = "twfe";
  std::optional<double> beta;
  std::string reference_worker;
  bool largest_component = false;
  double tol = 1e-10;
  std::size_t max_iter = 500;
  OutputOptions output;
};

/// What a command produced: the document for stdout (empty when written to
/// --out) and its manifest.
struct CommandResult {
  std::string stdout_text;
  RunManifest manifest;
};

CommandResult cmd_diagnose(const DiagnoseOptions& opt);
CommandResult cmd_estimate(const EstimateOptions& opt);
CommandResult cmd_simulate(const SimulateOptions& opt);
CommandResult cmd_productivity(const ProductivityOptions& opt);

/// Re-executes the command recorded in a manifest file (or in a JSON output
/// that embeds one) after checking the input digests.
CommandResult cmd_rerun(const std::string& manifest_path, const std::string& out_override);

/// Stable process exit code for each error category.
int exit_code(ErrorCode code) noexcept;
/// Short advice printed after an error message.
const char* remediation(ErrorCode code) noexcept;

}  // namespace bimatch::cli
