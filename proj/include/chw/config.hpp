#pragma once

// Run configuration, JSON builders for the library types and the CSV/manifest
// plumbing shared by the command-line front end.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "chw/poisson_solver.hpp"
#include "chw/skew_products.hpp"
#include "chw/stopping_lab.hpp"
#include "chw/symbolic_dynamics.hpp"

namespace chw {

inline constexpr const char* kVersion = "0.1.0";

enum class ArithmeticMode { Float, Rational };

ArithmeticMode parse_mode(const std::string& text);
const char* mode_name(ArithmeticMode mode);

struct RunConfig {
  std::string command;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 1;
  ArithmeticMode mode = ArithmeticMode::Float;
  unsigned threads = 0;
  std::filesystem::path out = "out";

  // Everything that determines the outputs (threads deliberately excluded).
  nlohmann::json effective() const;
  std::uint64_t hash() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<ArithmeticMode> mode;
  std::optional<unsigned> threads;
  std::optional<std::filesystem::path> out;
};

// Reads a config file or a manifest written by a previous run.
RunConfig load_run_config(const std::string& command, const std::filesystem::path& path,
                          const Overrides& overrides);
RunConfig make_run_config(const std::string& command, nlohmann::json document,
                          const Overrides& overrides);

std::uint64_t fnv1a64(std::string_view bytes);

// Shortest round-trip decimal for doubles; "inf", "-inf", "nan" otherwise.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  template <class... Fields>
  void row(const Fields&... fields) {
    std::vector<std::string> cells{cell(fields)...};
    write(cells);
  }
  void write(const std::vector<std::string>& cells);

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return format_double(v); }
  template <class I, class = std::enable_if_t<std::is_integral_v<I>>>
  static std::string cell(I v) { return std::to_string(v); }
  static std::string cell(const Rational& q) { return q.get_str(); }

  std::ofstream stream_;
  std::size_t columns_;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// Builders. Missing keys raise UsageError.
SubshiftPtr chain_from_json(const nlohmann::json& j);

struct DisplacementSource {
  SubshiftPtr chain;
  std::vector<double> values;
  std::optional<std::vector<Rational>> exact;
  std::optional<DisplacementSpec> spec;
};

// Keys: chain (subshift JSON) or m/N, and one of xi (displacement spec,
// discretized on the canonical chain), xi_vector (explicit values) or
// preset ("srw").
DisplacementSource displacement_from_json(const nlohmann::json& j);

// Canonical chains use the block-sum solver unless solver = "general".
PoissonData poisson_from_json(const nlohmann::json& j, ArithmeticMode mode);

// Walk keys: the displacement keys above plus increments ("zeta" | "xi"),
// alpha, x0, previous; or kind = "chaotic" with a system.
WalkSpec walk_from_json(const nlohmann::json& j, ArithmeticMode mode);

std::vector<double> doubles_from_json(const nlohmann::json& j);
std::vector<std::uint64_t> counts_from_json(const nlohmann::json& j);

}  // namespace chw
