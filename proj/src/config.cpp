#include "chw/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "chw/errors.hpp"
#include "chw/json_util.hpp"

namespace chw {

ArithmeticMode parse_mode(const std::string& text) {
  if (text == "float") return ArithmeticMode::Float;
  if (text == "rational") return ArithmeticMode::Rational;
  throw UsageError("mode must be \"rational\" or \"float\", got \"" + text + "\"");
}

const char* mode_name(ArithmeticMode mode) {
  return mode == ArithmeticMode::Rational ? "rational" : "float";
}

nlohmann::json RunConfig::effective() const {
  return {{"command", command}, {"seed", seed}, {"mode", mode_name(mode)}, {"params", params}};
}

std::uint64_t RunConfig::hash() const { return fnv1a64(effective().dump()); }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunConfig make_run_config(const std::string& command, nlohmann::json document,
                          const Overrides& overrides) {
  if (!document.is_object()) throw UsageError("config must be a JSON object");
  RunConfig cfg;
  cfg.command = command;
  if (document.contains("config") && document.contains("config_hash")) {
    // a manifest from an earlier run
    const nlohmann::json eff = document["config"];
    if (eff.value("command", command) != command)
      throw UsageError("manifest was written by command '" + eff.value("command", std::string()) + "'");
    cfg.params = require_key(eff, "params", "manifest.config");
    cfg.seed = eff.value("seed", std::uint64_t{1});
    cfg.mode = parse_mode(eff.value("mode", std::string("float")));
  } else {
    if (document.contains("command") && document["command"].get<std::string>() != command)
      throw UsageError("config is for command '" + document["command"].get<std::string>() + "'");
    if (document.contains("seed")) cfg.seed = document["seed"].get<std::uint64_t>();
    if (document.contains("mode")) cfg.mode = parse_mode(document["mode"].get<std::string>());
    document.erase("seed");
    document.erase("mode");
    document.erase("command");
    cfg.params = std::move(document);
  }
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.mode) cfg.mode = *overrides.mode;
  if (overrides.threads) cfg.threads = *overrides.threads;
  if (overrides.out) cfg.out = *overrides.out;
  return cfg;
}

RunConfig load_run_config(const std::string& command, const std::filesystem::path& path,
                          const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return make_run_config(command, std::move(doc), overrides);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : stream_(path, std::ios::binary), columns_(header.size()) {
  if (!stream_) throw Error("cannot write " + path.string());
  write(header);
}

void CsvWriter::write(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw Error("CSV row width does not match the header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) stream_ << ',';
    const std::string& c = cells[i];
    if (c.find_first_of(",\"\r\n") == std::string::npos) {
      stream_ << c;
    } else {
      stream_ << '"';
      for (const char ch : c) stream_ << (ch == '"' ? "\"\"" : std::string(1, ch));
      stream_ << '"';
    }
  }
  stream_ << "\r\n";
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

SubshiftPtr chain_from_json(const nlohmann::json& j) { return subshift_from_json(j); }

namespace {

SubshiftPtr chain_of(const nlohmann::json& j) {
  if (j.contains("chain")) return chain_from_json(j["chain"]);
  if (j.contains("m")) return build_subshift(j["m"].get<int>(), j.value("N", 1));
  throw UsageError("missing required key 'chain' (or m and N)");
}

}  // namespace

DisplacementSource displacement_from_json(const nlohmann::json& j) {
  DisplacementSource src;
  src.chain = chain_of(j);
  const SubshiftSpec& chain = *src.chain;
  if (j.contains("xi")) {
    if (!chain.is_canonical()) throw ValidationError("xi specs discretize only on canonical chains");
    src.spec = DisplacementSpec::from_json(j["xi"]);
    DiscreteDisplacement d = discretize_displacement(*src.spec, chain.m(), chain.N());
    src.values = std::move(d.values);
    src.exact = std::move(d.exact);
  } else if (j.contains("xi_vector")) {
    std::vector<Rational> exact;
    for (const auto& v : j["xi_vector"]) exact.push_back(rational_from_json(v));
    if (exact.size() != chain.K())
      throw ValidationError("xi_vector has " + std::to_string(exact.size()) + " entries, chain has " +
                            std::to_string(chain.K()) + " symbols");
    for (const auto& q : exact) src.values.push_back(q.get_d());
    src.exact = std::move(exact);
  } else if (j.contains("preset")) {
    const std::string preset = j["preset"].get<std::string>();
    if (preset != "srw") throw UsageError("unknown displacement preset '" + preset + "'");
    if (!chain.is_canonical() || chain.m() != 2)
      throw ValidationError("the srw preset needs the canonical chain with m = 2");
    std::vector<Rational> exact;
    for (const long v : srw_displacement(chain.N())) {
      exact.emplace_back(v);
      src.values.push_back(static_cast<double>(v));
    }
    src.exact = std::move(exact);
  } else {
    throw UsageError("one of 'xi', 'xi_vector' or 'preset' is required");
  }
  return src;
}

PoissonData poisson_from_json(const nlohmann::json& j, ArithmeticMode mode) {
  const DisplacementSource src = displacement_from_json(j);
  const SubshiftSpec& chain = *src.chain;
  const std::string solver =
      j.value("solver", std::string(chain.is_canonical() ? "canonical" : "general"));
  if (solver != "canonical" && solver != "general")
    throw UsageError("solver must be \"canonical\" or \"general\"");
  if (solver == "canonical" && !chain.is_canonical())
    throw ValidationError("the canonical solver needs a canonical chain");
  if (mode == ArithmeticMode::Rational) {
    if (!src.exact) throw ValidationError("rational mode needs exactly representable displacement values");
    return solver == "canonical" ? solve_poisson_canonical_exact(*src.exact, chain.m(), chain.N())
                                 : solve_poisson_general_exact(src.chain, *src.exact);
  }
  return solver == "canonical" ? solve_poisson_canonical(src.values, chain.m(), chain.N())
                               : solve_poisson_general(src.chain, src.values);
}

WalkSpec walk_from_json(const nlohmann::json& j, ArithmeticMode mode) {
  if (!j.is_object()) throw UsageError("walk must be a JSON object");
  const std::string kind = j.value("kind", std::string("markov"));
  if (kind == "chaotic") {
    const SkewSystem sys = SkewSystem::from_json(require_key(j, "system", "walk"));
    double x0 = 0.0;
    if (j.contains("x0_interval"))
      x0 = conjugate_to_line(double_from_json(j["x0_interval"])).value;
    else
      x0 = double_from_json(require_key(j, "x0", "walk"));
    return WalkSpec::chaotic(sys, x0);
  }
  if (kind != "markov") throw UsageError("walk kind must be \"markov\" or \"chaotic\"");
  const double alpha = j.contains("alpha") ? double_from_json(j["alpha"]) : 0.0;
  const double x0 = j.contains("x0") ? double_from_json(j["x0"]) : 0.0;
  const std::string increments = j.value("increments", std::string("zeta"));
  WalkSpec walk;
  if (increments == "zeta") {
    walk = WalkSpec::zeta_walk(poisson_from_json(j, mode), alpha, x0);
  } else if (increments == "xi") {
    const DisplacementSource src = displacement_from_json(j);
    walk = WalkSpec::xi_walk(src.chain, src.values, alpha, x0);
    if (src.exact) {
      std::vector<Rational> exact(walk.increments.size());
      for (std::size_t i = 0; i < src.chain->K(); ++i) {
        const auto s = static_cast<Symbol>(i + 1);
        const auto row = src.chain->row(s);
        for (std::size_t e = 0; e < row.size(); ++e)
          exact[src.chain->matrix().row_offset(s) + e] = (*src.exact)[static_cast<std::size_t>(row[e].to - 1)];
      }
      walk.increments_exact = std::move(exact);
    }
  } else {
    throw UsageError("increments must be \"zeta\" or \"xi\"");
  }
  if (j.contains("previous")) {
    const auto prev = j["previous"].get<Symbol>();
    if (prev < 1 || static_cast<std::size_t>(prev) > walk.chain->K())
      throw ValidationError("walk.previous outside 1..K");
    walk.previous = prev;
  }
  return walk;
}

std::vector<double> doubles_from_json(const nlohmann::json& j) {
  std::vector<double> out;
  if (j.is_array())
    for (const auto& v : j) out.push_back(double_from_json(v));
  else
    out.push_back(double_from_json(j));
  return out;
}

std::vector<std::uint64_t> counts_from_json(const nlohmann::json& j) {
  std::vector<std::uint64_t> out;
  auto one = [](const nlohmann::json& v) {
    const double d = v.get<double>();
    if (!(d >= 1.0) || d != std::floor(d) || d > 1e15) throw UsageError("expected a positive integer, got " + v.dump());
    return static_cast<std::uint64_t>(d);
  };
  if (j.is_array())
    for (const auto& v : j) out.push_back(one(v));
  else
    out.push_back(one(j));
  return out;
}

}  // namespace chw
