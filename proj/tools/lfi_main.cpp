#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lfi/bounds.hpp"
#include "lfi/errors.hpp"
#include "lfi/models.hpp"
#include "lfi/montecarlo.hpp"

namespace {

constexpr const char* kCsvHeader =
    "depth,value,lower,upper,gap,num_variables,num_factors,elapsed_ms,"
    "algorithm,approximate,monotonicity_ok";

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// The JSON output carries the same numeric precision as the CSV: numbers are
/// round-tripped through the %.12g rendering before being stored.
double json_double(double x) { return std::stod(fmt_double(x)); }

lfi::Value parse_value(const std::string& s) {
  if (s == "true") return lfi::Value::boolean(true);
  if (s == "false") return lfi::Value::boolean(false);
  if (!s.empty() &&
      (std::isdigit(static_cast<unsigned char>(s[0])) ||
       ((s[0] == '-' || s[0] == '+') && s.size() > 1))) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos == s.size()) return lfi::Value::integer(v);
    } catch (const std::exception&) {
    }
  }
  return lfi::Value::symbol(s);
}

/// "abc" -> {a, b, c}; "ab,ba" -> {ab, ba} for multi-character terminals.
std::vector<std::string> parse_pattern(const std::string& s) {
  std::vector<std::string> out;
  if (s.find(',') != std::string::npos) {
    std::stringstream ss(s);
    std::string token;
    while (std::getline(ss, token, ',')) {
      if (!token.empty()) out.push_back(token);
    }
  } else {
    for (const char c : s) out.emplace_back(1, c);
  }
  return out;
}

struct RunConfig {
  std::string model;
  std::string grammar_file;
  std::string algorithm = "ve";
  std::string format = "csv";
  std::string value = "true";
  std::string pattern;
  int depth = -1;
  int start = -1;
  int step = 1;
  int max = -1;
  int initial_state = 7;
  int hmm_observations = 10;
  std::uint64_t sanity_samples = 0;
  std::uint64_t seed = 1;
};

std::vector<int> build_schedule(const RunConfig& cfg) {
  const bool single = cfg.depth >= 0;
  const bool ranged = cfg.start >= 0 || cfg.max >= 0;
  if (single == ranged) {
    throw lfi::ModelError("pass either --depth or --start/--max, not both");
  }
  if (single) return {cfg.depth};
  if (cfg.start < 0 || cfg.max < 0) {
    throw lfi::ModelError("--start and --max must be given together");
  }
  if (cfg.step < 1) throw lfi::ModelError("--step must be at least 1");
  if (cfg.max < cfg.start) throw lfi::ModelError("--max must not be below --start");
  std::vector<int> schedule;
  for (int d = cfg.start; d <= cfg.max; d += cfg.step) schedule.push_back(d);
  return schedule;
}

lfi::ElementId build_model(lfi::ProgramRegistry& registry, const RunConfig& cfg) {
  if (cfg.model == "random-list") {
    return lfi::models::random_list_model(registry).contains_b;
  }
  if (cfg.model == "hmm") {
    lfi::models::HmmConfig hmm;
    hmm.initial_state = cfg.initial_state;
    hmm.observations.assign(static_cast<std::size_t>(cfg.hmm_observations), true);
    return lfi::models::infinite_hmm_model(registry, hmm).reach_top;
  }

  lfi::models::GnfGrammar grammar;
  std::string default_pattern;
  if (cfg.model == "pcfg-finite") {
    grammar = lfi::models::finite_example_grammar();
    default_pattern = "dd";
  } else if (cfg.model == "pcfg-infinite") {
    grammar = lfi::models::infinite_example_grammar();
    default_pattern = "ab";
  } else {
    if (cfg.grammar_file.empty()) {
      throw lfi::ModelError("--model custom requires --grammar-file");
    }
    std::ifstream in(cfg.grammar_file);
    if (!in) throw lfi::ModelError("cannot open grammar file: " + cfg.grammar_file);
    std::stringstream buffer;
    buffer << in.rdbuf();
    grammar = lfi::models::load_grammar_json(buffer.str());
    default_pattern = grammar.terminals.front();
  }
  lfi::models::PcfgOptions options;
  options.pattern = parse_pattern(cfg.pattern.empty() ? default_pattern : cfg.pattern);
  return lfi::models::pcfg_model(registry, grammar, options).found;
}

int run_command(const RunConfig& cfg) {
  const std::vector<int> schedule = build_schedule(cfg);
  const lfi::Value query_value = parse_value(cfg.value);

  lfi::ProgramRegistry registry;
  const lfi::ElementId query = build_model(registry, cfg);

  const char* log_env = std::getenv("LFI_LOG");
  const std::string log_level = log_env == nullptr ? "off" : log_env;

  lfi::AnytimeOptions options;
  options.algorithm = cfg.algorithm == "bp" ? lfi::Algorithm::Bp : lfi::Algorithm::Ve;
  if (log_level == "debug") {
    options.trace_sink = [](const std::string& line) { std::cerr << line << "\n"; };
  }

  const bool csv = cfg.format == "csv";
  if (csv) std::cout << kCsvHeader << "\n";
  nlohmann::json records = nlohmann::json::array();

  options.on_result = [&](const lfi::DepthResult& r) {
    const lfi::ValueInterval iv = r.bounds.for_value(query_value);
    const char* algorithm = lfi::algorithm_name(r.algorithm);
    if (csv) {
      std::cout << r.depth << "," << cfg.value << "," << fmt_double(iv.lower) << ","
                << fmt_double(iv.upper) << "," << fmt_double(r.gap) << "," << r.num_variables
                << "," << r.num_factors << "," << fmt_double(r.elapsed_ms) << "," << algorithm
                << "," << (r.approximate ? "true" : "false") << ","
                << (r.monotonicity_ok ? "true" : "false") << "\n";
    } else {
      nlohmann::json rec;
      rec["depth"] = r.depth;
      rec["value"] = cfg.value;
      rec["lower"] = json_double(iv.lower);
      rec["upper"] = json_double(iv.upper);
      rec["gap"] = json_double(r.gap);
      rec["num_variables"] = r.num_variables;
      rec["num_factors"] = r.num_factors;
      rec["elapsed_ms"] = json_double(r.elapsed_ms);
      rec["algorithm"] = algorithm;
      rec["approximate"] = r.approximate;
      rec["monotonicity_ok"] = r.monotonicity_ok;
      records.push_back(std::move(rec));
    }
    if (log_level == "info" || log_level == "debug") {
      std::cerr << "depth " << r.depth << ": [" << fmt_double(iv.lower) << ", "
                << fmt_double(iv.upper) << "] gap=" << fmt_double(r.gap)
                << " vars=" << r.num_variables << " factors=" << r.num_factors << " ("
                << fmt_double(r.elapsed_ms) << " ms)\n";
    }
  };

  const lfi::AnytimeOutcome outcome = lfi::anytime_run(registry, query, schedule, options);
  if (!csv) std::cout << records.dump(2) << "\n";

  if (cfg.sanity_samples > 0 && outcome.ok()) {
    try {
      const lfi::SampleEstimate mc =
          lfi::sample_estimate(registry, query, registry.evidence(), query_value,
                               schedule.back(), cfg.sanity_samples, cfg.seed);
      std::cerr << "sanity: estimate=" << fmt_double(mc.estimate) << " usable=" << mc.usable
                << " positives=" << mc.positives << " truncated=" << mc.truncated
                << " rejected=" << mc.rejected << " samples=" << mc.samples << "\n";
    } catch (const lfi::EstimateUnavailable& ex) {
      std::cerr << "sanity: " << ex.what() << "\n";
    }
  }

  if (outcome.failure) {
    std::cerr << "error: depth " << outcome.failure->depth << ": " << outcome.failure->message
              << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anytime probability bounds for lazily expanded probabilistic programs"};
  app.require_subcommand(1);

  RunConfig cfg;
  CLI::App* run = app.add_subcommand("run", "Run the iterative-deepening bounds pipeline");
  run->add_option("--model", cfg.model, "Model to run")
      ->required()
      ->check(CLI::IsMember({"random-list", "hmm", "pcfg-finite", "pcfg-infinite", "custom"}));
  run->add_option("--grammar-file", cfg.grammar_file,
                  "JSON grammar description (with --model custom)");
  run->add_option("--algorithm", cfg.algorithm, "Solver: ve (exact) or bp (message passing)")
      ->check(CLI::IsMember({"ve", "bp"}));
  run->add_option("--format", cfg.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--value", cfg.value, "Query value each record reports bounds for");
  run->add_option("--pattern", cfg.pattern,
                  "Pattern searched in the derived sequence (grammar models)");
  run->add_option("--depth", cfg.depth, "Single expansion depth");
  run->add_option("--start", cfg.start, "First depth of the schedule");
  run->add_option("--step", cfg.step, "Schedule stride");
  run->add_option("--max", cfg.max, "Last depth of the schedule");
  run->add_option("--initial-state", cfg.initial_state, "Walk start state (hmm)");
  run->add_option("--hmm-observations", cfg.hmm_observations,
                  "Number of all-true emission observations (hmm)");
  run->add_option("--sanity-samples", cfg.sanity_samples,
                  "Forward-sampling cross-check size, reported on stderr");
  run->add_option("--seed", cfg.seed, "Sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    return run_command(cfg);
  } catch (const lfi::InconsistentEvidence& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const lfi::Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
