#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

namespace moodminer::pipeline {

// Flat `key = value` configuration with `#` comments.
struct Config {
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);

struct RunContext {
  std::string subcommand;
  std::string out_dir;
  std::uint64_t seed = 0;
  Config config;
  std::vector<std::string> inputs;  // paths hashed into the manifest
};

// Writes <out>/manifest.json before any primary output.
void write_manifest(const RunContext& ctx,
                    const std::vector<std::string>& output_names);

using Summary = nlohmann::ordered_json;

Summary run_simulate(const RunContext& ctx);
Summary run_ingest(const RunContext& ctx, const std::string& input,
                   const std::string& split_spec);
Summary run_fit_hmm(const RunContext& ctx, const std::string& students_path);
Summary run_select_k(const RunContext& ctx, const std::string& students_path);
Summary run_decode(const RunContext& ctx, const std::string& students_path,
                   const std::string& model_path);
Summary run_characterize(const RunContext& ctx, const std::string& decoded_path);
Summary run_mismatch(const RunContext& ctx, const std::string& decoded_path);
Summary run_train_dp(const RunContext& ctx, const std::string& decoded_path);
Summary run_ablate(const RunContext& ctx, const std::string& students_path);
Summary run_report(const RunContext& ctx, const std::string& run_dir);

std::string tool_version();

}  // namespace moodminer::pipeline
