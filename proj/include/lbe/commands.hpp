#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lbe/config.hpp"

namespace lbe {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

int cmd_train(const std::string& config_path, std::ostream& out);

struct EvalOptions {
  std::string mode = "soft";  // soft | topk
  int k = 16;
  bool exclude_self = false;
  std::string out_path = "eval_metrics.csv";
};
int cmd_eval(const std::string& state_path, const std::string& data_path,
             const EvalOptions& opts, std::ostream& out);

int cmd_retrieve(const std::string& state_path, const std::string& data_path,
                 std::size_t query_id, std::size_t k, std::ostream& out);

int cmd_grad_check(std::ostream& out);
int cmd_oracle_check(const std::string& csv_path, std::ostream& out);

struct BenchResult {
  double hamming_ns = 0.0, dense_ns = 0.0;
  double speedup = 0.0;
  double top1_agreement = 0.0;  // deterministic in the seed; timings are not
};
BenchResult bench_hash(std::size_t n_codes, std::size_t code_bits, std::size_t embed_dim,
                       std::size_t trials, std::uint64_t seed);
int cmd_bench_hash(std::size_t n_codes, std::size_t code_bits, std::size_t embed_dim,
                   std::size_t trials, std::uint64_t seed, std::ostream& out);

struct EpisodeSuiteResult {
  std::vector<double> per_seed_mean;
  std::vector<double> all_accuracies;
  double mean = 0.0;
  double stddev = 0.0;  // across seed means
};
EpisodeSuiteResult run_episode_suite(const RunConfig& cfg, int seed_lo, int seed_hi);
int cmd_episode(const std::string& config_path, std::ostream& out);

}  // namespace lbe
