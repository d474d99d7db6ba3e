#include <iostream>

#include <CLI11.hpp>

#include "lbe/commands.hpp"
#include "lbe/common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"trilevel example-retrieval trainer"};
  app.require_subcommand(1);

  std::string config_path, state_path, data_path, csv_path;
  std::size_t query_id = 0, k = 10;
  lbe::EvalOptions eval_opts;
  std::size_t bench_n = 100000, bench_bits = 64, bench_dim = 64, bench_trials = 50;
  std::uint64_t bench_seed = 1;

  auto* train = app.add_subcommand("train", "train from a config file");
  train->add_option("config", config_path, "config file")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a saved state on a CSV dataset");
  eval->add_option("state", state_path, "state JSON")->required();
  eval->add_option("data", data_path, "dataset CSV")->required();
  eval->add_option("--mode", eval_opts.mode, "soft|topk");
  eval->add_option("-k,--k", eval_opts.k, "candidates kept in topk mode");
  eval->add_flag("--exclude-self", eval_opts.exclude_self,
                 "drop pool rows whose id matches the query row id");
  eval->add_option("--out", eval_opts.out_path, "metrics CSV path");

  auto* retrieve = app.add_subcommand("retrieve", "top-k similar rows for one query");
  retrieve->add_option("state", state_path, "state JSON")->required();
  retrieve->add_option("data", data_path, "dataset CSV")->required();
  retrieve->add_option("--query", query_id, "query row index")->required();
  retrieve->add_option("-k,--k", k, "rows to return");

  app.add_subcommand("grad-check", "finite-difference checks of all analytic gradients");

  auto* oracle = app.add_subcommand("oracle-check", "hypergradient pipeline vs oracles");
  oracle->add_option("--csv", csv_path, "also write results as CSV");

  auto* bench = app.add_subcommand("bench-hash", "Hamming scan vs dense cosine scan");
  bench->add_option("--n", bench_n, "number of codes (>= 1000)");
  bench->add_option("--bits", bench_bits, "code bits");
  bench->add_option("--dim", bench_dim, "embedding dim for the dense path");
  bench->add_option("--trials", bench_trials, "queries to time");
  bench->add_option("--seed", bench_seed, "data seed");

  auto* episode = app.add_subcommand("episode", "few-shot episode suite, seeds 1-10");
  episode->add_option("config", config_path, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : lbe::kExitUsage;
  }

  try {
    if (app.got_subcommand("train")) return lbe::cmd_train(config_path, std::cout);
    if (app.got_subcommand("eval"))
      return lbe::cmd_eval(state_path, data_path, eval_opts, std::cout);
    if (app.got_subcommand("retrieve"))
      return lbe::cmd_retrieve(state_path, data_path, query_id, k, std::cout);
    if (app.got_subcommand("grad-check")) return lbe::cmd_grad_check(std::cout);
    if (app.got_subcommand("oracle-check")) return lbe::cmd_oracle_check(csv_path, std::cout);
    if (app.got_subcommand("bench-hash"))
      return lbe::cmd_bench_hash(bench_n, bench_bits, bench_dim, bench_trials, bench_seed,
                                 std::cout);
    if (app.got_subcommand("episode")) return lbe::cmd_episode(config_path, std::cout);
  } catch (const lbe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return lbe::kExitUsage;
  } catch (const lbe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lbe::kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lbe::kExitRuntime;
  }
  return lbe::kExitUsage;
}
