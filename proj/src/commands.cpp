#include "lbe/commands.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "lbe/rng.hpp"
#include "lbe/state_io.hpp"
#include "lbe/trilevel.hpp"
#include "lbe/verification.hpp"

namespace lbe {

namespace fs = std::filesystem;

namespace {

Dataset build_dataset(const RunConfig& cfg) {
  if (cfg.dataset_kind == "blobs")
    return gen_blobs(cfg.dataset_classes, cfg.dataset_per_class, cfg.dataset_dim,
                     cfg.dataset_spread, cfg.seed);
  if (cfg.dataset_kind == "moons") return gen_moons(cfg.dataset_per_class, cfg.dataset_noise, cfg.seed);
  if (cfg.dataset_path.empty())
    throw ConfigError("dataset.kind = csv requires dataset.path");
  return load_csv(cfg.dataset_path);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
  if (!out) throw DataError("write failed for '" + path + "'");
}

std::string snapshot_csv(const SimilarityMatrix& sim, const std::vector<std::size_t>& ids) {
  const Matrix2D snap = sim.snapshot(ids);
  std::string out = "id";
  for (std::size_t id : ids) out += "," + std::to_string(id);
  out += "\n";
  char buf[40];
  for (std::size_t r = 0; r < snap.rows(); ++r) {
    out += std::to_string(ids[r]);
    for (std::size_t c = 0; c < snap.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", snap.at(r, c));
      out += ",";
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace

int cmd_train(const std::string& config_path, std::ostream& out) {
  const RunConfig cfg = RunConfig::parse_file(config_path);
  const Dataset full = build_dataset(cfg);
  const auto [train, val] = split(full, cfg.val_fraction, cfg.seed);

  fs::create_directories(cfg.out_dir);
  const auto in_dir = [&](const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
  };
  write_file(in_dir("config.txt"), cfg.serialize());
  save_csv(train, in_dir("train.csv"));
  save_csv(val, in_dir("val.csv"));

  Rng snap_rng = Rng::stream(cfg.seed, "snapshot");
  std::vector<std::size_t> snap_rows =
      snap_rng.sample_indices(train.size(), std::min<std::size_t>(train.size(), 20));
  std::set<long> snap_epochs = {0, static_cast<long>(cfg.epochs / 2),
                                static_cast<long>(cfg.epochs)};

  const SnapshotHook hook = [&](long epoch, const LBEState& st) {
    if (!snap_epochs.count(epoch)) return;
    write_file(in_dir("sim_epoch_" + std::to_string(epoch) + ".csv"),
               snapshot_csv(st.sim, snap_rows));
  };

  TrainResult result;
  try {
    result = train_lbe(cfg, train, val, hook);
  } catch (const NumericError& e) {
    write_file(in_dir("diagnostic.txt"), std::string("training aborted: ") + e.what() + "\n");
    throw;
  }

  write_file(in_dir("metrics.csv"), metrics_csv(result.history));
  save_state(result.state, in_dir("final_state.json"));

  if (cfg.hash_t() || cfg.hash_s()) {
    const PoolRepr pool = make_pool_repr(result.state);
    if (cfg.hash_t()) {
      std::ofstream codes(in_dir("codes_t.csv"));
      export_codebook(pool.t_codes, result.state.train_ids, codes);
    }
    if (cfg.hash_s()) {
      std::ofstream codes(in_dir("codes_s.csv"));
      export_codebook(pool.s_codes, result.state.train_ids, codes);
    }
  }

  const double final_top1 = result.history.empty() ? 0.0 : result.history.back().val_top1;
  out << "trained " << result.history.size() << " epochs, final val top-1 " << final_top1
      << ", artifacts in " << cfg.out_dir << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& state_path, const std::string& data_path,
             const EvalOptions& opts, std::ostream& out) {
  const LBEState st = load_state(state_path);
  const Dataset data = load_csv(data_path);
  const PredictMode mode = opts.mode == "topk" ? PredictMode::kTopK : PredictMode::kSoft;
  if (opts.mode != "topk" && opts.mode != "soft")
    throw ConfigError("eval: mode must be soft or topk");
  const EvalResult r =
      evaluate(st, data, mode, static_cast<std::size_t>(opts.k), !opts.exclude_self);

  char buf[64];
  std::string report;
  std::snprintf(buf, sizeof buf, "top1 %.17g\n", r.top1);
  report += buf;
  if (r.top5 >= 0.0) {
    std::snprintf(buf, sizeof buf, "top5 %.17g\n", r.top5);
    report += buf;
  }
  out << report;

  std::string csv = "metric,value\n";
  std::snprintf(buf, sizeof buf, "top1,%.17g\n", r.top1);
  csv += buf;
  if (r.top5 >= 0.0) {
    std::snprintf(buf, sizeof buf, "top5,%.17g\n", r.top5);
    csv += buf;
  }
  std::snprintf(buf, sizeof buf, "mean_loss,%.17g\n", r.mean_loss);
  csv += buf;
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    std::snprintf(buf, sizeof buf, "class%zu_acc,%.17g\n", c, r.per_class[c]);
    csv += buf;
  }
  write_file(opts.out_path, csv);
  return kExitOk;
}

int cmd_retrieve(const std::string& state_path, const std::string& data_path,
                 std::size_t query_id, std::size_t k, std::ostream& out) {
  const LBEState st = load_state(state_path);
  const Dataset data = load_csv(data_path);
  if (data.dim() != st.scaler.mean.size())
    throw ShapeError("retrieve: dataset dims do not match the trained state");
  if (query_id >= data.size()) throw RangeError("retrieve: query id out of range");

  const Matrix2D x = st.scaler.apply(data.features);

  // retrieval scores under the state's configured path
  Vec scores(data.size(), 0.0);
  if (st.cfg.hash_t()) {
    const CodeMode cmode =
        st.cfg.code_mode == "sample" ? CodeMode::kSampled : CodeMode::kThresholded;
    const BinaryCodebook codes = encode_codes(st.siamese.encoder, x, st.cfg.gumbel_temp,
                                              st.cfg.seed ^ 0x7265ull, true, cmode);
    for (std::size_t j = 0; j < data.size(); ++j)
      scores[j] =
          sigmoid(hamming_sim(codes.code(query_id), codes.code(j), codes.bits) / st.cfg.tau);
  } else {
    const Matrix2D emb = mlp_forward(st.siamese.encoder, x);
    for (std::size_t j = 0; j < data.size(); ++j)
      scores[j] = sigmoid(cosine_sim(emb.row(query_id), emb.row(j)) / st.cfg.tau);
  }

  std::vector<std::size_t> cand;
  for (std::size_t j = 0; j < data.size(); ++j)
    if (j != query_id) cand.push_back(j);
  const auto top = retrieve_topk([&](std::size_t j) { return scores[j]; }, cand, k);

  const int query_label = data.labels[query_id];
  char buf[96];
  out << "id\tscore\tlabel\tcorrect\n";
  for (std::size_t j : top) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%d\t%d\n", data.ids[j], scores[j],
                  data.labels[j], data.labels[j] == query_label ? 1 : 0);
    out << buf;
  }
  return kExitOk;
}

int cmd_grad_check(std::ostream& out) {
  const OracleReport report = make_report(run_grad_checks());
  out << report.text();
  return report.all_pass() ? kExitOk : kExitCheckFailure;
}

int cmd_oracle_check(const std::string& csv_path, std::ostream& out) {
  const OracleReport report = make_report(run_oracle_checks());
  out << report.text();
  if (!csv_path.empty()) write_file(csv_path, report.csv());
  return report.all_pass() ? kExitOk : kExitCheckFailure;
}

BenchResult bench_hash(std::size_t n_codes, std::size_t code_bits, std::size_t embed_dim,
                       std::size_t trials, std::uint64_t seed) {
  if (n_codes < 1000) throw ConfigError("bench-hash: n_codes must be >= 1000");
  if (trials == 0) throw ConfigError("bench-hash: trials must be >= 1");
  Rng rng = Rng::stream(seed, "bench");
  const std::size_t words = (code_bits + 63) / 64;

  std::vector<std::uint64_t> codes(n_codes * words);
  for (auto& w : codes) w = rng.next_u64();
  if (code_bits % 64) {
    const std::uint64_t mask = (~0ull) >> (64 - code_bits % 64);
    for (std::size_t i = 0; i < n_codes; ++i) codes[i * words + words - 1] &= mask;
  }
  Matrix2D emb(n_codes, embed_dim);
  for (double& v : emb.data()) v = rng.normal();
  Vec emb_norm(n_codes);
  for (std::size_t i = 0; i < n_codes; ++i)
    emb_norm[i] = std::max(vec_norm2(emb.row(i)), 1e-12);

  std::vector<std::uint64_t> q_codes(trials * words);
  for (auto& w : q_codes) w = rng.next_u64();
  Matrix2D q_emb(trials, embed_dim);
  for (double& v : q_emb.data()) v = rng.normal();

  std::vector<std::size_t> ham_top(trials), cos_top(trials);

  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t q = 0; q < trials; ++q) {
    const std::uint64_t* qc = q_codes.data() + q * words;
    std::size_t best = 0, best_d = code_bits + 1;
    for (std::size_t i = 0; i < n_codes; ++i) {
      const std::uint64_t* c = codes.data() + i * words;
      std::size_t d = 0;
      for (std::size_t w = 0; w < words; ++w)
        d += static_cast<std::size_t>(std::popcount(qc[w] ^ c[w]));
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    ham_top[q] = best;
  }
  const auto t1 = std::chrono::steady_clock::now();
  for (std::size_t q = 0; q < trials; ++q) {
    const auto qr = q_emb.row(q);
    const double qn = std::max(vec_norm2(qr), 1e-12);
    std::size_t best = 0;
    double best_s = -2.0;
    for (std::size_t i = 0; i < n_codes; ++i) {
      const double s = vec_dot(qr, emb.row(i)) / (qn * emb_norm[i]);
      if (s > best_s) {
        best_s = s;
        best = i;
      }
    }
    cos_top[q] = best;
  }
  const auto t2 = std::chrono::steady_clock::now();

  BenchResult r;
  r.hamming_ns =
      std::chrono::duration<double, std::nano>(t1 - t0).count() / static_cast<double>(trials);
  r.dense_ns =
      std::chrono::duration<double, std::nano>(t2 - t1).count() / static_cast<double>(trials);
  r.speedup = r.hamming_ns > 0.0 ? r.dense_ns / r.hamming_ns : 0.0;
  std::size_t agree = 0;
  for (std::size_t q = 0; q < trials; ++q) agree += ham_top[q] == cos_top[q];
  r.top1_agreement = static_cast<double>(agree) / static_cast<double>(trials);
  return r;
}

int cmd_bench_hash(std::size_t n_codes, std::size_t code_bits, std::size_t embed_dim,
                   std::size_t trials, std::uint64_t seed, std::ostream& out) {
  const BenchResult r = bench_hash(n_codes, code_bits, embed_dim, trials, seed);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "hamming_ns_per_query %.1f\ndense_ns_per_query %.1f\nspeedup %.2fx\n"
                "top1_agreement %.4f\n",
                r.hamming_ns, r.dense_ns, r.speedup, r.top1_agreement);
  out << buf;
  return kExitOk;
}

EpisodeSuiteResult run_episode_suite(const RunConfig& cfg, int seed_lo, int seed_hi) {
  if (seed_hi < seed_lo) throw ConfigError("episode: bad seed range");
  EpisodeSuiteResult res;
  for (int s = seed_lo; s <= seed_hi; ++s) {
    RunConfig c2 = cfg;
    c2.seed = static_cast<std::uint64_t>(s);
    const Dataset base = gen_blobs(c2.dataset_classes, c2.dataset_per_class, c2.dataset_dim,
                                   c2.dataset_spread, c2.seed);
    Rng ep_rng = Rng::stream(c2.seed, "episodes");
    double seed_sum = 0.0;
    for (int e = 0; e < c2.ep_count; ++e) {
      const Episode ep =
          make_episode(base, c2.ep_n_way, c2.ep_k_shot, c2.ep_q_query, ep_rng.next_u64());
      const double acc = run_episode(c2, ep);
      res.all_accuracies.push_back(acc);
      seed_sum += acc;
    }
    res.per_seed_mean.push_back(seed_sum / static_cast<double>(c2.ep_count));
  }
  double total = 0.0;
  for (double a : res.all_accuracies) total += a;
  res.mean = total / static_cast<double>(res.all_accuracies.size());
  double var = 0.0, seed_mean = 0.0;
  for (double m : res.per_seed_mean) seed_mean += m;
  seed_mean /= static_cast<double>(res.per_seed_mean.size());
  for (double m : res.per_seed_mean) var += (m - seed_mean) * (m - seed_mean);
  res.stddev = res.per_seed_mean.size() > 1
                   ? std::sqrt(var / static_cast<double>(res.per_seed_mean.size() - 1))
                   : 0.0;
  return res;
}

int cmd_episode(const std::string& config_path, std::ostream& out) {
  const RunConfig cfg = RunConfig::parse_file(config_path);
  const EpisodeSuiteResult res = run_episode_suite(cfg, 1, 10);

  fs::create_directories(cfg.out_dir);
  std::string csv = "seed,mean_accuracy\n";
  char buf[64];
  for (std::size_t i = 0; i < res.per_seed_mean.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, res.per_seed_mean[i]);
    csv += buf;
  }
  write_file((fs::path(cfg.out_dir) / "episodes.csv").string(), csv);

  for (std::size_t i = 0; i < res.per_seed_mean.size(); ++i) {
    std::snprintf(buf, sizeof buf, "seed %zu: %.4f\n", i + 1, res.per_seed_mean[i]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "mean %.4f +- %.4f over %zu episodes\n", res.mean, res.stddev,
                res.all_accuracies.size());
  out << buf;
  return kExitOk;
}

}  // namespace lbe
