#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lbe {

enum class Variant { kVanilla, kFastT, kFastS, kFastTS };
enum class LossMode { kBce, kLiteral };
enum class PredictMode { kSoft, kTopK };

// One run's worth of knobs. Parsed from a line-oriented "key = value" file
// with '#' comments and dotted keys; serialization round-trips losslessly.
struct RunConfig {
  // dataset
  std::string dataset_kind = "blobs";  // blobs | moons | csv
  std::string dataset_path;
  int dataset_classes = 3;
  int dataset_per_class = 40;
  int dataset_dim = 2;
  double dataset_spread = 0.3;
  double dataset_noise = 0.1;  // moons only
  double val_fraction = 0.1;

  // model
  std::vector<int> hidden = {16, 16};
  int embed_dim = 8;
  double tau = 1.0;
  bool tie_weights = false;

  // binary-code fast path
  double gumbel_temp = 0.5;
  int code_bits = 32;
  std::string code_mode = "threshold";  // inference codes: threshold | sample

  std::string variant = "lbe";     // lbe | fast-T | fast-S | fast-TS
  std::string loss_mode = "bce";   // bce | literal
  std::string predict_mode = "soft";  // soft | topk
  int predict_k = 16;
  bool allow_self_match = false;
  bool label_informed_init = false;

  // training
  int epochs = 500;
  int batch_size = 32;
  int patience = 0;  // 0 disables early stopping
  double t_lr = 0.01, t_momentum = 0.9, t_wd = 3e-4;
  double s_lr = 0.01, s_momentum = 0.9, s_wd = 3e-4;
  double a_lr = 0.05, a_wd = 0.0;
  std::string xi_policy = "scheduled";  // scheduled | fixed
  double xi_t = 0.01, xi_s = 0.01;

  // few-shot episodes
  int ep_n_way = 5, ep_k_shot = 1, ep_q_query = 15;
  int ep_count = 10;   // episodes per seed
  int ep_epochs = 80;  // training budget inside one episode

  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";

  static RunConfig parse_file(const std::string& path);
  static RunConfig parse_text(const std::string& text);
  std::string serialize() const;
  void validate() const;

  Variant variant_enum() const;
  LossMode loss_mode_enum() const;
  PredictMode predict_mode_enum() const;
  bool hash_t() const;
  bool hash_s() const;
};

}  // namespace lbe
