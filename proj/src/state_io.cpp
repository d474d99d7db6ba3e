#include "lbe/state_io.hpp"

#include <fstream>

#include <json.hpp>

namespace lbe {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix2D& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix2D matrix_from_json(const json& j) {
  Matrix2D m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto data = j.at("data").get<Vec>();
  if (data.size() != m.data().size()) throw DataError("state file: bad matrix payload");
  m.data() = data;
  return m;
}

json mlp_to_json(const MlpParams& p) {
  return json{{"dims", p.dims}, {"flat", p.flat}};
}

MlpParams mlp_from_json(const json& j) {
  MlpParams p = MlpParams::zeros(j.at("dims").get<std::vector<std::size_t>>());
  const auto flat = j.at("flat").get<Vec>();
  if (flat.size() != p.flat.size()) throw DataError("state file: bad parameter payload");
  p.flat = flat;
  return p;
}

}  // namespace

void save_state(const LBEState& st, const std::string& path) {
  json j;
  j["format"] = 1;
  j["config"] = st.cfg.serialize();
  j["scaler"] = {{"mean", st.scaler.mean}, {"scale", st.scaler.scale}};
  j["siamese"] = mlp_to_json(st.siamese.encoder);
  j["tau"] = st.siamese.tau;
  j["tied"] = st.matching.tied;
  if (!st.matching.tied) j["matching"] = mlp_to_json(st.matching.encoder);
  j["theta"] = st.sim.logits();
  j["train_x"] = matrix_to_json(st.train_x);
  j["train_y"] = st.train_y;
  j["train_ids"] = st.train_ids;
  j["n_classes"] = st.n_classes;
  j["epoch"] = st.epoch;
  std::ofstream out(path);
  if (!out) throw DataError("save_state: cannot write '" + path + "'");
  out << j.dump(1) << "\n";
  if (!out) throw DataError("save_state: write failed for '" + path + "'");
}

LBEState load_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_state: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(std::string("load_state: bad JSON: ") + e.what());
  }
  LBEState st;
  st.cfg = RunConfig::parse_text(j.at("config").get<std::string>());
  st.scaler.mean = j.at("scaler").at("mean").get<Vec>();
  st.scaler.scale = j.at("scaler").at("scale").get<Vec>();
  st.siamese.encoder = mlp_from_json(j.at("siamese"));
  st.siamese.tau = j.at("tau").get<double>();
  st.matching.tied = j.at("tied").get<bool>();
  if (!st.matching.tied) st.matching.encoder = mlp_from_json(j.at("matching"));
  st.train_x = matrix_from_json(j.at("train_x"));
  st.train_y = j.at("train_y").get<std::vector<int>>();
  st.train_ids = j.at("train_ids").get<std::vector<std::size_t>>();
  st.n_classes = j.at("n_classes").get<int>();
  st.epoch = j.at("epoch").get<long>();
  st.sim = SimilarityMatrix(st.train_x.rows());
  const auto theta = j.at("theta").get<Vec>();
  if (theta.size() != st.sim.pair_count()) throw DataError("load_state: bad logit payload");
  st.sim.logits() = theta;
  return st;
}

}  // namespace lbe
