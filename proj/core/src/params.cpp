#include "grkt/params.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "grkt/errors.hpp"
#include "json.hpp"

namespace grkt {

void HyperParams::validate() const {
  if (embed_dim == 0 || memory_dim == 0 || hidden_dim == 0 || layers == 0)
    throw ConfigError("dimensions and layer count must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("eta must lie in (0, 1)");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

std::size_t ParameterStore::add(std::string name, Matrix init) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
  Entry e;
  e.name = name;
  e.grad = Matrix(init.rows, init.cols);
  e.first_moment = Matrix(init.rows, init.cols);
  e.second_moment = Matrix(init.rows, init.cols);
  e.value = std::move(init);
  entries_.push_back(std::move(e));
  index_.emplace(std::move(name), entries_.size() - 1);
  return entries_.size() - 1;
}

std::size_t ParameterStore::index(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.grad.set_zero();
}

bool ParameterStore::same_values(const ParameterStore& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i)
    if (entries_[i].name != other.entries_[i].name || !(entries_[i].value == other.entries_[i].value)) return false;
  return true;
}

void Gradients::accumulate_into(ParameterStore& store) const {
  for (std::size_t i = 0; i < dense.size() && i < store.size(); ++i) {
    auto& g = store[i].grad;
    if (dense[i].size() != 0) {
      for (std::size_t k = 0; k < g.size(); ++k) g.data[k] += dense[i].data[k];
    }
  }
  for (std::size_t i = 0; i < sparse.size() && i < store.size(); ++i) {
    if (sparse[i].empty()) continue;
    auto& g = store[i].grad;
    // Fixed row order keeps the reduction deterministic.
    std::vector<std::size_t> rows;
    rows.reserve(sparse[i].size());
    for (const auto& [r, _] : sparse[i]) rows.push_back(r);
    std::sort(rows.begin(), rows.end());
    for (auto r : rows) {
      const auto& src = sparse[i].at(r);
      for (std::size_t c = 0; c < g.cols; ++c) g(r, c) += src[c];
    }
  }
}

void adam_step(ParameterStore& store, const AdamConfig& cfg) {
  ++store.adam_step;
  const double t = static_cast<double>(store.adam_step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store[i];
    for (std::size_t k = 0; k < e.value.size(); ++k) {
      double g = e.grad.data[k] + cfg.l2 * e.value.data[k];
      double& m = e.first_moment.data[k];
      double& v = e.second_moment.data[k];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      e.value.data[k] -= cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
    }
  }
}

void write_checkpoint(std::ostream& out, const ParameterStore& store) {
  using nlohmann::json;
  const auto& h = store.hyper;
  json j;
  j["format"] = "grkt-checkpoint";
  j["version"] = kCheckpointFormatVersion;
  j["hyper"] = {{"embed_dim", h.embed_dim},       {"memory_dim", h.memory_dim}, {"hidden_dim", h.hidden_dim},
                {"layers", h.layers},             {"learning_rate", h.learning_rate},
                {"l2", h.l2},                     {"eta", h.eta},
                {"seed", h.seed},                 {"batch_size", h.batch_size},
                {"patience", h.patience}};
  j["num_questions"] = store.num_questions;
  j["num_kcs"] = store.num_kcs;
  j["adam_step"] = store.adam_step;
  json arrays = json::array();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store[i];
    arrays.push_back({{"name", e.name}, {"shape", {e.value.rows, e.value.cols}}, {"values", e.value.data}});
  }
  j["arrays"] = std::move(arrays);
  out << j.dump() << '\n';
}

void write_checkpoint(const std::filesystem::path& path, const ParameterStore& store) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_checkpoint(out, store);
}

ParameterStore read_checkpoint(std::istream& in) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "grkt-checkpoint") throw ParseError("not a checkpoint file");
    if (j.at("version").get<int>() != kCheckpointFormatVersion) throw ParseError("unsupported checkpoint version");
    ParameterStore store;
    const auto& h = j.at("hyper");
    store.hyper.embed_dim = h.at("embed_dim");
    store.hyper.memory_dim = h.at("memory_dim");
    store.hyper.hidden_dim = h.at("hidden_dim");
    store.hyper.layers = h.at("layers");
    store.hyper.learning_rate = h.at("learning_rate");
    store.hyper.l2 = h.at("l2");
    store.hyper.eta = h.at("eta");
    store.hyper.seed = h.at("seed");
    store.hyper.batch_size = h.at("batch_size");
    store.hyper.patience = h.at("patience");
    store.num_questions = j.at("num_questions");
    store.num_kcs = j.at("num_kcs");
    store.adam_step = j.value("adam_step", std::uint64_t{0});
    for (const auto& a : j.at("arrays")) {
      std::size_t r = a.at("shape").at(0), c = a.at("shape").at(1);
      Matrix m(r, c);
      auto values = a.at("values").get<std::vector<double>>();
      if (values.size() != r * c) throw ParseError("array '" + a.at("name").get<std::string>() + "' size mismatch");
      m.data = std::move(values);
      store.add(a.at("name").get<std::string>(), std::move(m));
    }
    return store;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

std::vector<double> constrain_nonneg_vector(std::span<const double> raw) {
  ad::Tape t;
  Matrix m(raw.size(), 1);
  std::copy(raw.begin(), raw.end(), m.data.begin());
  return ad::softmax_columns(t.constant(std::move(m))).value().data;
}

Matrix constrain_nonneg_matrix(const Matrix& raw) {
  ad::Tape t;
  return ad::softmax_columns(t.constant(raw)).value();
}

ParamBinder::ParamBinder(ad::Tape& tape, const ParameterStore& store)
    : tape_(&tape), store_(&store), leaves_(store.size()), gathered_(store.size(), 0) {}

ad::Var ParamBinder::operator()(std::size_t index) {
  auto& v = leaves_.at(index);
  if (!v.valid()) v = tape_->parameter((*store_)[index].value);
  return v;
}

ad::Var ParamBinder::gather(std::size_t index, std::span<const std::size_t> rows) {
  gathered_.at(index) = 1;
  return tape_->gather_rows((*store_)[index].value, rows, index);
}

Gradients ParamBinder::collect() const {
  Gradients g(store_->size());
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    if (leaves_[i].valid()) g.dense[i] = tape_->grad(leaves_[i]);
    if (gathered_[i]) g.sparse[i] = tape_->sparse_grad(i);
  }
  return g;
}

ParameterStore read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace grkt
