#include "larm/qfunction.hpp"

#include <json.hpp>

#include <fstream>
#include <memory>

#include "larm/errors.hpp"

namespace larm {

using nlohmann::json;

TabularQ::TabularQ(int num_actions) : num_actions_(num_actions) {
  if (num_actions < 1) throw BadArg(0, "tabular Q needs at least one action");
}

double TabularQ::value(std::uint64_t s, int u, int a) const {
  auto it = table_.find({s, u});
  return it == table_.end() ? 0.0 : it->second[a];
}

std::vector<double> TabularQ::values(std::uint64_t s, int u) const {
  auto it = table_.find({s, u});
  if (it == table_.end()) return std::vector<double>(num_actions_, 0.0);
  return it->second;
}

void TabularQ::update(std::uint64_t s, int u, int a, double target, double alpha) {
  auto [it, fresh] = table_.try_emplace({s, u}, std::vector<double>(num_actions_, 0.0));
  double& q = it->second[a];
  q += alpha * (target - q);
}

LinearQ::LinearQ(FeatureExtractor features, int embedding_dim, int num_actions)
    : features_(std::move(features)), embedding_dim_(embedding_dim), num_actions_(num_actions) {
  if (embedding_dim < 1) throw BadArg(0, "linear Q needs a positive embedding dimension");
  if (num_actions < 1) throw BadArg(0, "linear Q needs at least one action");
  w_.assign(num_actions_,
            Eigen::MatrixXd::Zero(embedding_dim_ + 1, features_.dim() + 1));
  target_ = w_;
}

std::vector<double> LinearQ::values_of(const std::vector<Eigen::MatrixXd>& w,
                                       const SparseFeatures& x, const EmbeddingVector& e) const {
  if (x.dim != features_.dim()) throw DimensionMismatch("feature vector has the wrong dimension");
  if (e.size() != embedding_dim_) {
    throw DimensionMismatch("embedding vector has the wrong dimension");
  }
  Eigen::VectorXd eh(embedding_dim_ + 1);
  eh.head(embedding_dim_) = e;
  eh(embedding_dim_) = 1.0;
  std::vector<double> out(num_actions_, 0.0);
  const int bias_col = features_.dim();
  for (int a = 0; a < num_actions_; ++a) {
    double q = w[a].col(bias_col).dot(eh);
    for (int i : x.indices) q += w[a].col(i).dot(eh);
    out[a] = q;
  }
  return out;
}

double LinearQ::value(const SparseFeatures& x, const EmbeddingVector& e, int a) const {
  return values(x, e)[a];
}

std::vector<double> LinearQ::values(const SparseFeatures& x, const EmbeddingVector& e) const {
  return values_of(w_, x, e);
}

std::vector<double> LinearQ::target_values(const SparseFeatures& x,
                                           const EmbeddingVector& e) const {
  return values_of(target_, x, e);
}

void LinearQ::update(const SparseFeatures& x, const EmbeddingVector& e, int a, double target,
                     double alpha) {
  double q = value(x, e, a);
  double step = alpha * (target - q);
  Eigen::VectorXd eh(embedding_dim_ + 1);
  eh.head(embedding_dim_) = e;
  eh(embedding_dim_) = 1.0;
  w_[a].col(features_.dim()) += step * eh;
  for (int i : x.indices) w_[a].col(i) += step * eh;
}

void LinearQ::update_batch(const std::vector<TdSample>& batch, double alpha) {
  if (batch.empty()) return;
  // Residuals first, one combined step after, so samples inside a batch do
  // not chase each other.
  const int bias = features_.dim();
  Eigen::VectorXd ehj(embedding_dim_ + 1);
  std::vector<double> step(batch.size());
  for (size_t j = 0; j < batch.size(); ++j) {
    ehj.head(embedding_dim_) = batch[j].e;
    ehj(embedding_dim_) = 1.0;
    const Eigen::MatrixXd& w = w_[batch[j].a];
    double q = w.col(bias).dot(ehj);
    for (int i : batch[j].x->indices) q += w.col(i).dot(ehj);
    step[j] = alpha / batch.size() * (batch[j].target - q);
  }
  Eigen::VectorXd eh(embedding_dim_ + 1);
  const int bias_col = features_.dim();
  for (size_t j = 0; j < batch.size(); ++j) {
    eh.head(embedding_dim_) = batch[j].e;
    eh(embedding_dim_) = 1.0;
    Eigen::MatrixXd& w = w_[batch[j].a];
    w.col(bias_col) += step[j] * eh;
    for (int i : batch[j].x->indices) w.col(i) += step[j] * eh;
  }
}

void LinearQ::sync_target() { target_ = w_; }

QFunction QFunction::make_tabular(int num_actions) {
  QFunction q;
  q.tabular_ = std::make_unique<TabularQ>(num_actions);
  return q;
}

QFunction QFunction::make_linear(FeatureExtractor features, int embedding_dim, int num_actions) {
  QFunction q;
  q.linear_ = std::make_unique<LinearQ>(std::move(features), embedding_dim, num_actions);
  return q;
}

QFunction::QFunction(const QFunction& other) { *this = other; }

QFunction& QFunction::operator=(const QFunction& other) {
  if (this == &other) return *this;
  tabular_ = other.tabular_ ? std::make_unique<TabularQ>(*other.tabular_) : nullptr;
  linear_ = other.linear_ ? std::make_unique<LinearQ>(*other.linear_) : nullptr;
  return *this;
}

TabularQ& QFunction::tabular() {
  if (!tabular_) throw BadArg(0, "q-function is not tabular");
  return *tabular_;
}

const TabularQ& QFunction::tabular() const {
  if (!tabular_) throw BadArg(0, "q-function is not tabular");
  return *tabular_;
}

LinearQ& QFunction::linear() {
  if (!linear_) throw BadArg(0, "q-function is not linear");
  return *linear_;
}

const LinearQ& QFunction::linear() const {
  if (!linear_) throw BadArg(0, "q-function is not linear");
  return *linear_;
}

int QFunction::num_actions() const {
  return tabular_ ? tabular_->num_actions() : linear().num_actions();
}

std::string QFunction::to_json() const {
  json j;
  if (tabular_) {
    j["backend"] = "tabular";
    j["num_actions"] = tabular_->num_actions();
    json entries = json::array();
    for (const auto& [key, q] : tabular_->table_) {
      entries.push_back({key.first, key.second, q});
    }
    j["table"] = std::move(entries);
  } else {
    const LinearQ& lq = linear();
    j["backend"] = "linear";
    j["num_actions"] = lq.num_actions();
    j["embedding_dim"] = lq.embedding_dim();
    j["width"] = lq.features().width();
    j["height"] = lq.features().height();
    j["door_slots"] = lq.features().door_slots();
    json weights = json::array();
    for (const Eigen::MatrixXd& w : lq.w_) {
      std::vector<double> flat(w.data(), w.data() + w.size());
      weights.push_back(std::move(flat));
    }
    j["weights"] = std::move(weights);
  }
  return j.dump();
}

QFunction QFunction::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SyntaxError(0, std::string("bad q-function JSON: ") + e.what());
  }
  try {
    std::string backend = j.at("backend").get<std::string>();
    if (backend == "tabular") {
      QFunction q = make_tabular(j.at("num_actions").get<int>());
      for (const json& entry : j.at("table")) {
        std::uint64_t s = entry.at(0).get<std::uint64_t>();
        int u = entry.at(1).get<int>();
        std::vector<double> vals = entry.at(2).get<std::vector<double>>();
        if (static_cast<int>(vals.size()) != q.tabular_->num_actions()) {
          throw BadArg(0, "tabular entry has the wrong number of actions");
        }
        q.tabular_->table_[{s, u}] = std::move(vals);
      }
      return q;
    }
    if (backend == "linear") {
      FeatureExtractor fx(j.at("width").get<int>(), j.at("height").get<int>(),
                          j.at("door_slots").get<int>());
      QFunction q = make_linear(fx, j.at("embedding_dim").get<int>(),
                                j.at("num_actions").get<int>());
      LinearQ& lq = *q.linear_;
      const json& weights = j.at("weights");
      if (weights.size() != static_cast<std::size_t>(lq.num_actions())) {
        throw BadArg(0, "weight count does not match the action count");
      }
      for (int a = 0; a < lq.num_actions(); ++a) {
        std::vector<double> flat = weights[a].get<std::vector<double>>();
        if (flat.size() != static_cast<std::size_t>(lq.w_[a].size())) {
          throw BadArg(0, "weight matrix has the wrong size");
        }
        lq.w_[a] = Eigen::Map<const Eigen::MatrixXd>(flat.data(), lq.w_[a].rows(),
                                                     lq.w_[a].cols());
      }
      lq.sync_target();
      return q;
    }
    throw BadArg(0, "unknown q-function backend: " + backend);
  } catch (const json::exception& e) {
    throw BadArg(0, std::string("bad q-function field: ") + e.what());
  }
}

void QFunction::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write q-function file: " + path);
  out << to_json() << "\n";
}

QFunction QFunction::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read q-function file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace larm
