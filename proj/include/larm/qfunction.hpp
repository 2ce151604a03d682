#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "larm/embedding.hpp"
#include "larm/features.hpp"

namespace larm {

// Tabular action values keyed by (observation hash, RM state id). Unseen
// keys read as all-zero. update() is the standard Q-learning move toward a
// target: Q += alpha * (target - Q).
class TabularQ {
 public:
  explicit TabularQ(int num_actions);

  int num_actions() const { return num_actions_; }
  double value(std::uint64_t s, int u, int a) const;
  std::vector<double> values(std::uint64_t s, int u) const;
  void update(std::uint64_t s, int u, int a, double target, double alpha);
  std::size_t table_size() const { return table_.size(); }

 private:
  friend class QFunction;
  int num_actions_;
  std::map<std::pair<std::uint64_t, int>, std::vector<double>> table_;
};

// Bilinear action values: Q(s, u, a) = [x_s; 1]^T W_a [phi(u); 1] with sparse
// binary state features x_s. The bilinear form (rather than a single weight
// vector over a concatenation [x_s ++ phi(u)]) is deliberate: the cross terms
// are what let the same state feature push different actions under different
// instructions, e.g. "move forward when the key is ahead" only while the
// active sub-goal mentions the key. A concatenation-linear Q has no such
// interaction and collapses to one instruction-independent policy.
//
// A frozen copy of the weights serves as the TD target network; sync_target()
// refreshes it.
class LinearQ {
 public:
  LinearQ(FeatureExtractor features, int embedding_dim, int num_actions);

  const FeatureExtractor& features() const { return features_; }
  int embedding_dim() const { return embedding_dim_; }
  int num_actions() const { return num_actions_; }

  double value(const SparseFeatures& x, const EmbeddingVector& e, int a) const;
  std::vector<double> values(const SparseFeatures& x, const EmbeddingVector& e) const;
  std::vector<double> target_values(const SparseFeatures& x, const EmbeddingVector& e) const;

  // One squared-error gradient step on Q(x, e, a) toward target.
  void update(const SparseFeatures& x, const EmbeddingVector& e, int a, double target,
              double alpha);

  struct TdSample {
    const SparseFeatures* x;
    EmbeddingVector e;
    int a;
    double target;
  };
  // Averaged minibatch TD step: every residual is measured against the
  // current weights, then one combined step of size alpha / batch size is
  // applied. Sequential single-sample updates at full alpha are far less
  // stable than this.
  void update_batch(const std::vector<TdSample>& batch, double alpha);

  void sync_target();

 private:
  friend class QFunction;
  std::vector<double> values_of(const std::vector<Eigen::MatrixXd>& w, const SparseFeatures& x,
                                const EmbeddingVector& e) const;
  FeatureExtractor features_;
  int embedding_dim_;
  int num_actions_;
  // Per action, (embedding_dim+1) x (feature_dim+1): one column per state
  // feature, so the sparse lookups touch contiguous memory.
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::MatrixXd> target_;
};

// Either backend behind one save/load surface. The serialized form is JSON
// with a "backend" discriminator, so a file round-trips into the same kind.
class QFunction {
 public:
  static QFunction make_tabular(int num_actions);
  static QFunction make_linear(FeatureExtractor features, int embedding_dim, int num_actions);

  bool is_tabular() const { return tabular_ != nullptr; }
  bool is_linear() const { return linear_ != nullptr; }
  TabularQ& tabular();
  const TabularQ& tabular() const;
  LinearQ& linear();
  const LinearQ& linear() const;
  int num_actions() const;

  std::string to_json() const;
  static QFunction from_json(const std::string& text);
  void save(const std::string& path) const;
  static QFunction load(const std::string& path);

  QFunction(const QFunction& other);
  QFunction& operator=(const QFunction& other);
  QFunction(QFunction&&) = default;
  QFunction& operator=(QFunction&&) = default;

 private:
  QFunction() = default;
  std::unique_ptr<TabularQ> tabular_;
  std::unique_ptr<LinearQ> linear_;
};

}  // namespace larm
