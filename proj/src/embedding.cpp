#include "larm/embedding.hpp"

#include <cctype>
#include <cmath>
#include <random>

#include "larm/errors.hpp"

namespace larm {

std::uint64_t hash_token(const std::string& token, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

EmbeddingVector embed_instruction(const std::string& text, int d) {
  if (d < 1) throw DimensionMismatch("embedding dimension must be positive");
  EmbeddingVector v = EmbeddingVector::Zero(d);
  for (const std::string& tok : tokenize(text)) {
    std::uint64_t bucket = hash_token(tok, kBucketHashSeed) % static_cast<std::uint64_t>(d);
    double sign = (hash_token(tok, kSignHashSeed) & 1ULL) ? 1.0 : -1.0;
    v[static_cast<int>(bucket)] += sign;
  }
  double norm = v.norm();
  if (norm == 0.0) {
    v.setZero();
    v[0] = 1.0;
    return v;
  }
  return v / norm;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("cosine: dimensions " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
  double na = a.norm();
  double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DimensionMismatch("cosine: zero vector");
  return a.dot(b) / (na * nb);
}

PcaResult pca_project(const std::vector<EmbeddingVector>& vectors, int k) {
  if (vectors.empty()) throw DimensionMismatch("pca_project: no vectors");
  const int n = static_cast<int>(vectors.size());
  const int d = static_cast<int>(vectors[0].size());
  for (const EmbeddingVector& v : vectors) {
    if (v.size() != d) throw DimensionMismatch("pca_project: inconsistent dimensions");
  }
  if (k < 1 || k > d) throw DimensionMismatch("pca_project: k must be in [1, d]");

  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) x.row(i) = vectors[i].transpose();
  Eigen::VectorXd mean = x.colwise().mean();
  x.rowwise() -= mean.transpose();

  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  Eigen::MatrixXd cov = (x.transpose() * x) / denom;

  constexpr double kTol = 1e-8;
  constexpr int kMaxIters = 10000;

  // Deterministic start vector; re-used (re-orthogonalized) per component.
  std::mt19937_64 rng(0x1a2b3c4d5e6fULL);
  Eigen::VectorXd start(d);
  for (int i = 0; i < d; ++i) {
    start[i] = static_cast<double>(rng()) / static_cast<double>(std::mt19937_64::max()) - 0.5;
  }

  PcaResult out;
  out.directions.resize(d, k);
  out.explained.resize(k);
  out.mean = mean;

  Eigen::MatrixXd deflated = cov;
  for (int c = 0; c < k; ++c) {
    Eigen::VectorXd v = start;
    // Keep the iterate out of the span of previous components.
    for (int j = 0; j < c; ++j) v -= out.directions.col(j).dot(v) * out.directions.col(j);
    if (v.norm() < 1e-12) {
      v = Eigen::VectorXd::Unit(d, c % d);
      for (int j = 0; j < c; ++j) v -= out.directions.col(j).dot(v) * out.directions.col(j);
    }
    v.normalize();

    bool converged = false;
    for (int it = 0; it < kMaxIters; ++it) {
      Eigen::VectorXd next = deflated * v;
      for (int j = 0; j < c; ++j) next -= out.directions.col(j).dot(next) * out.directions.col(j);
      double len = next.norm();
      if (len < 1e-15) {
        // Deflated matrix annihilates v: v spans a zero-variance direction.
        converged = true;
        break;
      }
      next /= len;
      double delta = (next - v).norm();
      v = next;
      if (delta < kTol) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw ConvergenceFailure("pca_project: component " + std::to_string(c) +
                               " did not converge in " + std::to_string(kMaxIters) +
                               " iterations");
    }

    // Largest-magnitude component positive; ties resolved by lowest index.
    int arg = 0;
    for (int i = 1; i < d; ++i) {
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (v[arg] < 0.0) v = -v;

    double lambda = v.dot(deflated * v);
    out.directions.col(c) = v;
    out.explained[c] = lambda < 0.0 ? 0.0 : lambda;
    deflated -= lambda * v * v.transpose();
  }

  out.coordinates = x * out.directions;
  return out;
}

}  // namespace larm
