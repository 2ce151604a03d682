#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace larm {

using EmbeddingVector = Eigen::VectorXd;

inline constexpr int kEmbeddingDim = 64;

// Frozen hash constants. Changing either re-keys every stored embedding, so
// they are part of the on-disk/offline contract: FNV-1a 64-bit offset basis
// for the bucket hash, and the same basis perturbed by the 64-bit golden
// ratio for the sign hash.
inline constexpr std::uint64_t kBucketHashSeed = 14695981039346656037ULL;
inline constexpr std::uint64_t kSignHashSeed =
    14695981039346656037ULL ^ 0x9E3779B97F4A7C15ULL;

// FNV-1a over the bytes of token, starting from seed.
std::uint64_t hash_token(const std::string& token, std::uint64_t seed);

// Lowercases and splits on every non-alphanumeric byte. Digits are kept.
std::vector<std::string> tokenize(const std::string& text);

// Deterministic feature-hash embedding: each token adds +-1 to bucket
// hash_token(t, kBucketHashSeed) % d with sign from the low bit of
// hash_token(t, kSignHashSeed); the sum is L2-normalized. Text with no
// tokens maps to e_1. Always unit norm.
EmbeddingVector embed_instruction(const std::string& text, int d = kEmbeddingDim);

// Cosine similarity. For unit vectors this is the plain dot product.
// Throws DimensionMismatch when sizes differ.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct PcaResult {
  Eigen::MatrixXd directions;   // d x k, orthonormal columns
  Eigen::VectorXd explained;    // k variances, non-increasing
  Eigen::MatrixXd coordinates;  // n x k, mean-centered projections
  Eigen::VectorXd mean;         // d
};

// Principal components via power iteration with deflation (tolerance 1e-8,
// at most 10000 iterations per component; ConvergenceFailure past that).
// Sign convention: each direction's largest-magnitude component is positive.
// Throws DimensionMismatch for empty input, mismatched dimensions, or
// k outside [1, d].
PcaResult pca_project(const std::vector<EmbeddingVector>& vectors, int k);

}  // namespace larm
