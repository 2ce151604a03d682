#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "larm/embedding.hpp"
#include "larm/errors.hpp"

using namespace larm;

TEST_CASE("tokenization lowercases and splits on non-alphanumerics") {
  CHECK(tokenize("Pick up the BLUE key!") ==
        std::vector<std::string>{"pick", "up", "the", "blue", "key"});
  CHECK(tokenize("go-to: goal_square #2") ==
        std::vector<std::string>{"go", "to", "goal", "square", "2"});
  CHECK(tokenize("   \t\n ").empty());
  CHECK(tokenize("").empty());
}

TEST_CASE("embeddings are deterministic unit vectors") {
  const char* texts[] = {"pick up the key", "open the door", "go to the goal square",
                         "task complete, stay put"};
  for (const char* t : texts) {
    CAPTURE(t);
    EmbeddingVector a = embed_instruction(t);
    EmbeddingVector b = embed_instruction(t);
    CHECK(a.size() == kEmbeddingDim);
    CHECK((a - b).norm() == 0.0);
    CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("token order and punctuation do not matter, casing does not matter") {
  EmbeddingVector a = embed_instruction("Pick up the blue key");
  EmbeddingVector b = embed_instruction("the BLUE key: pick up");
  CHECK((a - b).norm() == doctest::Approx(0.0));
}

TEST_CASE("empty text maps to the first basis vector") {
  EmbeddingVector e = embed_instruction("!!! ---");
  CHECK(e(0) == 1.0);
  CHECK(e.norm() == doctest::Approx(1.0));
  CHECK(e.tail(kEmbeddingDim - 1).norm() == 0.0);
}

TEST_CASE("shared tokens pull instructions together") {
  EmbeddingVector blue_key = embed_instruction("pick up the blue key");
  EmbeddingVector red_key = embed_instruction("pick up the red key");
  EmbeddingVector yellow_door = embed_instruction("open the yellow door");
  CHECK(cosine(blue_key, red_key) > cosine(blue_key, yellow_door));
  CHECK(cosine(blue_key, blue_key) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cosine rejects mismatched dimensions") {
  CHECK_THROWS_AS(cosine(embed_instruction("a", 8), embed_instruction("a", 16)),
                  DimensionMismatch);
}

TEST_CASE("token-set locality holds almost always") {
  // Instructions sharing more tokens should land closer. Sampled triples:
  // base phrase, one-substitution variant, all-different phrase.
  const std::vector<std::string> verbs = {"pick", "grab", "fetch", "take", "lift"};
  const std::vector<std::string> colors = {"blue", "red", "yellow", "green", "purple"};
  const std::vector<std::string> objects = {"key", "ball", "box", "door", "pyramid"};
  std::mt19937_64 rng(5150);
  int ok = 0, total = 1000;
  for (int i = 0; i < total; ++i) {
    const std::string& v = verbs[rng() % verbs.size()];
    const std::string& c1 = colors[rng() % colors.size()];
    const std::string& c2 = colors[rng() % colors.size()];
    const std::string& o = objects[rng() % objects.size()];
    std::string base = v + " the " + c1 + " " + o;
    std::string near = v + " the " + c2 + " " + o;
    std::string far = "walk around until something interesting happens " + std::to_string(i);
    EmbeddingVector eb = embed_instruction(base);
    if (cosine(eb, embed_instruction(near)) >= cosine(eb, embed_instruction(far))) ++ok;
  }
  CHECK(ok >= 990);
}

TEST_CASE("pca on an antipodal pair") {
  std::mt19937_64 rng(11);
  EmbeddingVector v(6);
  for (int i = 0; i < 6; ++i) v(i) = std::uniform_real_distribution<double>(-1, 1)(rng);
  v.normalize();
  std::vector<EmbeddingVector> data = {v, EmbeddingVector(-v)};
  PcaResult r = pca_project(data, 1);
  CHECK(r.mean.norm() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.directions.col(0).norm() == doctest::Approx(1.0).epsilon(1e-8));
  // Coordinates are +-|v| = +-1, opposite signs.
  CHECK(std::abs(r.coordinates(0, 0)) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.coordinates(0, 0) == doctest::Approx(-r.coordinates(1, 0)).epsilon(1e-8));
  // Sign convention: the direction's largest-magnitude entry is positive.
  int idx = 0;
  r.directions.col(0).cwiseAbs().maxCoeff(&idx);
  CHECK(r.directions(idx, 0) > 0.0);
}

TEST_CASE("pca recovers a planar cloud exactly with two components") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  int n = 20, d = 6;
  std::vector<EmbeddingVector> data;
  for (int i = 0; i < n; ++i) {
    EmbeddingVector x = EmbeddingVector::Zero(d);
    x(0) = dist(rng);
    x(1) = dist(rng);
    data.push_back(x);
  }
  PcaResult r = pca_project(data, 2);
  // Two components reconstruct the centered data exactly.
  for (int i = 0; i < n; ++i) {
    EmbeddingVector centered = data[i] - r.mean;
    EmbeddingVector rebuilt = r.directions * r.coordinates.row(i).transpose();
    CHECK((centered - rebuilt).norm() == doctest::Approx(0.0).epsilon(1e-6));
  }
  // Projection into a containing plane preserves pairwise distances.
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double orig = (data[i] - data[j]).norm();
      double proj = (r.coordinates.row(i) - r.coordinates.row(j)).norm();
      CHECK(proj == doctest::Approx(orig).epsilon(1e-9));
    }
  }
  CHECK(r.explained(0) >= r.explained(1));
}

TEST_CASE("pca agrees with a dense eigensolver") {
  std::mt19937_64 rng(777);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int n = 50, d = 64, k = 5;
  std::vector<EmbeddingVector> data;
  Eigen::MatrixXd rows(n, d);
  for (int i = 0; i < n; ++i) {
    EmbeddingVector x(d);
    for (int j = 0; j < d; ++j) x(j) = gauss(rng) * (1.0 + 0.1 * j);
    data.push_back(x);
    rows.row(i) = x.transpose();
  }
  PcaResult r = pca_project(data, k);

  Eigen::RowVectorXd mean = rows.colwise().mean();
  Eigen::MatrixXd centered = rows.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / double(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd evals = eig.eigenvalues().reverse();  // descending

  for (int c = 0; c < k; ++c) {
    CAPTURE(c);
    CHECK(r.explained(c) == doctest::Approx(evals(c)).epsilon(1e-6));
    // Directions match the eigensolver's up to sign.
    Eigen::VectorXd ref = eig.eigenvectors().col(d - 1 - c);
    double align = std::abs(ref.dot(r.directions.col(c)));
    CHECK(align == doctest::Approx(1.0).epsilon(1e-6));
  }
  // Orthonormal columns.
  Eigen::MatrixXd gram = r.directions.transpose() * r.directions;
  CHECK((gram - Eigen::MatrixXd::Identity(k, k)).norm() == doctest::Approx(0.0).epsilon(1e-8));
  // Coordinates are the centered projections.
  Eigen::MatrixXd expect_coords = centered * r.directions;
  CHECK((r.coordinates - expect_coords).norm() == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("pca input validation") {
  CHECK_THROWS_AS(pca_project({}, 1), DimensionMismatch);
  std::vector<EmbeddingVector> one = {EmbeddingVector::Ones(4)};
  CHECK_THROWS_AS(pca_project(one, 0), DimensionMismatch);
  CHECK_THROWS_AS(pca_project(one, 5), DimensionMismatch);
  std::vector<EmbeddingVector> ragged = {EmbeddingVector::Ones(4), EmbeddingVector::Ones(5)};
  CHECK_THROWS_AS(pca_project(ragged, 1), DimensionMismatch);
}

TEST_CASE("pca of identical points yields zero variance") {
  std::vector<EmbeddingVector> data(3, EmbeddingVector::Constant(4, 2.0));
  PcaResult r = pca_project(data, 2);
  CHECK(r.explained(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.explained(1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.coordinates.norm() == doctest::Approx(0.0).epsilon(1e-9));
}
