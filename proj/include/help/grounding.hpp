#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "help/plan_dsl.hpp"

namespace help {

/// Sparse unit vector. Indices are strictly increasing.
struct TermVector {
  std::string term;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  double norm() const;
};

double cosine(const TermVector& a, const TermVector& b);

class EmptyTerm : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptyVocabulary : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// Batch form; remote embedders send one request per batch.
  virtual std::vector<TermVector> embed_all(const std::vector<std::string>& terms) const = 0;
  virtual std::string identity() const = 0;

  TermVector embed(std::string_view term) const;
};

/// Character trigrams of " term " counted and L2-normalized. Each trigram maps
/// to its three bytes packed into one index, so no two trigrams collide.
class TrigramEmbedder final : public Embedder {
 public:
  std::vector<TermVector> embed_all(const std::vector<std::string>& terms) const override;
  std::string identity() const override { return "trigram-tf-v1"; }

  static TermVector embed_term(std::string_view term);
};

/// Dense vectors from an HTTP endpoint: POST {"input": [...]} to base_url + path,
/// accepting either {"data": [{"embedding": [...]}, ...]} or {"embeddings": [[...], ...]}.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(std::string base_url, std::string path = "/v1/embeddings", std::string model = {},
                 int timeout_ms = 30000);
  std::vector<TermVector> embed_all(const std::vector<std::string>& terms) const override;
  std::string identity() const override { return "remote:" + base_url_ + path_; }

 private:
  std::string base_url_;
  std::string path_;
  std::string model_;
  int timeout_ms_;
};

struct GroundingDecision {
  std::string original;
  std::string chosen;
  double score = 0.0;
  bool accepted = false;

  friend bool operator==(const GroundingDecision&, const GroundingDecision&) = default;
};

inline constexpr double kDefaultGroundingThreshold = 0.35;

/// Index of the largest score. Scores within a relative 1e-12 of each other
/// count as tied and the lower index wins. Throws on empty input.
std::size_t best_index(std::span<const double> scores);

/// Holds precomputed vectors for one vocabulary.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> terms, const Embedder& embedder);

  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<TermVector>& vectors() const { return vectors_; }
  bool empty() const { return terms_.empty(); }
  bool contains(std::string_view term) const;

 private:
  std::vector<std::string> terms_;
  std::vector<TermVector> vectors_;
};

/// Argmax-cosine entry (ties to the lowest index). Exact matches short-circuit
/// with score 1; 'unspecified' is never grounded; below threshold the term passes through.
GroundingDecision ground_term(std::string_view term, const Vocabulary& vocabulary, const Embedder& embedder,
                              double threshold = kDefaultGroundingThreshold);
GroundingDecision ground_term(std::string_view term, const std::vector<std::string>& vocabulary,
                              const Embedder& embedder, double threshold = kDefaultGroundingThreshold);

struct GroundedPlan {
  Plan plan;
  std::vector<GroundingDecision> decisions;
};

/// Grounds each argument against the vocabulary of its parameter role. Skill
/// names are untouched. An object-role argument that names a location exactly
/// is kept (the one-argument move_to form).
GroundedPlan ground_plan(const Plan& plan, const SkillRegistry& registry, const Vocabulary& objects,
                         const Vocabulary& locations, const Embedder& embedder,
                         double threshold = kDefaultGroundingThreshold);

nlohmann::json to_json(const GroundingDecision& d);

}  // namespace help
