#include "help/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <httplib.h>

namespace help {

double TermVector::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

double cosine(const TermVector& a, const TermVector& b) {
  double dot = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.indices.size() && j < b.indices.size()) {
    if (a.indices[i] == b.indices[j]) {
      dot += a.values[i++] * b.values[j++];
    } else if (a.indices[i] < b.indices[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (na * nb);
}

TermVector Embedder::embed(std::string_view term) const {
  auto out = embed_all({std::string(term)});
  return std::move(out.front());
}

// ---------------------------------------------------------------------------
// Trigram embedder

TermVector TrigramEmbedder::embed_term(std::string_view term) {
  const std::string norm = normalize_arg(term);
  if (norm.empty()) throw EmptyTerm("cannot embed an empty term");
  const std::string padded = " " + norm + " ";
  std::map<std::uint32_t, double> counts;
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const auto b = [&](std::size_t k) { return static_cast<std::uint32_t>(static_cast<unsigned char>(padded[i + k])); };
    counts[(b(0) << 16) | (b(1) << 8) | b(2)] += 1.0;
  }
  double sq = 0.0;
  for (const auto& [_, c] : counts) sq += c * c;
  const double n = std::sqrt(sq);
  TermVector v;
  v.term = norm;
  for (const auto& [idx, c] : counts) {
    v.indices.push_back(idx);
    v.values.push_back(c / n);
  }
  return v;
}

std::vector<TermVector> TrigramEmbedder::embed_all(const std::vector<std::string>& terms) const {
  std::vector<TermVector> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back(embed_term(t));
  return out;
}

// ---------------------------------------------------------------------------
// Remote embedder

RemoteEmbedder::RemoteEmbedder(std::string base_url, std::string path, std::string model, int timeout_ms)
    : base_url_(std::move(base_url)), path_(std::move(path)), model_(std::move(model)), timeout_ms_(timeout_ms) {}

std::vector<TermVector> RemoteEmbedder::embed_all(const std::vector<std::string>& terms) const {
  std::vector<std::string> normalized;
  for (const auto& t : terms) {
    normalized.push_back(normalize_arg(t));
    if (normalized.back().empty()) throw EmptyTerm("cannot embed an empty term");
  }
  httplib::Client client(base_url_);
  const auto timeout = std::chrono::milliseconds(timeout_ms_);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  nlohmann::json body{{"input", normalized}};
  if (!model_.empty()) body["model"] = model_;
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) throw std::runtime_error("embedding request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw std::runtime_error("embedding endpoint returned status " + std::to_string(res->status));

  const auto doc = nlohmann::json::parse(res->body);
  std::vector<std::vector<double>> rows;
  if (doc.contains("data")) {
    for (const auto& item : doc.at("data")) rows.push_back(item.at("embedding").get<std::vector<double>>());
  } else {
    rows = doc.at("embeddings").get<std::vector<std::vector<double>>>();
  }
  if (rows.size() != normalized.size()) throw std::runtime_error("embedding endpoint returned wrong batch size");

  std::vector<TermVector> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    TermVector v;
    v.term = normalized[r];
    double sq = 0.0;
    for (double x : rows[r]) sq += x * x;
    const double n = std::sqrt(sq);
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (rows[r][i] == 0.0) continue;
      v.indices.push_back(static_cast<std::uint32_t>(i));
      v.values.push_back(n > 0.0 ? rows[r][i] / n : 0.0);
    }
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grounding

std::size_t best_index(std::span<const double> scores) {
  if (scores.empty()) throw EmptyVocabulary("no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    const double a = scores[i], b = scores[best];
    const bool tied = std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
    if (a > b && !tied) best = i;
  }
  return best;
}

Vocabulary::Vocabulary(std::vector<std::string> terms, const Embedder& embedder) : terms_(std::move(terms)) {
  for (auto& t : terms_) t = normalize_arg(t);
  if (!terms_.empty()) vectors_ = embedder.embed_all(terms_);
}

bool Vocabulary::contains(std::string_view term) const {
  return std::find(terms_.begin(), terms_.end(), term) != terms_.end();
}

GroundingDecision ground_term(std::string_view term, const Vocabulary& vocabulary, const Embedder& embedder,
                              double threshold) {
  const std::string t = normalize_arg(term);
  if (t.empty()) throw EmptyTerm("cannot ground an empty term");
  if (vocabulary.empty()) throw EmptyVocabulary("cannot ground '" + t + "' against an empty vocabulary");
  if (t == kUnspecified) return {t, t, 0.0, false};
  if (vocabulary.contains(t)) return {t, t, 1.0, true};

  const TermVector query = embedder.embed(t);
  std::vector<double> scores;
  scores.reserve(vocabulary.vectors().size());
  for (const auto& v : vocabulary.vectors()) scores.push_back(cosine(query, v));
  const std::size_t best = best_index(scores);
  GroundingDecision d{t, t, scores[best], scores[best] >= threshold};
  if (d.accepted) d.chosen = vocabulary.terms()[best];
  return d;
}

GroundingDecision ground_term(std::string_view term, const std::vector<std::string>& vocabulary,
                              const Embedder& embedder, double threshold) {
  return ground_term(term, Vocabulary(vocabulary, embedder), embedder, threshold);
}

GroundedPlan ground_plan(const Plan& plan, const SkillRegistry& registry, const Vocabulary& objects,
                         const Vocabulary& locations, const Embedder& embedder, double threshold) {
  GroundedPlan out{plan, {}};
  for (auto& action : out.plan.actions) {
    const SkillSchema* schema = registry.find(action.skill);
    if (schema == nullptr || schema->arity() != action.args.size()) continue;
    for (std::size_t i = 0; i < action.args.size(); ++i) {
      auto& arg = action.args[i];
      GroundingDecision d;
      if (schema->params[i] == ParamRole::Object && locations.contains(normalize_arg(arg))) {
        const std::string t = normalize_arg(arg);
        d = {t, t, 1.0, true};
      } else {
        d = ground_term(arg, schema->params[i] == ParamRole::Object ? objects : locations, embedder, threshold);
      }
      arg = d.chosen;
      out.decisions.push_back(std::move(d));
    }
  }
  return out;
}

nlohmann::json to_json(const GroundingDecision& d) {
  return {{"original", d.original}, {"chosen", d.chosen}, {"score", d.score}, {"accepted", d.accepted}};
}

}  // namespace help
