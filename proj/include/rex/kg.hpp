#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace rex {

inline constexpr const char* kInversePrefix = "_inv_";
inline constexpr const char* kUnknownType = "Unknown";

struct Relation {
  int id = -1;
  std::string label;
  bool is_inverse = false;
  std::optional<int> inverse_of;
};

struct Triple {
  int subject = -1;
  int relation = -1;
  int object = -1;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// A candidate fact to validate. object is -1 when unknown at inference.
struct Hypothesis {
  int subject = -1;
  int relation = -1;
  int object = -1;
};

/// One adjacency slot: (relation, other endpoint), ordered.
struct RelEdge {
  int relation = -1;
  int entity = -1;

  friend auto operator<=>(const RelEdge&, const RelEdge&) = default;
};

/// A simple entity chain through the graph. triples[i].object ==
/// triples[i+1].subject; an empty path has source == target.
struct Path {
  int source = -1;
  int target = -1;
  std::vector<Triple> triples;

  bool empty() const { return triples.empty(); }
  std::size_t length() const { return triples.size(); }

  friend auto operator<=>(const Path&, const Path&) = default;
};

/// Entity visit order of a path: source, then each triple's object.
std::vector<int> entity_sequence(const Path& p);

enum class TripleFormat { kTsv };

/// Immutable indexed triple store. Entities and relations carry dense ids
/// assigned in first-appearance order; the triple set has set semantics.
/// Also represents derived clustered graphs (nodes are cluster ids).
///
/// Thread safety: immutable after construction, safe for concurrent reads.
/// apply_entity_types is part of the single-threaded setup phase.
class KnowledgeGraph {
 public:
  int num_entities() const { return static_cast<int>(entity_labels_.size()); }
  int num_relations() const { return static_cast<int>(relations_.size()); }
  std::size_t num_triples() const { return triples_.size(); }

  const std::vector<Triple>& triples() const { return triples_; }
  const std::vector<Relation>& relations() const { return relations_; }

  const std::string& entity_label(int v) const;
  const std::string& relation_label(int r) const;
  const Relation& relation(int r) const;
  const std::string& entity_type(int v) const;

  std::optional<int> find_entity(const std::string& label) const;
  std::optional<int> find_relation(const std::string& label) const;

  /// Requires the id to resolve; throws LookupError otherwise.
  int entity_id(const std::string& label) const;
  int relation_id(const std::string& label) const;

  bool has_triple(const Triple& t) const;

  /// Outgoing edges of v in ascending (relation, entity) order.
  std::span<const RelEdge> neighbors(int v) const;
  std::span<const RelEdge> incoming(int v) const;

  /// Subject appearances + object appearances. A self-loop counts twice.
  std::size_t degree(int v) const;
  std::size_t degree_by_relation(int v, int r) const;

  /// Assigns type tags (entity id -> tag); unmapped entities keep their
  /// current tag. Call during setup, before sharing across threads.
  void apply_entity_types(const std::unordered_map<int, std::string>& types);

  /// Fingerprints over the label vocabularies, used to pair checkpoints
  /// with the graph they were trained on.
  std::uint64_t entity_vocab_hash() const;
  std::uint64_t relation_vocab_hash() const;

 private:
  friend class KnowledgeGraphBuilder;

  std::vector<std::string> entity_labels_;
  std::vector<std::string> entity_types_;
  std::vector<Relation> relations_;
  std::vector<Triple> triples_;  // sorted, unique
  std::vector<std::vector<RelEdge>> out_;
  std::vector<std::vector<RelEdge>> in_;
  std::unordered_map<std::string, int> entity_index_;
  std::unordered_map<std::string, int> relation_index_;
};

/// Accumulates vocabularies and triples, then freezes them into a graph.
class KnowledgeGraphBuilder {
 public:
  /// Returns the id, creating it on first appearance.
  int add_entity(const std::string& label);
  int add_relation(const std::string& label);

  /// Copies an existing relation vocabulary (id-stable), e.g. when the
  /// clustered graph must share relation ids with its source graph.
  void seed_relations(const std::vector<Relation>& relations);

  void add_triple(const Triple& t);
  void add_triple(const std::string& s, const std::string& r, const std::string& o);

  void set_entity_type(int v, std::string type);

  /// Declares r_inv as the inverse of r (mutual).
  void declare_inverse(int r, int r_inv);

  std::size_t entity_count() const { return entity_labels_.size(); }

  /// Deduplicates triples and builds the adjacency index.
  KnowledgeGraph build();

 private:
  std::vector<std::string> entity_labels_;
  std::vector<std::string> entity_types_;
  std::vector<Relation> relations_;
  std::vector<Triple> triples_;
  std::unordered_map<std::string, int> entity_index_;
  std::unordered_map<std::string, int> relation_index_;
};

/// Loads a tab-separated triple file (subject<TAB>relation<TAB>object,
/// '#' comment lines allowed). Duplicate lines collapse; vocabularies are
/// built in first-appearance order. Relations named with the inverse
/// prefix are paired with their base relation when both are present.
KnowledgeGraph load_triples(const std::filesystem::path& path,
                            TripleFormat format = TripleFormat::kTsv);

/// Writes triples as TSV in stored (sorted) order.
void save_triples(const KnowledgeGraph& kg, const std::filesystem::path& path);

/// Returns a graph where every triple (s,r,o) lacking a declared inverse
/// gains (o, inv(r), s); fresh inverse relations are labeled with the
/// inverse prefix. Idempotent.
KnowledgeGraph add_inverse_edges(const KnowledgeGraph& kg);

struct EntityTypeLoad {
  std::unordered_map<int, std::string> types;
  std::vector<std::string> warnings;  // labels that did not resolve
};

/// Loads entity<TAB>type lines. Unknown labels produce warnings, not errors.
EntityTypeLoad load_entity_types(const std::filesystem::path& path,
                                 const KnowledgeGraph& kg);

/// Loads hypothesis triples. Subject/relation/object must resolve and
/// degenerate lines (subject == object) are rejected.
std::vector<Hypothesis> load_split(const std::filesystem::path& path,
                                   const KnowledgeGraph& kg);

}  // namespace rex
