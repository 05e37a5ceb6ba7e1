#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rex/ic.hpp"
#include "rex/kg.hpp"

namespace rex {

/// Alternating sequence type_0, r_1, type_1, ..., r_k, type_k.
struct Metapath {
  std::vector<std::string> elements;

  friend auto operator<=>(const Metapath&, const Metapath&) = default;
};

std::string to_string(const Metapath& mp);       // elements joined by '|'
Metapath metapath_from_string(const std::string& line);

/// Entity types come from the graph's type tags ("Unknown" when untyped).
Metapath metapath_of(const Path& p, const KnowledgeGraph& kg);

/// One metapath per line.
std::vector<Metapath> load_metapaths(const std::filesystem::path& path);
void save_metapaths(std::span<const Metapath> metapaths,
                    const std::filesystem::path& path);

struct SelectedPath {
  Metapath metapath;
  Path path;
  double relevance = 0.0;
};

/// Partitions paths by metapath and keeps the most relevant one per
/// group; ties break on the lexicographically smallest entity sequence.
std::vector<SelectedPath> group_and_select(std::span<const Path> paths,
                                           const ICTable& table,
                                           const KnowledgeGraph& kg);

/// Subclass DAG over ontology classes plus entity annotations.
class OntologyHierarchy {
 public:
  int num_classes() const { return static_cast<int>(class_labels_.size()); }
  const std::string& class_label(int c) const;
  std::optional<int> find_class(const std::string& label) const;

  const std::vector<int>& parents(int c) const;
  const std::vector<int>& annotations(int entity) const;  // empty when none
  bool is_direct_subclass(int child, int parent) const;

  /// Reflexive-transitive superclass closure of one class.
  std::set<int> ancestors(int c) const;

  /// Union of the closures of every annotation class of the entity.
  std::set<int> entity_ancestors(int entity) const;

  friend OntologyHierarchy load_ontology(const std::filesystem::path&,
                                         const std::filesystem::path&,
                                         const KnowledgeGraph&);

 private:
  std::vector<std::string> class_labels_;
  std::unordered_map<std::string, int> class_index_;
  std::vector<std::vector<int>> parents_;
  std::unordered_map<int, std::vector<int>> annotations_;
};

/// Loads `child<TAB>parent` class edges and `entity<TAB>class`
/// annotations. The subclass graph must be acyclic; annotations must
/// reference known classes. Annotations of unknown entity labels are
/// skipped with a warning.
OntologyHierarchy load_ontology(const std::filesystem::path& class_edges_path,
                                const std::filesystem::path& annotations_path,
                                const KnowledgeGraph& kg);

/// Minimal common ancestors of the two entities' annotation classes under
/// reflexive-transitive subclass closure. Empty when either entity has no
/// annotations. A DAG can yield several.
std::set<int> lca(const OntologyHierarchy& ont, int e1, int e2);

struct ExplanationSubgraph {
  Hypothesis hypothesis;
  std::vector<SelectedPath> paths;
  std::vector<Triple> triples;  // union over paths, sorted unique
  std::vector<int> class_ids;   // ontology classes added, sorted
  std::vector<std::pair<int, int>> type_axioms;      // entity -> class
  std::vector<std::pair<int, int>> subclass_axioms;  // child -> parent
  std::map<Triple, std::vector<int>> provenance;     // triple -> path indices
};

/// Merges the selected paths and enriches every consecutive entity pair
/// with its LCA classes: type axioms to both entities, plus direct
/// subclass edges among the added classes.
ExplanationSubgraph build_explanation(const Hypothesis& h,
                                      std::span<const SelectedPath> selected,
                                      const OntologyHierarchy& ont);

/// Serialization-friendly, label-level form of an explanation.
struct ExplanationDocument {
  std::string status;  // "ok" or "no explanation found"
  std::vector<std::string> hypothesis;  // subject, relation, object labels
  struct PathEntry {
    std::string metapath;
    std::vector<std::array<std::string, 3>> triples;
    double relevance = 0.0;

    bool operator==(const PathEntry&) const = default;
  };
  std::vector<PathEntry> paths;
  std::vector<std::pair<int, std::string>> classes;  // id, label
  std::vector<std::pair<std::string, std::string>> type_axioms;
  std::vector<std::pair<std::string, std::string>> subclass_axioms;

  bool operator==(const ExplanationDocument&) const = default;
};

ExplanationDocument to_document(const ExplanationSubgraph& g,
                                const KnowledgeGraph& kg,
                                const OntologyHierarchy& ont);

ExplanationDocument make_empty_document(const Hypothesis& h,
                                        const KnowledgeGraph& kg);

enum class ExplanationFormat { kJson, kDot };

void export_explanation(const ExplanationDocument& doc,
                        ExplanationFormat format,
                        const std::filesystem::path& path);

ExplanationDocument import_explanation_json(const std::filesystem::path& path);

std::string explanation_to_json(const ExplanationDocument& doc);
std::string explanation_to_dot(const ExplanationDocument& doc);

}  // namespace rex
