#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rex/kg.hpp"

namespace rex {

enum class ICMode { kIC, kCIC, kCICByRelation };

std::string to_string(ICMode mode);
ICMode ic_mode_from_string(const std::string& text);

struct EmbeddingTable {
  int dim = 0;
  std::vector<std::vector<double>> vectors;  // indexed by entity id
};

/// Reads `entity<TAB>v1 v2 ... vd` lines; every entity of kg must appear.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const KnowledgeGraph& kg);

/// Embeddings for graphs without a pretrained table: each entity's
/// relation-degree profile (length |R|) pushed through one seeded random
/// projection shared by all entities. Deterministic given seed.
EmbeddingTable fallback_embeddings(const KnowledgeGraph& kg, int dim,
                                   std::uint64_t seed);

struct ClusterAssignment {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> cluster_of;  // entity id -> cluster id in [0, k)
};

/// Lloyd iterations from k-means++ style seeded centers. Stops when
/// assignments are stable or after max_iters. Deterministic given seed.
/// Throws DataError when k exceeds the number of distinct vectors.
/// distortion_log, when given, records the total squared distance after
/// each assignment phase (non-increasing across iterations).
ClusterAssignment kmeans_cluster(const EmbeddingTable& emb, int k,
                                 std::uint64_t seed, int max_iters = 50,
                                 std::vector<double>* distortion_log = nullptr);

void save_clusters(const ClusterAssignment& clusters, const KnowledgeGraph& kg,
                   const std::filesystem::path& path);
ClusterAssignment load_clusters(const std::filesystem::path& path,
                                const KnowledgeGraph& kg);

/// Default cluster count: 10% of the node count, at least 1.
int default_cluster_count(const KnowledgeGraph& kg);

/// Nodes are cluster ids ("C0".."C{k-1}"), relations share ids with kg,
/// and an edge (Ci, r, Cj) exists iff some triple of kg maps into it.
KnowledgeGraph build_clustered_graph(const KnowledgeGraph& kg,
                                     const ClusterAssignment& clusters);

/// -ln(degree(v) / |G|). Throws UndefinedICError when degree(v) = 0.
double node_ic(const KnowledgeGraph& kg, int v);

/// -ln(degree_Gc(cluster(v)) / |Gc|), degrees taken in the clustered graph.
double clustered_node_ic(const KnowledgeGraph& kg_c,
                         const ClusterAssignment& clusters, int v);

/// -ln(degree_Gc(cluster(v), r) / N_r) with N_r the number of clustered
/// triples carrying relation r.
double clustered_node_ic_by_relation(const KnowledgeGraph& kg_c,
                                     const ClusterAssignment& clusters, int v,
                                     int r);

/// Per-entity information content scores plus the normalization constant
/// that maps raw surprisal into [0,1]. Raw scores are clamped at zero:
/// coarse clusterings can push a cluster's degree above the triple count
/// (both endpoints of an edge in one cluster), which would otherwise
/// produce negative surprisal.
class ICTable {
 public:
  ICMode mode = ICMode::kIC;
  double z = 1.0;  // normalization constant (ln|G| resp. ln|Gc|)
  int k = 0;
  std::uint64_t seed = 0;

  bool has(int v) const;
  bool has(int v, int r) const;

  /// Raw score of a node. In by-relation mode this is the relation-
  /// agnostic fallback score.
  double raw(int v) const;

  /// Raw score of a node under relation r. Outside by-relation mode, or
  /// when the (cluster, r) degree was zero, falls back to raw(v).
  double raw(int v, int r) const;

  double normalized(int v) const { return normalize(raw(v)); }
  double normalized(int v, int r) const { return normalize(raw(v, r)); }

  int num_relations() const { return num_relations_; }

  // Populated by compute_ic_table / load_ic_table.
  std::vector<double> node_raw;
  std::vector<char> node_defined;
  std::unordered_map<std::uint64_t, double> relation_raw;  // v*|R|+r
  int num_relations_ = 0;

 private:
  double normalize(double raw_score) const;
};

/// Builds the score table for every node with nonzero degree (and, in
/// by-relation mode, every (node, relation) pair with nonzero clustered
/// degree). clusters are required for the CIC modes.
ICTable compute_ic_table(const KnowledgeGraph& kg, ICMode mode,
                         const ClusterAssignment* clusters = nullptr,
                         std::optional<double> z_override = std::nullopt,
                         int threads = 1);

/// Mean of the two endpoint scores, normalized into [0,1]. In by-relation
/// mode both endpoints are conditioned on the edge's relation.
double edge_ic(const ICTable& table, const Triple& t);

/// Mean edge_ic over the path's triples. Throws ContractError on an
/// empty path.
double path_relevance(const ICTable& table, const Path& p);

void save_ic_table(const ICTable& table, const KnowledgeGraph& kg,
                   const std::filesystem::path& path);
ICTable load_ic_table(const std::filesystem::path& path,
                      const KnowledgeGraph& kg);

}  // namespace rex
