#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "rex/eval.hpp"
#include "rex/ic.hpp"
#include "rex/kg.hpp"
#include "rex/pathfinder.hpp"

namespace rex {

/// One experiment bundle: file locations plus every knob of the
/// preprocess / train / explain / evaluate / ablate pipeline. Loaded from
/// a JSON file; individual keys can be overridden on the command line.
struct RunConfig {
  std::filesystem::path triples;
  std::filesystem::path entity_types;     // optional
  std::filesystem::path embeddings;       // optional, fallback otherwise
  std::filesystem::path ontology_classes;      // optional
  std::filesystem::path ontology_annotations;  // optional
  std::filesystem::path train_split;
  std::filesystem::path test_split;

  ICMode ic_mode = ICMode::kCICByRelation;
  int clusters_k = 0;        // 0 = 10% of the node count
  int embedding_dim = 32;    // fallback embedding dimension
  int kmeans_max_iters = 50;
  bool add_inverses = true;
  bool allow_fallback_embeddings = true;

  RewardConfig rl;
  int beam_width = 50;
  bool resume = false;

  std::uint64_t seed = 13;
  int threads = 1;
  std::filesystem::path out_dir = "out";
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Validates referenced input files and numeric ranges; throws
/// ConfigError with the offending key.
void validate_run_config(const RunConfig& cfg);

/// Standard artifact locations under cfg.out_dir.
struct ArtifactPaths {
  std::filesystem::path graph;       // augmented triples
  std::filesystem::path ic_table;
  std::filesystem::path clusters;
  std::filesystem::path checkpoint;
  std::filesystem::path train_log;
  std::filesystem::path metrics;
  std::filesystem::path ablation;
  std::filesystem::path histogram;
  std::filesystem::path explanation_json;
  std::filesystem::path explanation_dot;
};
ArtifactPaths artifact_paths(const RunConfig& cfg);

/// Loads + augments the graph, computes clusters and the IC table, and
/// persists all three artifacts. Outputs are byte-identical across reruns
/// with the same config and seed.
void cmd_preprocess(const RunConfig& cfg);

/// Trains the policy on the train split; writes checkpoint and log. With
/// cfg.resume and an existing checkpoint, continues the epoch count.
void cmd_train(const RunConfig& cfg);

/// Builds the explanation subgraph for one hypothesis (labels). Writes
/// JSON and DOT; when no successful path exists the JSON carries status
/// "no explanation found".
void cmd_explain(const RunConfig& cfg, const std::string& subject,
                 const std::string& relation, const std::string& object);

/// Ranks the test split with the trained policy; writes metrics CSV (and
/// a relevance histogram when successful paths exist).
void cmd_evaluate(const RunConfig& cfg);

/// Four-variant ablation CSV.
void cmd_ablate(const RunConfig& cfg);

/// Shared loading helper: augmented graph + types applied.
KnowledgeGraph load_prepared_graph(const RunConfig& cfg);

/// Writes content to path atomically (temp file + rename).
void atomic_write(const std::filesystem::path& path, const std::string& content);

}  // namespace rex
