#include "rex/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rex/errors.hpp"
#include "rex/util.hpp"

namespace rex {

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid config JSON: " + std::string(e.what()));
  }

  RunConfig cfg;
  try {
    const auto get_path = [&](const char* key) -> std::filesystem::path {
      return j.contains(key) ? std::filesystem::path(j.at(key).get<std::string>())
                             : std::filesystem::path();
    };
    cfg.triples = get_path("triples");
    cfg.entity_types = get_path("entity_types");
    cfg.embeddings = get_path("embeddings");
    cfg.ontology_classes = get_path("ontology_classes");
    cfg.ontology_annotations = get_path("ontology_annotations");
    cfg.train_split = get_path("train_split");
    cfg.test_split = get_path("test_split");

    if (j.contains("ic_mode"))
      cfg.ic_mode = ic_mode_from_string(j.at("ic_mode").get<std::string>());
    if (j.contains("clusters_k")) cfg.clusters_k = j.at("clusters_k").get<int>();
    if (j.contains("embedding_dim"))
      cfg.embedding_dim = j.at("embedding_dim").get<int>();
    if (j.contains("kmeans_max_iters"))
      cfg.kmeans_max_iters = j.at("kmeans_max_iters").get<int>();
    if (j.contains("add_inverses"))
      cfg.add_inverses = j.at("add_inverses").get<bool>();
    if (j.contains("allow_fallback_embeddings"))
      cfg.allow_fallback_embeddings =
          j.at("allow_fallback_embeddings").get<bool>();
    if (j.contains("beam_width")) cfg.beam_width = j.at("beam_width").get<int>();
    if (j.contains("resume")) cfg.resume = j.at("resume").get<bool>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("out_dir"))
      cfg.out_dir = std::filesystem::path(j.at("out_dir").get<std::string>());

    if (j.contains("rl")) {
      const auto& rl = j.at("rl");
      const auto get_int = [&](const char* key, int fallback) {
        return rl.contains(key) ? rl.at(key).get<int>() : fallback;
      };
      const auto get_double = [&](const char* key, double fallback) {
        return rl.contains(key) ? rl.at(key).get<double>() : fallback;
      };
      const auto get_bool = [&](const char* key, bool fallback) {
        return rl.contains(key) ? rl.at(key).get<bool>() : fallback;
      };
      cfg.rl.use_relevance = get_bool("use_relevance", cfg.rl.use_relevance);
      cfg.rl.use_early_stop = get_bool("use_early_stop", cfg.rl.use_early_stop);
      cfg.rl.max_len = get_int("max_len", cfg.rl.max_len);
      cfg.rl.rollouts = get_int("rollouts", cfg.rl.rollouts);
      cfg.rl.baseline_decay = get_double("baseline_decay", cfg.rl.baseline_decay);
      cfg.rl.entropy_weight = get_double("entropy_weight", cfg.rl.entropy_weight);
      cfg.rl.learning_rate = get_double("learning_rate", cfg.rl.learning_rate);
      cfg.rl.epochs = get_int("epochs", cfg.rl.epochs);
      cfg.rl.batch_size = get_int("batch_size", cfg.rl.batch_size);
      cfg.rl.entity_dim = get_int("entity_dim", cfg.rl.entity_dim);
      cfg.rl.relation_dim = get_int("relation_dim", cfg.rl.relation_dim);
      cfg.rl.hidden_dim = get_int("hidden_dim", cfg.rl.hidden_dim);
      cfg.rl.mlp_hidden_dim = get_int("mlp_hidden_dim", cfg.rl.mlp_hidden_dim);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config value: " + std::string(e.what()));
  }

  // One top-level seed feeds every phase.
  cfg.rl.seed = derive_seed(cfg.seed, "rl");
  return cfg;
}

void validate_run_config(const RunConfig& cfg) {
  const auto require_file = [](const std::filesystem::path& p, const char* key) {
    if (p.empty()) throw ConfigError(std::string("config key '") + key +
                                     "' is required");
    if (!std::filesystem::exists(p))
      throw ConfigError(std::string("config key '") + key +
                        "' points to a missing file: " + p.string());
  };
  require_file(cfg.triples, "triples");
  const auto optional_file = [](const std::filesystem::path& p, const char* key) {
    if (!p.empty() && !std::filesystem::exists(p))
      throw ConfigError(std::string("config key '") + key +
                        "' points to a missing file: " + p.string());
  };
  optional_file(cfg.entity_types, "entity_types");
  optional_file(cfg.embeddings, "embeddings");
  optional_file(cfg.ontology_classes, "ontology_classes");
  optional_file(cfg.ontology_annotations, "ontology_annotations");
  optional_file(cfg.train_split, "train_split");
  optional_file(cfg.test_split, "test_split");

  if (cfg.embedding_dim < 2) throw ConfigError("embedding_dim must be >= 2");
  if (cfg.clusters_k < 0) throw ConfigError("clusters_k must be >= 0");
  if (cfg.beam_width < 1) throw ConfigError("beam_width must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (cfg.rl.max_len < 1) throw ConfigError("rl.max_len must be >= 1");
  if (cfg.rl.rollouts < 1) throw ConfigError("rl.rollouts must be >= 1");
  if (cfg.rl.epochs < 1) throw ConfigError("rl.epochs must be >= 1");
  if (cfg.rl.batch_size < 1) throw ConfigError("rl.batch_size must be >= 1");
  if (cfg.rl.entity_dim < 1 || cfg.rl.relation_dim < 1 ||
      cfg.rl.hidden_dim < 1 || cfg.rl.mlp_hidden_dim < 1)
    throw ConfigError("rl dimensions must be positive");
  if (cfg.rl.learning_rate <= 0.0)
    throw ConfigError("rl.learning_rate must be positive");
  if (cfg.rl.baseline_decay < 0.0 || cfg.rl.baseline_decay >= 1.0)
    throw ConfigError("rl.baseline_decay must lie in [0, 1)");
}

ArtifactPaths artifact_paths(const RunConfig& cfg) {
  ArtifactPaths p;
  p.graph = cfg.out_dir / "graph.tsv";
  p.ic_table = cfg.out_dir / "ic_table.tsv";
  p.clusters = cfg.out_dir / "clusters.tsv";
  p.checkpoint = cfg.out_dir / "checkpoint.bin";
  p.train_log = cfg.out_dir / "training_log.csv";
  p.metrics = cfg.out_dir / "metrics.csv";
  p.ablation = cfg.out_dir / "ablation.csv";
  p.histogram = cfg.out_dir / "ic_histogram.csv";
  p.explanation_json = cfg.out_dir / "explanation.json";
  p.explanation_dot = cfg.out_dir / "explanation.dot";
  return p;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IOError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IOError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

/// Writes through a temp file in the same directory, then renames.
template <typename WriteFn>
void atomic_emit(const std::filesystem::path& path, WriteFn&& write) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  write(tmp);
  std::filesystem::rename(tmp, path);
}

ClusterAssignment compute_clusters(const RunConfig& cfg,
                                   const KnowledgeGraph& kg) {
  EmbeddingTable emb;
  if (!cfg.embeddings.empty()) {
    emb = load_embeddings(cfg.embeddings, kg);
  } else if (cfg.allow_fallback_embeddings) {
    emb = fallback_embeddings(kg, cfg.embedding_dim,
                              derive_seed(cfg.seed, "embeddings"));
  } else {
    throw ConfigError(
        "no embedding file given and allow_fallback_embeddings is false");
  }
  const int k =
      cfg.clusters_k > 0 ? cfg.clusters_k : default_cluster_count(kg);
  return kmeans_cluster(emb, k, derive_seed(cfg.seed, "kmeans"),
                        cfg.kmeans_max_iters);
}

}  // namespace

KnowledgeGraph load_prepared_graph(const RunConfig& cfg) {
  KnowledgeGraph kg = load_triples(cfg.triples);
  if (cfg.add_inverses) kg = add_inverse_edges(kg);
  if (!cfg.entity_types.empty()) {
    const EntityTypeLoad types = load_entity_types(cfg.entity_types, kg);
    for (const std::string& label : types.warnings)
      log_warn("type file references unknown entity '" + label + "'");
    kg.apply_entity_types(types.types);
  }
  return kg;
}

void cmd_preprocess(const RunConfig& cfg) {
  validate_run_config(cfg);
  const ArtifactPaths out = artifact_paths(cfg);
  const KnowledgeGraph kg = load_prepared_graph(cfg);
  log_info("graph loaded: " + std::to_string(kg.num_entities()) + " entities, " +
           std::to_string(kg.num_relations()) + " relations, " +
           std::to_string(kg.num_triples()) + " triples");

  const ClusterAssignment clusters = compute_clusters(cfg, kg);
  const ICTable table = compute_ic_table(
      kg, cfg.ic_mode, cfg.ic_mode == ICMode::kIC ? nullptr : &clusters,
      std::nullopt, cfg.threads);

  atomic_emit(out.graph, [&](const auto& tmp) { save_triples(kg, tmp); });
  atomic_emit(out.clusters,
              [&](const auto& tmp) { save_clusters(clusters, kg, tmp); });
  atomic_emit(out.ic_table,
              [&](const auto& tmp) { save_ic_table(table, kg, tmp); });
  log_info("preprocess artifacts written to " + cfg.out_dir.string());
}

namespace {

struct PreparedRun {
  KnowledgeGraph kg;
  ICTable table;
};

/// Later phases consume the preprocess artifacts; preprocess must run first.
PreparedRun load_artifacts(const RunConfig& cfg) {
  const ArtifactPaths paths = artifact_paths(cfg);
  if (!std::filesystem::exists(paths.graph) ||
      !std::filesystem::exists(paths.ic_table))
    throw ConfigError("preprocess artifacts not found under " +
                      cfg.out_dir.string() + "; run `rex preprocess` first");
  PreparedRun run;
  run.kg = load_triples(paths.graph);
  if (!cfg.entity_types.empty()) {
    const EntityTypeLoad types = load_entity_types(cfg.entity_types, run.kg);
    run.kg.apply_entity_types(types.types);
  }
  run.table = load_ic_table(paths.ic_table, run.kg);
  return run;
}

RewardConfig rl_config(const RunConfig& cfg) {
  RewardConfig rl = cfg.rl;
  rl.seed = derive_seed(cfg.seed, "rl");
  return rl;
}

}  // namespace

void cmd_train(const RunConfig& cfg) {
  validate_run_config(cfg);
  if (cfg.train_split.empty())
    throw ConfigError("config key 'train_split' is required for training");
  const ArtifactPaths out = artifact_paths(cfg);
  PreparedRun run = load_artifacts(cfg);
  const auto train_hyps = load_split(cfg.train_split, run.kg);

  const RewardConfig rl = rl_config(cfg);
  TrainResult result;
  if (cfg.resume && std::filesystem::exists(out.checkpoint)) {
    const Checkpoint prev = load_checkpoint(out.checkpoint, run.kg);
    log_info("resuming from epoch " + std::to_string(prev.epochs_done));
    result = train(run.kg, train_hyps, rl, run.table, cfg.threads, &prev.params,
                   prev.epochs_done, prev.baseline);
  } else {
    result = train(run.kg, train_hyps, rl, run.table, cfg.threads);
  }

  Checkpoint ckpt;
  ckpt.params = std::move(result.params);
  ckpt.config = rl;
  ckpt.baseline = result.baseline;
  ckpt.epochs_done = result.epochs_done;
  ckpt.entity_vocab_hash = run.kg.entity_vocab_hash();
  ckpt.relation_vocab_hash = run.kg.relation_vocab_hash();
  atomic_emit(out.checkpoint,
              [&](const auto& tmp) { save_checkpoint(ckpt, tmp); });
  atomic_emit(out.train_log,
              [&](const auto& tmp) { save_train_log(result.log, tmp); });
  if (!result.log.empty())
    log_info("final batch mean reward " +
             std::to_string(result.log.back().mean_reward));
}

void cmd_explain(const RunConfig& cfg, const std::string& subject,
                 const std::string& relation, const std::string& object) {
  validate_run_config(cfg);
  const ArtifactPaths out = artifact_paths(cfg);
  PreparedRun run = load_artifacts(cfg);
  const Checkpoint ckpt = load_checkpoint(out.checkpoint, run.kg);

  const Hypothesis h{run.kg.entity_id(subject), run.kg.relation_id(relation),
                     run.kg.entity_id(object)};

  OntologyHierarchy ont;
  if (!cfg.ontology_classes.empty() && !cfg.ontology_annotations.empty())
    ont = load_ontology(cfg.ontology_classes, cfg.ontology_annotations, run.kg);

  // Successful (fidelity-1) beam paths feed the explanation.
  const auto beams = beam_search_paths(run.kg, ckpt.params, h.subject,
                                       h.relation, cfg.beam_width,
                                       ckpt.config.max_len);
  std::vector<Path> successful;
  for (const RankedTarget& entry : beams) {
    if (entry.entity == h.object && !entry.path.empty())
      successful.push_back(entry.path);
  }
  std::sort(successful.begin(), successful.end());
  successful.erase(std::unique(successful.begin(), successful.end()),
                   successful.end());

  ExplanationDocument doc;
  if (successful.empty()) {
    doc = make_empty_document(h, run.kg);
    log_info("no explanation found for the hypothesis");
  } else {
    const auto selected = group_and_select(successful, run.table, run.kg);
    const ExplanationSubgraph g = build_explanation(h, selected, ont);
    doc = to_document(g, run.kg, ont);
    log_info("explanation assembled from " + std::to_string(selected.size()) +
             " metapath groups");
  }
  atomic_write(out.explanation_json, explanation_to_json(doc) + "\n");
  atomic_write(out.explanation_dot, explanation_to_dot(doc));
}

namespace {

KnownAnswers known_answers_for(const RunConfig& cfg, const KnowledgeGraph& kg,
                               std::span<const Hypothesis> test_hyps) {
  KnownAnswers known;
  known.add_triples(kg);
  known.add_hypotheses(test_hyps);
  if (!cfg.train_split.empty() && std::filesystem::exists(cfg.train_split))
    known.add_hypotheses(load_split(cfg.train_split, kg));
  return known;
}

}  // namespace

void cmd_evaluate(const RunConfig& cfg) {
  validate_run_config(cfg);
  if (cfg.test_split.empty())
    throw ConfigError("config key 'test_split' is required for evaluation");
  const ArtifactPaths out = artifact_paths(cfg);
  PreparedRun run = load_artifacts(cfg);
  const Checkpoint ckpt = load_checkpoint(out.checkpoint, run.kg);
  const auto test_hyps = load_split(cfg.test_split, run.kg);
  const KnownAnswers known = known_answers_for(cfg, run.kg, test_hyps);

  EvalConfig eval_cfg;
  eval_cfg.beam_width = cfg.beam_width;
  eval_cfg.max_len = ckpt.config.max_len;
  eval_cfg.seed = cfg.seed;
  eval_cfg.threads = cfg.threads;
  const EvalReport report =
      evaluate(run.kg, ckpt.params, test_hyps, known, eval_cfg);

  const std::vector<MetricsRow> rows = {
      metrics_row("REx", report.filtered),
      metrics_row("REx (raw)", report.raw),
  };
  atomic_emit(out.metrics,
              [&](const auto& tmp) { save_metrics_csv(rows, tmp); });
  log_info("filtered MRR " + std::to_string(report.filtered.mrr) + ", hits@10 " +
           std::to_string(report.filtered.hits10));

  if (!report.successful_paths.empty()) {
    const Histogram hist =
        ic_distribution(report.successful_paths, run.table, 20);
    atomic_emit(out.histogram,
                [&](const auto& tmp) { save_histogram_csv(hist, tmp); });
  }
}

void cmd_ablate(const RunConfig& cfg) {
  validate_run_config(cfg);
  if (cfg.train_split.empty() || cfg.test_split.empty())
    throw ConfigError("ablation requires train_split and test_split");
  const ArtifactPaths out = artifact_paths(cfg);
  PreparedRun run = load_artifacts(cfg);
  const auto train_hyps = load_split(cfg.train_split, run.kg);
  const auto test_hyps = load_split(cfg.test_split, run.kg);
  const KnownAnswers known = known_answers_for(cfg, run.kg, test_hyps);

  EvalConfig eval_cfg;
  eval_cfg.beam_width = cfg.beam_width;
  eval_cfg.max_len = cfg.rl.max_len;
  eval_cfg.seed = cfg.seed;
  eval_cfg.threads = cfg.threads;

  const auto rows = run_ablation(run.kg, train_hyps, test_hyps, rl_config(cfg),
                                 eval_cfg, run.table, known, cfg.threads);
  std::vector<MetricsRow> csv;
  csv.reserve(rows.size());
  for (const AblationRow& row : rows)
    csv.push_back(metrics_row(row.variant, row.report.filtered));
  atomic_emit(out.ablation,
              [&](const auto& tmp) { save_metrics_csv(csv, tmp); });
}

}  // namespace rex
