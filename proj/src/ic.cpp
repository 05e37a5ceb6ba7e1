#include "rex/ic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rex/errors.hpp"
#include "rex/util.hpp"

namespace rex {

std::string to_string(ICMode mode) {
  switch (mode) {
    case ICMode::kIC: return "IC";
    case ICMode::kCIC: return "CIC";
    case ICMode::kCICByRelation: return "CIC_BY_RELATION";
  }
  return "IC";
}

ICMode ic_mode_from_string(const std::string& text) {
  if (text == "IC") return ICMode::kIC;
  if (text == "CIC") return ICMode::kCIC;
  if (text == "CIC_BY_RELATION") return ICMode::kCICByRelation;
  throw ConfigError("unknown IC mode '" + text + "'");
}

// --- embeddings --------------------------------------------------------------

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const KnowledgeGraph& kg) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open embedding file " + path.string());
  EmbeddingTable table;
  table.vectors.assign(kg.num_entities(), {});
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path.string(), line_no, "expected entity<TAB>values");
    const std::string label = line.substr(0, tab);
    const auto id = kg.find_entity(label);
    if (!id)
      throw ParseError(path.string(), line_no, "unknown entity '" + label + "'");
    std::istringstream values(line.substr(tab + 1));
    std::vector<double> vec;
    double x;
    while (values >> x) {
      if (!std::isfinite(x))
        throw ParseError(path.string(), line_no, "non-finite embedding value");
      vec.push_back(x);
    }
    if (vec.empty())
      throw ParseError(path.string(), line_no, "empty embedding vector");
    if (table.dim == 0) table.dim = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != table.dim)
      throw ParseError(path.string(), line_no, "inconsistent embedding dimension");
    table.vectors[*id] = std::move(vec);
  }
  for (int v = 0; v < kg.num_entities(); ++v) {
    if (table.vectors[v].empty())
      throw DataError("embedding file " + path.string() +
                      " is missing entity '" + kg.entity_label(v) + "'");
  }
  return table;
}

EmbeddingTable fallback_embeddings(const KnowledgeGraph& kg, int dim,
                                   std::uint64_t seed) {
  if (dim < 2) throw ContractError("embedding dimension must be >= 2");
  if (kg.num_entities() == 0) throw DataError("cannot embed an empty graph");

  // One shared random projection |R| -> dim.
  const int nr = kg.num_relations();
  Rng rng(derive_seed(seed, "fallback-embeddings"));
  std::vector<double> projection(static_cast<std::size_t>(dim) * nr);
  for (double& w : projection) w = rng.next_gaussian();

  EmbeddingTable table;
  table.dim = dim;
  table.vectors.assign(kg.num_entities(), {});
  std::vector<double> profile(nr);
  for (int v = 0; v < kg.num_entities(); ++v) {
    for (int r = 0; r < nr; ++r)
      profile[r] = static_cast<double>(kg.degree_by_relation(v, r));
    std::vector<double> vec(dim, 0.0);
    for (int d = 0; d < dim; ++d) {
      const double* row = projection.data() + static_cast<std::size_t>(d) * nr;
      double s = 0.0;
      for (int r = 0; r < nr; ++r) s += row[r] * profile[r];
      vec[d] = s;
    }
    table.vectors[v] = std::move(vec);
  }
  return table;
}

// --- k-means -----------------------------------------------------------------

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

ClusterAssignment kmeans_cluster(const EmbeddingTable& emb, int k,
                                 std::uint64_t seed, int max_iters,
                                 std::vector<double>* distortion_log) {
  const int n = static_cast<int>(emb.vectors.size());
  if (k < 1 || k > n)
    throw ContractError("cluster count k must lie in [1, number of entities]");

  Rng rng(derive_seed(seed, "kmeans"));
  std::vector<std::vector<double>> centers;
  centers.reserve(k);

  // k-means++ style seeding: weight by squared distance to the nearest
  // chosen center. A zero total weight means fewer distinct vectors than k.
  std::vector<double> best_d2(n, std::numeric_limits<double>::infinity());
  centers.push_back(emb.vectors[rng.next_below(n)]);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      best_d2[i] = std::min(best_d2[i], sq_dist(emb.vectors[i], centers.back()));
      total += best_d2[i];
    }
    if (total <= 0.0)
      throw DataError(
          "k-means cannot place " + std::to_string(k) +
          " distinct centers: fewer distinct vectors than clusters");
    const double pick = rng.next_double() * total;
    double acc = 0.0;
    int chosen = n - 1;
    for (int i = 0; i < n; ++i) {
      acc += best_d2[i];
      if (pick < acc) {
        chosen = i;
        break;
      }
    }
    centers.push_back(emb.vectors[chosen]);
  }

  std::vector<int> assign(n, -1);
  std::vector<int> counts(k, 0);
  const int dim = emb.dim;
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double distortion = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(emb.vectors[i], centers[c]);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      distortion += best;
      if (assign[i] != best_c) {
        assign[i] = best_c;
        changed = true;
      }
    }
    if (distortion_log != nullptr) distortion_log->push_back(distortion);
    if (!changed) break;

    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (int d = 0; d < dim; ++d) sums[assign[i]][d] += emb.vectors[i][d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      for (int d = 0; d < dim; ++d) centers[c][d] = sums[c][d] / counts[c];
    }
  }

  ClusterAssignment result;
  result.k = k;
  result.seed = seed;
  result.cluster_of = std::move(assign);
  return result;
}

void save_clusters(const ClusterAssignment& clusters, const KnowledgeGraph& kg,
                   const std::filesystem::path& path) {
  if (static_cast<int>(clusters.cluster_of.size()) != kg.num_entities())
    throw ContractError("cluster assignment does not cover the graph");
  std::ofstream out(path);
  if (!out) throw IOError("cannot write cluster file " + path.string());
  out << "# k=" << clusters.k << " seed=" << clusters.seed << "\n";
  for (int v = 0; v < kg.num_entities(); ++v)
    out << kg.entity_label(v) << '\t' << clusters.cluster_of[v] << '\n';
  if (!out) throw IOError("failed writing cluster file " + path.string());
}

ClusterAssignment load_clusters(const std::filesystem::path& path,
                                const KnowledgeGraph& kg) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open cluster file " + path.string());
  ClusterAssignment clusters;
  clusters.cluster_of.assign(kg.num_entities(), -1);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream header(line.substr(1));
      std::string token;
      while (header >> token) {
        if (token.rfind("k=", 0) == 0) clusters.k = std::stoi(token.substr(2));
        if (token.rfind("seed=", 0) == 0)
          clusters.seed = std::stoull(token.substr(5));
      }
      continue;
    }
    const auto fields = split(line, '\t');
    if (fields.size() != 2)
      throw ParseError(path.string(), line_no, "expected entity<TAB>cluster");
    const auto id = kg.find_entity(fields[0]);
    if (!id)
      throw ParseError(path.string(), line_no,
                       "unknown entity '" + fields[0] + "'");
    clusters.cluster_of[*id] = std::stoi(fields[1]);
  }
  for (int v = 0; v < kg.num_entities(); ++v) {
    if (clusters.cluster_of[v] < 0)
      throw DataError("cluster file " + path.string() + " is missing entity '" +
                      kg.entity_label(v) + "'");
  }
  if (clusters.k == 0)
    clusters.k =
        1 + *std::max_element(clusters.cluster_of.begin(), clusters.cluster_of.end());
  return clusters;
}

int default_cluster_count(const KnowledgeGraph& kg) {
  return std::max(1, static_cast<int>(std::ceil(0.1 * kg.num_entities())));
}

KnowledgeGraph build_clustered_graph(const KnowledgeGraph& kg,
                                     const ClusterAssignment& clusters) {
  if (static_cast<int>(clusters.cluster_of.size()) != kg.num_entities())
    throw DataError("cluster assignment does not cover every entity");
  for (int v = 0; v < kg.num_entities(); ++v) {
    if (clusters.cluster_of[v] < 0 || clusters.cluster_of[v] >= clusters.k)
      throw DataError("entity '" + kg.entity_label(v) +
                      "' has an out-of-range cluster id");
  }

  KnowledgeGraphBuilder builder;
  builder.seed_relations(kg.relations());
  for (int c = 0; c < clusters.k; ++c) builder.add_entity("C" + std::to_string(c));
  for (const Triple& t : kg.triples()) {
    builder.add_triple(Triple{clusters.cluster_of[t.subject], t.relation,
                              clusters.cluster_of[t.object]});
  }
  return builder.build();
}

// --- information content -----------------------------------------------------

double node_ic(const KnowledgeGraph& kg, int v) {
  const std::size_t deg = kg.degree(v);
  if (deg == 0)
    throw UndefinedICError("IC undefined for isolated entity '" +
                           kg.entity_label(v) + "'");
  return -std::log(static_cast<double>(deg) /
                   static_cast<double>(kg.num_triples()));
}

double clustered_node_ic(const KnowledgeGraph& kg_c,
                         const ClusterAssignment& clusters, int v) {
  if (v < 0 || v >= static_cast<int>(clusters.cluster_of.size()))
    throw LookupError("entity id " + std::to_string(v) +
                      " is not covered by the cluster assignment");
  return node_ic(kg_c, clusters.cluster_of[v]);
}

double clustered_node_ic_by_relation(const KnowledgeGraph& kg_c,
                                     const ClusterAssignment& clusters, int v,
                                     int r) {
  if (v < 0 || v >= static_cast<int>(clusters.cluster_of.size()))
    throw LookupError("entity id " + std::to_string(v) +
                      " is not covered by the cluster assignment");
  const std::size_t deg = kg_c.degree_by_relation(clusters.cluster_of[v], r);
  if (deg == 0)
    throw UndefinedICError("relation-conditioned IC undefined: cluster of '" +
                           std::to_string(v) + "' has no edges of relation " +
                           std::to_string(r));
  std::size_t n_r = 0;
  for (const Triple& t : kg_c.triples())
    if (t.relation == r) ++n_r;
  return -std::log(static_cast<double>(deg) / static_cast<double>(n_r));
}

// --- ICTable -----------------------------------------------------------------

bool ICTable::has(int v) const {
  return v >= 0 && v < static_cast<int>(node_defined.size()) &&
         node_defined[v] != 0;
}

bool ICTable::has(int v, int r) const {
  if (mode != ICMode::kCICByRelation) return has(v);
  return relation_raw.count(static_cast<std::uint64_t>(v) * num_relations_ + r) >
         0;
}

double ICTable::raw(int v) const {
  if (!has(v))
    throw UndefinedICError("no IC score stored for entity id " +
                           std::to_string(v));
  return node_raw[v];
}

double ICTable::raw(int v, int r) const {
  if (mode == ICMode::kCICByRelation && r >= 0) {
    const auto it =
        relation_raw.find(static_cast<std::uint64_t>(v) * num_relations_ + r);
    if (it != relation_raw.end()) return it->second;
    // zero relation-degree: fall back to the relation-agnostic score
  }
  return raw(v);
}

double ICTable::normalize(double raw_score) const {
  if (z <= 0.0) return 0.0;  // single-triple graphs have no score spread
  return std::clamp(raw_score / z, 0.0, 1.0);
}

ICTable compute_ic_table(const KnowledgeGraph& kg, ICMode mode,
                         const ClusterAssignment* clusters,
                         std::optional<double> z_override, int threads) {
  if (mode != ICMode::kIC && clusters == nullptr)
    throw ContractError("clustered IC modes require a cluster assignment");

  ICTable table;
  table.mode = mode;
  table.num_relations_ = kg.num_relations();
  table.node_raw.assign(kg.num_entities(), 0.0);
  table.node_defined.assign(kg.num_entities(), 0);

  if (mode == ICMode::kIC) {
    table.z = z_override.value_or(
        std::log(static_cast<double>(std::max<std::size_t>(kg.num_triples(), 1))));
    parallel_for(kg.num_entities(), threads, [&](std::size_t v) {
      if (kg.degree(static_cast<int>(v)) == 0) return;
      table.node_raw[v] = std::max(0.0, node_ic(kg, static_cast<int>(v)));
      table.node_defined[v] = 1;
    });
    return table;
  }

  const KnowledgeGraph kg_c = build_clustered_graph(kg, *clusters);
  table.k = clusters->k;
  table.seed = clusters->seed;
  table.z = z_override.value_or(std::log(
      static_cast<double>(std::max<std::size_t>(kg_c.num_triples(), 1))));

  // Relation-agnostic clustered scores double as the fallback for the
  // by-relation mode.
  parallel_for(kg.num_entities(), threads, [&](std::size_t v) {
    const int cluster = clusters->cluster_of[v];
    if (kg_c.degree(cluster) == 0) return;
    table.node_raw[v] = std::max(0.0, node_ic(kg_c, cluster));
    table.node_defined[v] = 1;
  });

  if (mode == ICMode::kCICByRelation) {
    std::vector<std::size_t> n_r(kg.num_relations(), 0);
    for (const Triple& t : kg_c.triples()) ++n_r[t.relation];

    // Per-cluster relation degrees, expanded per entity afterwards.
    std::vector<std::unordered_map<int, std::size_t>> cluster_rel_deg(
        clusters->k);
    for (const Triple& t : kg_c.triples()) {
      cluster_rel_deg[t.subject][t.relation] += 1;
      cluster_rel_deg[t.object][t.relation] += 1;
    }
    for (int v = 0; v < kg.num_entities(); ++v) {
      const int cluster = clusters->cluster_of[v];
      for (const auto& [r, deg] : cluster_rel_deg[cluster]) {
        const double raw = -std::log(static_cast<double>(deg) /
                                     static_cast<double>(n_r[r]));
        table.relation_raw[static_cast<std::uint64_t>(v) * kg.num_relations() +
                           r] = std::max(0.0, raw);
      }
    }
  }
  return table;
}

double edge_ic(const ICTable& table, const Triple& t) {
  const int r = table.mode == ICMode::kCICByRelation ? t.relation : -1;
  const double mean =
      0.5 * (table.raw(t.subject, r) + table.raw(t.object, r));
  if (table.z <= 0.0) return 0.0;
  return std::clamp(mean / table.z, 0.0, 1.0);
}

double path_relevance(const ICTable& table, const Path& p) {
  if (p.triples.empty())
    throw ContractError("path relevance is undefined for an empty path");
  double sum = 0.0;
  for (const Triple& t : p.triples) sum += edge_ic(table, t);
  return sum / static_cast<double>(p.triples.size());
}

void save_ic_table(const ICTable& table, const KnowledgeGraph& kg,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write IC table " + path.string());
  out.precision(17);
  out << "# mode=" << to_string(table.mode) << " Z=" << table.z
      << " k=" << table.k << " seed=" << table.seed << "\n";
  for (int v = 0; v < kg.num_entities(); ++v) {
    if (!table.has(v)) continue;
    out << kg.entity_label(v) << '\t' << table.node_raw[v] << '\t'
        << table.normalized(v) << '\n';
  }
  if (table.mode == ICMode::kCICByRelation) {
    for (int v = 0; v < kg.num_entities(); ++v) {
      for (int r = 0; r < kg.num_relations(); ++r) {
        const auto it = table.relation_raw.find(
            static_cast<std::uint64_t>(v) * kg.num_relations() + r);
        if (it == table.relation_raw.end()) continue;
        out << kg.entity_label(v) << '\t' << kg.relation_label(r) << '\t'
            << it->second << '\t' << table.normalized(v, r) << '\n';
      }
    }
  }
  if (!out) throw IOError("failed writing IC table " + path.string());
}

ICTable load_ic_table(const std::filesystem::path& path,
                      const KnowledgeGraph& kg) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open IC table " + path.string());
  ICTable table;
  table.num_relations_ = kg.num_relations();
  table.node_raw.assign(kg.num_entities(), 0.0);
  table.node_defined.assign(kg.num_entities(), 0);

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream header(line.substr(1));
      std::string token;
      while (header >> token) {
        if (token.rfind("mode=", 0) == 0)
          table.mode = ic_mode_from_string(token.substr(5));
        else if (token.rfind("Z=", 0) == 0)
          table.z = std::stod(token.substr(2));
        else if (token.rfind("k=", 0) == 0)
          table.k = std::stoi(token.substr(2));
        else if (token.rfind("seed=", 0) == 0)
          table.seed = std::stoull(token.substr(5));
      }
      header_seen = true;
      continue;
    }
    if (!header_seen)
      throw ParseError(path.string(), line_no, "missing IC table header");
    const auto fields = split(line, '\t');
    if (fields.size() == 3) {
      const int v = kg.entity_id(fields[0]);
      table.node_raw[v] = std::stod(fields[1]);
      table.node_defined[v] = 1;
    } else if (fields.size() == 4) {
      const int v = kg.entity_id(fields[0]);
      const int r = kg.relation_id(fields[1]);
      table.relation_raw[static_cast<std::uint64_t>(v) * kg.num_relations() +
                         r] = std::stod(fields[2]);
    } else {
      throw ParseError(path.string(), line_no,
                       "expected entity[<TAB>relation]<TAB>raw<TAB>normalized");
    }
  }
  return table;
}

}  // namespace rex
