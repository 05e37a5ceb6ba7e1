#pragma once

// Shared fixtures: random graph generators and independent brute-force
// oracles. Everything here recomputes results from first principles and
// must stay independent of the library's indexed implementations.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rex/ic.hpp"
#include "rex/kg.hpp"
#include "rex/util.hpp"

namespace rextest {

inline rex::KnowledgeGraph random_graph(std::uint64_t seed, int n_entities,
                                        int n_relations, int n_triples,
                                        bool allow_self_loops = false) {
  rex::Rng rng(seed);
  rex::KnowledgeGraphBuilder builder;
  for (int v = 0; v < n_entities; ++v) builder.add_entity("e" + std::to_string(v));
  for (int r = 0; r < n_relations; ++r)
    builder.add_relation("r" + std::to_string(r));
  for (int i = 0; i < n_triples; ++i) {
    const int s = static_cast<int>(rng.next_below(n_entities));
    const int r = static_cast<int>(rng.next_below(n_relations));
    int o = static_cast<int>(rng.next_below(n_entities));
    if (!allow_self_loops) {
      while (o == s) o = static_cast<int>(rng.next_below(n_entities));
    }
    builder.add_triple(rex::Triple{s, r, o});
  }
  return builder.build();
}

inline rex::ClusterAssignment random_clusters(std::uint64_t seed,
                                              const rex::KnowledgeGraph& kg,
                                              int k) {
  rex::Rng rng(seed);
  rex::ClusterAssignment clusters;
  clusters.k = k;
  clusters.seed = seed;
  clusters.cluster_of.resize(kg.num_entities());
  for (int v = 0; v < kg.num_entities(); ++v)
    clusters.cluster_of[v] = static_cast<int>(rng.next_below(k));
  return clusters;
}

inline rex::ClusterAssignment singleton_clusters(const rex::KnowledgeGraph& kg) {
  rex::ClusterAssignment clusters;
  clusters.k = kg.num_entities();
  clusters.cluster_of.resize(kg.num_entities());
  for (int v = 0; v < kg.num_entities(); ++v) clusters.cluster_of[v] = v;
  return clusters;
}

// --- counting oracles (brute force over the raw triple list) -----------------

inline std::size_t oracle_degree(const rex::KnowledgeGraph& kg, int v) {
  std::size_t count = 0;
  for (const rex::Triple& t : kg.triples()) {
    if (t.subject == v) ++count;
    if (t.object == v) ++count;
  }
  return count;
}

inline std::size_t oracle_degree_by_relation(const rex::KnowledgeGraph& kg,
                                             int v, int r) {
  std::size_t count = 0;
  for (const rex::Triple& t : kg.triples()) {
    if (t.relation != r) continue;
    if (t.subject == v) ++count;
    if (t.object == v) ++count;
  }
  return count;
}

inline double oracle_node_ic(const rex::KnowledgeGraph& kg, int v) {
  return -std::log(static_cast<double>(oracle_degree(kg, v)) /
                   static_cast<double>(kg.num_triples()));
}

/// Direct set comprehension of the clustered triple set.
inline std::set<rex::Triple> oracle_clustered_triples(
    const rex::KnowledgeGraph& kg, const rex::ClusterAssignment& clusters) {
  std::set<rex::Triple> result;
  for (const rex::Triple& t : kg.triples()) {
    result.insert(rex::Triple{clusters.cluster_of[t.subject], t.relation,
                              clusters.cluster_of[t.object]});
  }
  return result;
}

// --- temp files ---------------------------------------------------------------

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    dir_ = std::filesystem::temp_directory_path() /
           ("rex_test_" + tag + "_" + std::to_string(++counter) + "_" +
            std::to_string(static_cast<std::uint64_t>(
                reinterpret_cast<std::uintptr_t>(this))));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path path(const std::string& name) const {
    return dir_ / name;
  }

 private:
  std::filesystem::path dir_;
};

inline std::filesystem::path write_file(const TempDir& dir,
                                        const std::string& name,
                                        const std::string& content) {
  const auto p = dir.path(name);
  std::ofstream out(p);
  out << content;
  return p;
}

}  // namespace rextest
