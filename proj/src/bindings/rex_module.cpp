// Python bindings for the core operations: graph loading and indexing,
// information content, policy training and beam inference, explanation
// assembly, and ranking metrics.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rex/errors.hpp"
#include "rex/eval.hpp"
#include "rex/explanation.hpp"
#include "rex/ic.hpp"
#include "rex/kg.hpp"
#include "rex/pathfinder.hpp"
#include "rex/pipeline.hpp"

namespace py = pybind11;
using namespace rex;

namespace {

KnowledgeGraph graph_from_triples(
    const std::vector<std::array<std::string, 3>>& triples) {
  KnowledgeGraphBuilder builder;
  for (const auto& t : triples) builder.add_triple(t[0], t[1], t[2]);
  return builder.build();
}

std::vector<std::pair<int, int>> neighbors_list(const KnowledgeGraph& kg,
                                                int v) {
  std::vector<std::pair<int, int>> result;
  for (const RelEdge& e : kg.neighbors(v)) result.emplace_back(e.relation, e.entity);
  return result;
}

}  // namespace

PYBIND11_MODULE(_rex, m) {
  m.doc() = "Explanatory path finding over knowledge graphs";

  py::register_exception<Error>(m, "RexError");

  py::class_<Triple>(m, "Triple")
      .def(py::init<int, int, int>(), py::arg("subject"), py::arg("relation"),
           py::arg("object"))
      .def_readwrite("subject", &Triple::subject)
      .def_readwrite("relation", &Triple::relation)
      .def_readwrite("object", &Triple::object)
      .def("__repr__", [](const Triple& t) {
        return "Triple(" + std::to_string(t.subject) + ", " +
               std::to_string(t.relation) + ", " + std::to_string(t.object) +
               ")";
      });

  py::class_<Hypothesis>(m, "Hypothesis")
      .def(py::init<int, int, int>(), py::arg("subject"), py::arg("relation"),
           py::arg("object") = -1)
      .def_readwrite("subject", &Hypothesis::subject)
      .def_readwrite("relation", &Hypothesis::relation)
      .def_readwrite("object", &Hypothesis::object);

  py::class_<Path>(m, "Path")
      .def(py::init<>())
      .def_readwrite("source", &Path::source)
      .def_readwrite("target", &Path::target)
      .def_readwrite("triples", &Path::triples)
      .def("__len__", [](const Path& p) { return p.length(); });

  py::class_<KnowledgeGraph>(m, "KnowledgeGraph")
      .def_static("from_triples", &graph_from_triples, py::arg("triples"))
      .def("num_entities", &KnowledgeGraph::num_entities)
      .def("num_relations", &KnowledgeGraph::num_relations)
      .def("num_triples", &KnowledgeGraph::num_triples)
      .def("entity_label", &KnowledgeGraph::entity_label)
      .def("relation_label", &KnowledgeGraph::relation_label)
      .def("entity_id", &KnowledgeGraph::entity_id)
      .def("relation_id", &KnowledgeGraph::relation_id)
      .def("entity_type", &KnowledgeGraph::entity_type)
      .def("neighbors", &neighbors_list)
      .def("degree", &KnowledgeGraph::degree)
      .def("degree_by_relation", &KnowledgeGraph::degree_by_relation)
      .def("triples", [](const KnowledgeGraph& kg) { return kg.triples(); })
      .def("apply_entity_types",
           [](KnowledgeGraph& kg, const std::map<std::string, std::string>& m) {
             std::unordered_map<int, std::string> types;
             for (const auto& [label, tag] : m) types[kg.entity_id(label)] = tag;
             kg.apply_entity_types(types);
           });

  m.def("load_triples",
        [](const std::filesystem::path& p) { return load_triples(p); },
        py::arg("path"));
  m.def("save_triples", &save_triples, py::arg("kg"), py::arg("path"));
  m.def("add_inverse_edges", &add_inverse_edges, py::arg("kg"));
  m.def("load_split", &load_split, py::arg("path"), py::arg("kg"));

  py::enum_<ICMode>(m, "ICMode")
      .value("IC", ICMode::kIC)
      .value("CIC", ICMode::kCIC)
      .value("CIC_BY_RELATION", ICMode::kCICByRelation);

  py::class_<EmbeddingTable>(m, "EmbeddingTable")
      .def_readonly("dim", &EmbeddingTable::dim)
      .def_readonly("vectors", &EmbeddingTable::vectors);

  py::class_<ClusterAssignment>(m, "ClusterAssignment")
      .def(py::init<>())
      .def_readwrite("k", &ClusterAssignment::k)
      .def_readwrite("seed", &ClusterAssignment::seed)
      .def_readwrite("cluster_of", &ClusterAssignment::cluster_of);

  m.def("fallback_embeddings", &fallback_embeddings, py::arg("kg"),
        py::arg("dim"), py::arg("seed"));
  m.def(
      "kmeans_cluster",
      [](const EmbeddingTable& emb, int k, std::uint64_t seed, int max_iters) {
        return kmeans_cluster(emb, k, seed, max_iters);
      },
      py::arg("embeddings"), py::arg("k"), py::arg("seed"),
      py::arg("max_iters") = 50);
  m.def("build_clustered_graph", &build_clustered_graph, py::arg("kg"),
        py::arg("clusters"));
  m.def("node_ic", &node_ic, py::arg("kg"), py::arg("entity"));
  m.def("clustered_node_ic", &clustered_node_ic, py::arg("clustered_kg"),
        py::arg("clusters"), py::arg("entity"));
  m.def("clustered_node_ic_by_relation", &clustered_node_ic_by_relation,
        py::arg("clustered_kg"), py::arg("clusters"), py::arg("entity"),
        py::arg("relation"));

  py::class_<ICTable>(m, "ICTable")
      .def_readonly("mode", &ICTable::mode)
      .def_readonly("z", &ICTable::z)
      .def("raw", py::overload_cast<int>(&ICTable::raw, py::const_))
      .def("raw_by_relation",
           py::overload_cast<int, int>(&ICTable::raw, py::const_))
      .def("normalized",
           py::overload_cast<int>(&ICTable::normalized, py::const_));

  m.def(
      "compute_ic_table",
      [](const KnowledgeGraph& kg, ICMode mode, const ClusterAssignment* clusters,
         int threads) { return compute_ic_table(kg, mode, clusters, {}, threads); },
      py::arg("kg"), py::arg("mode"), py::arg("clusters") = nullptr,
      py::arg("threads") = 1);
  m.def("edge_ic", &edge_ic, py::arg("table"), py::arg("triple"));
  m.def("path_relevance", &path_relevance, py::arg("table"), py::arg("path"));

  py::class_<RewardConfig>(m, "RewardConfig")
      .def(py::init<>())
      .def_readwrite("use_relevance", &RewardConfig::use_relevance)
      .def_readwrite("use_early_stop", &RewardConfig::use_early_stop)
      .def_readwrite("max_len", &RewardConfig::max_len)
      .def_readwrite("rollouts", &RewardConfig::rollouts)
      .def_readwrite("baseline_decay", &RewardConfig::baseline_decay)
      .def_readwrite("entropy_weight", &RewardConfig::entropy_weight)
      .def_readwrite("learning_rate", &RewardConfig::learning_rate)
      .def_readwrite("seed", &RewardConfig::seed)
      .def_readwrite("epochs", &RewardConfig::epochs)
      .def_readwrite("batch_size", &RewardConfig::batch_size)
      .def_readwrite("entity_dim", &RewardConfig::entity_dim)
      .def_readwrite("relation_dim", &RewardConfig::relation_dim)
      .def_readwrite("hidden_dim", &RewardConfig::hidden_dim)
      .def_readwrite("mlp_hidden_dim", &RewardConfig::mlp_hidden_dim);

  py::class_<PolicyParameters>(m, "PolicyParameters")
      .def("parameter_count", &PolicyParameters::parameter_count);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("visited", &Trajectory::visited)
      .def_readonly("terminal", &Trajectory::terminal)
      .def_readonly("success", &Trajectory::success)
      .def_readonly("reward", &Trajectory::reward)
      .def("to_path", &Trajectory::to_path);

  py::class_<TrainLogRow>(m, "TrainLogRow")
      .def_readonly("epoch", &TrainLogRow::epoch)
      .def_readonly("batch", &TrainLogRow::batch)
      .def_readonly("mean_reward", &TrainLogRow::mean_reward)
      .def_readonly("mean_fidelity", &TrainLogRow::mean_fidelity)
      .def_readonly("mean_relevance", &TrainLogRow::mean_relevance)
      .def_readonly("loss", &TrainLogRow::loss);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("log", &TrainResult::log)
      .def_readonly("epochs_done", &TrainResult::epochs_done);

  m.def("init_policy", &init_policy, py::arg("kg"), py::arg("cfg"));
  m.def(
      "train",
      [](const KnowledgeGraph& kg, const std::vector<Hypothesis>& hyps,
         const RewardConfig& cfg, const ICTable& table, int threads) {
        return train(kg, hyps, cfg, table, threads);
      },
      py::arg("kg"), py::arg("hypotheses"), py::arg("cfg"), py::arg("table"),
      py::arg("threads") = 1);
  m.def("sample_rollouts", &sample_rollouts, py::arg("kg"), py::arg("params"),
        py::arg("hypothesis"), py::arg("cfg"), py::arg("seed"));

  py::class_<RankedTarget>(m, "RankedTarget")
      .def_readonly("entity", &RankedTarget::entity)
      .def_readonly("path", &RankedTarget::path)
      .def_readonly("log_prob", &RankedTarget::log_prob);

  m.def("beam_search_infer", &beam_search_infer, py::arg("kg"),
        py::arg("params"), py::arg("subject"), py::arg("relation"),
        py::arg("beam_width"), py::arg("max_len"));

  py::class_<Metapath>(m, "Metapath")
      .def_readonly("elements", &Metapath::elements)
      .def("__str__", [](const Metapath& mp) { return to_string(mp); });

  m.def("metapath_of", &metapath_of, py::arg("path"), py::arg("kg"));

  m.def(
      "hits_at_k",
      [](const std::vector<std::size_t>& ranks, std::size_t k) {
        return hits_at_k(ranks, k);
      },
      py::arg("ranks"), py::arg("k"));
  m.def(
      "mrr",
      [](const std::vector<std::size_t>& ranks) { return mrr(ranks); },
      py::arg("ranks"));

  m.attr("RANK_NOT_FOUND") = kRankNotFound;
  m.attr("__version__") = "0.1.0";
}
