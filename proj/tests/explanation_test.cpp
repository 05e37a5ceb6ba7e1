#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>
#include <set>

#include "rex/errors.hpp"
#include "rex/explanation.hpp"
#include "support/test_support.hpp"

using namespace rex;
using rextest::TempDir;
using rextest::write_file;

namespace {

KnowledgeGraph typed_graph() {
  KnowledgeGraphBuilder builder;
  builder.add_triple("asp", "binds", "geneA");
  builder.add_triple("geneA", "assoc", "flu");
  builder.add_triple("ibu", "binds", "geneB");
  builder.add_triple("geneB", "assoc", "flu");
  builder.add_triple("asp", "treats", "flu");
  KnowledgeGraph kg = builder.build();
  std::unordered_map<int, std::string> types;
  types[kg.entity_id("asp")] = "Compound";
  types[kg.entity_id("ibu")] = "Compound";
  types[kg.entity_id("geneA")] = "Gene";
  types[kg.entity_id("geneB")] = "Gene";
  types[kg.entity_id("flu")] = "Disease";
  kg.apply_entity_types(types);
  return kg;
}

Path path_of(const KnowledgeGraph& kg,
             const std::vector<std::array<std::string, 3>>& triples) {
  Path p;
  p.source = kg.entity_id(triples.front()[0]);
  p.target = kg.entity_id(triples.back()[2]);
  for (const auto& t : triples)
    p.triples.push_back(Triple{kg.entity_id(t[0]), kg.relation_id(t[1]),
                               kg.entity_id(t[2])});
  return p;
}

/// Random DAG: class c can only point to classes with smaller index, so
/// acyclicity holds by construction.
struct RandomOntology {
  TempDir dir{"ont"};
  std::filesystem::path classes_path;
  std::filesystem::path annotations_path;
};

}  // namespace

// --- metapaths ------------------------------------------------------------------

TEST_CASE("metapath_of alternates entity types and relation labels") {
  const KnowledgeGraph kg = typed_graph();
  const Path p = path_of(kg, {{"asp", "binds", "geneA"},
                              {"geneA", "assoc", "flu"}});
  const Metapath mp = metapath_of(p, kg);
  CHECK(mp.elements ==
        std::vector<std::string>{"Compound", "binds", "Gene", "assoc",
                                 "Disease"});
}

TEST_CASE("single-edge paths give three-element metapaths") {
  const KnowledgeGraph kg = typed_graph();
  const Path p = path_of(kg, {{"asp", "treats", "flu"}});
  CHECK(metapath_of(p, kg).elements.size() == 3);
}

TEST_CASE("paths over different entities of equal types share a metapath") {
  const KnowledgeGraph kg = typed_graph();
  const Path p1 = path_of(kg, {{"asp", "binds", "geneA"},
                               {"geneA", "assoc", "flu"}});
  const Path p2 = path_of(kg, {{"ibu", "binds", "geneB"},
                               {"geneB", "assoc", "flu"}});
  CHECK(metapath_of(p1, kg) == metapath_of(p2, kg));
}

TEST_CASE("metapaths round trip through the pipe-separated text form") {
  const KnowledgeGraph kg = typed_graph();
  const Metapath mp = metapath_of(
      path_of(kg, {{"asp", "binds", "geneA"}, {"geneA", "assoc", "flu"}}), kg);
  CHECK(metapath_from_string(to_string(mp)) == mp);
  CHECK(to_string(mp) == "Compound|binds|Gene|assoc|Disease");
  CHECK_THROWS_AS(metapath_from_string("Compound|binds"), DataError);
}

// --- group_and_select --------------------------------------------------------------

TEST_CASE("the higher-relevance path wins within a metapath group") {
  const KnowledgeGraph kg = typed_graph();
  const ICTable table = compute_ic_table(kg, ICMode::kIC);
  const Path p1 = path_of(kg, {{"asp", "binds", "geneA"},
                               {"geneA", "assoc", "flu"}});
  const Path p2 = path_of(kg, {{"ibu", "binds", "geneB"},
                               {"geneB", "assoc", "flu"}});
  const std::vector<Path> paths{p1, p2};
  const auto selected = group_and_select(paths, table, kg);
  REQUIRE(selected.size() == 1);
  const double r1 = path_relevance(table, p1);
  const double r2 = path_relevance(table, p2);
  CHECK(selected[0].relevance == doctest::Approx(std::max(r1, r2)));
}

TEST_CASE("distinct metapaths are all retained") {
  const KnowledgeGraph kg = typed_graph();
  const ICTable table = compute_ic_table(kg, ICMode::kIC);
  const std::vector<Path> paths{
      path_of(kg, {{"asp", "binds", "geneA"}, {"geneA", "assoc", "flu"}}),
      path_of(kg, {{"asp", "treats", "flu"}})};
  CHECK(group_and_select(paths, table, kg).size() == 2);
}

TEST_CASE("selection equals the brute-force per-group argmax on random paths") {
  const KnowledgeGraph kg = rextest::random_graph(51, 14, 3, 70);
  const ICTable table = compute_ic_table(kg, ICMode::kIC);

  // Random walks of length 1-3 as candidate paths.
  Rng rng(53);
  std::vector<Path> paths;
  while (paths.size() < 20) {
    Path p;
    int current = static_cast<int>(rng.next_below(kg.num_entities()));
    p.source = current;
    const int want = 1 + static_cast<int>(rng.next_below(3));
    std::set<int> seen{current};
    for (int step = 0; step < want; ++step) {
      const auto edges = kg.neighbors(current);
      if (edges.empty()) break;
      const RelEdge e = edges[rng.next_below(edges.size())];
      if (seen.count(e.entity)) break;
      seen.insert(e.entity);
      p.triples.push_back(Triple{current, e.relation, e.entity});
      current = e.entity;
    }
    if (p.triples.empty()) continue;
    p.target = current;
    paths.push_back(p);
  }

  const auto selected = group_and_select(paths, table, kg);

  // Oracle: exhaustive per-group max (with lexicographic tie break).
  std::map<Metapath, Path> oracle;
  for (const Path& p : paths) {
    const Metapath mp = metapath_of(p, kg);
    const auto it = oracle.find(mp);
    if (it == oracle.end()) {
      oracle.emplace(mp, p);
      continue;
    }
    const double existing = path_relevance(table, it->second);
    const double candidate = path_relevance(table, p);
    if (candidate > existing ||
        (candidate == existing &&
         entity_sequence(p) < entity_sequence(it->second)))
      it->second = p;
  }
  REQUIRE(selected.size() == oracle.size());
  for (const SelectedPath& sp : selected) {
    CHECK(oracle.at(sp.metapath).triples == sp.path.triples);
    for (const Path& p : paths) {
      if (metapath_of(p, kg) == sp.metapath)
        CHECK(sp.relevance >= path_relevance(table, p) - 1e-15);
    }
  }
}

// --- ontology ------------------------------------------------------------------------

TEST_CASE("a two-level tree loads with annotations") {
  TempDir dir("ont");
  const KnowledgeGraph kg = typed_graph();
  const auto classes = write_file(dir, "classes.tsv",
                                  "Analgesic\tDrugClass\n"
                                  "Antiviral\tDrugClass\n");
  const auto annotations = write_file(dir, "ann.tsv",
                                      "asp\tAnalgesic\n"
                                      "ibu\tAnalgesic\n");
  const OntologyHierarchy ont = load_ontology(classes, annotations, kg);
  CHECK(ont.num_classes() == 3);
  CHECK(ont.annotations(kg.entity_id("asp")).size() == 1);
  CHECK(ont.annotations(kg.entity_id("flu")).empty());
}

TEST_CASE("self-subclass lines are rejected as cycles") {
  TempDir dir("ont");
  const KnowledgeGraph kg = typed_graph();
  const auto classes = write_file(dir, "classes.tsv", "A\tA\n");
  const auto annotations = write_file(dir, "ann.tsv", "");
  CHECK_THROWS_AS(load_ontology(classes, annotations, kg), DataError);
}

TEST_CASE("longer subclass cycles are rejected with a member named") {
  TempDir dir("ont");
  const KnowledgeGraph kg = typed_graph();
  const auto classes = write_file(dir, "classes.tsv", "A\tB\nB\tC\nC\tA\n");
  const auto annotations = write_file(dir, "ann.tsv", "");
  CHECK_THROWS_WITH_AS(load_ontology(classes, annotations, kg),
                       doctest::Contains("cycle"), DataError);
}

TEST_CASE("annotations to unknown classes are load errors") {
  TempDir dir("ont");
  const KnowledgeGraph kg = typed_graph();
  const auto classes = write_file(dir, "classes.tsv", "A\tB\n");
  const auto annotations = write_file(dir, "ann.tsv", "asp\tNoSuchClass\n");
  CHECK_THROWS_AS(load_ontology(classes, annotations, kg), ParseError);
}

// --- lca -----------------------------------------------------------------------------

namespace {

struct OntFixture {
  TempDir dir{"lca"};
  KnowledgeGraph kg = typed_graph();
  OntologyHierarchy ont;

  OntFixture(const std::string& classes, const std::string& annotations) {
    ont = load_ontology(write_file(dir, "c.tsv", classes),
                        write_file(dir, "a.tsv", annotations), kg);
  }
};

}  // namespace

TEST_CASE("siblings meet at their parent") {
  OntFixture f("Analgesic\tDrug\nAntipyretic\tDrug\n",
               "asp\tAnalgesic\nibu\tAntipyretic\n");
  const auto result = lca(f.ont, f.kg.entity_id("asp"), f.kg.entity_id("ibu"));
  REQUIRE(result.size() == 1);
  CHECK(f.ont.class_label(*result.begin()) == "Drug");
}

TEST_CASE("an entity annotated to an ancestor of the other's class is the meet") {
  OntFixture f("Analgesic\tDrug\n", "asp\tDrug\nibu\tAnalgesic\n");
  const auto result = lca(f.ont, f.kg.entity_id("asp"), f.kg.entity_id("ibu"));
  REQUIRE(result.size() == 1);
  CHECK(f.ont.class_label(*result.begin()) == "Drug");
}

TEST_CASE("unannotated entities yield an empty lca") {
  OntFixture f("Analgesic\tDrug\n", "asp\tAnalgesic\n");
  CHECK(lca(f.ont, f.kg.entity_id("asp"), f.kg.entity_id("flu")).empty());
}

TEST_CASE("lca equals the ancestor-intersection + minimality oracle on random DAGs") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    const int n_classes = 10 + static_cast<int>(rng.next_below(40));

    // Edges only point to smaller indices, so the graph is a DAG. Only
    // classes appearing in an edge line exist in the loaded hierarchy.
    std::string class_lines;
    std::vector<std::vector<int>> parents(n_classes);
    std::set<int> known_classes;
    for (int c = 1; c < n_classes; ++c) {
      const int n_parents = static_cast<int>(rng.next_below(3));
      std::set<int> chosen;
      for (int i = 0; i < n_parents; ++i)
        chosen.insert(static_cast<int>(rng.next_below(c)));
      for (const int parent : chosen) {
        parents[c].push_back(parent);
        known_classes.insert(c);
        known_classes.insert(parent);
        class_lines += "K" + std::to_string(c) + "\tK" + std::to_string(parent) +
                       "\n";
      }
    }
    if (class_lines.empty()) {
      class_lines = "K1\tK0\n";
      parents[1].push_back(0);
      known_classes = {0, 1};
    }
    const std::vector<int> class_pool(known_classes.begin(),
                                      known_classes.end());

    KnowledgeGraphBuilder builder;
    builder.add_triple("e1", "r", "e2");
    KnowledgeGraph kg = builder.build();

    std::string ann_lines;
    std::vector<std::vector<int>> entity_classes(2);
    for (int e = 0; e < 2; ++e) {
      const int n_ann = 1 + static_cast<int>(rng.next_below(3));
      std::set<int> chosen;
      for (int i = 0; i < n_ann; ++i)
        chosen.insert(class_pool[rng.next_below(class_pool.size())]);
      for (const int cls : chosen) {
        entity_classes[e].push_back(cls);
        ann_lines += std::string(e == 0 ? "e1" : "e2") + "\tK" +
                     std::to_string(cls) + "\n";
      }
    }

    TempDir dir("dag");
    const OntologyHierarchy ont =
        load_ontology(write_file(dir, "c.tsv", class_lines),
                      write_file(dir, "a.tsv", ann_lines), kg);

    // Oracle: climb the raw parent lists (reflexive-transitive), intersect,
    // then keep only classes with no common-ancestor descendant.
    const auto climb = [&](const std::vector<int>& start) {
      std::set<int> anc;
      std::vector<int> stack(start.begin(), start.end());
      while (!stack.empty()) {
        int c = stack.back();
        stack.pop_back();
        const auto cls = ont.find_class("K" + std::to_string(c));
        REQUIRE(cls.has_value());
        if (!anc.insert(c).second) continue;
        for (const int p : parents[c]) stack.push_back(p);
      }
      return anc;
    };
    const std::set<int> anc1 = climb(entity_classes[0]);
    const std::set<int> anc2 = climb(entity_classes[1]);
    std::set<int> common;
    std::set_intersection(anc1.begin(), anc1.end(), anc2.begin(), anc2.end(),
                          std::inserter(common, common.begin()));
    std::set<std::string> expected;
    for (const int c : common) {
      bool minimal = true;
      for (const int other : common) {
        if (other == c) continue;
        // is c an ancestor of other?
        std::set<int> seen;
        std::vector<int> stack{other};
        while (!stack.empty() && minimal) {
          const int cur = stack.back();
          stack.pop_back();
          if (!seen.insert(cur).second) continue;
          for (const int p : parents[cur]) {
            if (p == c) minimal = false;
            stack.push_back(p);
          }
        }
        if (!minimal) break;
      }
      if (minimal) expected.insert("K" + std::to_string(c));
    }

    std::set<std::string> actual;
    for (const int c : lca(ont, kg.entity_id("e1"), kg.entity_id("e2")))
      actual.insert(ont.class_label(c));
    CHECK(actual == expected);
  }
}

TEST_CASE("no lca result is an ancestor of another") {
  OntFixture f(
      "Analgesic\tDrug\nAnalgesic\tAntiInflammatory\n"
      "Antipyretic\tDrug\nAntipyretic\tAntiInflammatory\n",
      "asp\tAnalgesic\nibu\tAntipyretic\n");
  const auto result = lca(f.ont, f.kg.entity_id("asp"), f.kg.entity_id("ibu"));
  CHECK(result.size() == 2);  // Drug and AntiInflammatory are incomparable
  for (const int a : result) {
    for (const int b : result) {
      if (a == b) continue;
      const auto anc = f.ont.ancestors(b);
      CHECK(anc.count(a) == 0);
    }
  }
}

// --- build_explanation ----------------------------------------------------------------

TEST_CASE("without annotations the subgraph is exactly the path union") {
  const KnowledgeGraph kg = typed_graph();
  const ICTable table = compute_ic_table(kg, ICMode::kIC);
  TempDir dir("exp");
  const OntologyHierarchy ont =
      load_ontology(write_file(dir, "c.tsv", "A\tB\n"),
                    write_file(dir, "a.tsv", ""), kg);

  const Path p = path_of(kg, {{"asp", "binds", "geneA"},
                              {"geneA", "assoc", "flu"}});
  const std::vector<Path> paths{p};
  const auto selected = group_and_select(paths, table, kg);
  const Hypothesis h{kg.entity_id("asp"), kg.relation_id("treats"),
                     kg.entity_id("flu")};
  const ExplanationSubgraph g = build_explanation(h, selected, ont);
  CHECK(g.triples == p.triples);
  CHECK(g.class_ids.empty());
  CHECK(g.type_axioms.empty());
}

TEST_CASE("sibling-annotated consecutive entities pull in their parent class") {
  const KnowledgeGraph kg = typed_graph();
  const ICTable table = compute_ic_table(kg, ICMode::kIC);
  TempDir dir("exp");
  const OntologyHierarchy ont = load_ontology(
      write_file(dir, "c.tsv", "DrugLike\tChemical\nProteinLike\tChemical\n"),
      write_file(dir, "a.tsv", "asp\tDrugLike\ngeneA\tProteinLike\n"), kg);

  const Path p = path_of(kg, {{"asp", "binds", "geneA"}});
  const std::vector<Path> paths{p};
  const Hypothesis h{kg.entity_id("asp"), kg.relation_id("treats"),
                     kg.entity_id("flu")};
  const ExplanationSubgraph g =
      build_explanation(h, group_and_select(paths, table, kg), ont);
  REQUIRE(g.class_ids.size() == 1);
  CHECK(ont.class_label(g.class_ids[0]) == "Chemical");
  CHECK(g.type_axioms.size() == 2);  // both endpoints typed to the parent
}

TEST_CASE("a merged multi-path subgraph equals the hand-computed union") {
  const KnowledgeGraph kg = typed_graph();
  const ICTable table = compute_ic_table(kg, ICMode::kIC);
  TempDir dir("exp");
  const OntologyHierarchy ont = load_ontology(
      write_file(dir, "c.tsv", "A\tB\n"), write_file(dir, "a.tsv", ""), kg);

  const Path p1 = path_of(kg, {{"asp", "binds", "geneA"},
                               {"geneA", "assoc", "flu"}});
  const Path p2 = path_of(kg, {{"asp", "treats", "flu"}});
  const Path p3 = path_of(kg, {{"ibu", "binds", "geneB"},
                               {"geneB", "assoc", "flu"}});
  const std::vector<Path> paths{p1, p2, p3};
  const Hypothesis h{kg.entity_id("asp"), kg.relation_id("treats"),
                     kg.entity_id("flu")};
  const ExplanationSubgraph g =
      build_explanation(h, group_and_select(paths, table, kg), ont);

  std::set<Triple> expected(p2.triples.begin(), p2.triples.end());
  // p1 and p3 share a metapath; exactly one of them is selected.
  const bool p1_selected =
      std::find_if(g.paths.begin(), g.paths.end(), [&](const SelectedPath& sp) {
        return sp.path.triples == p1.triples;
      }) != g.paths.end();
  const Path& gene_path = p1_selected ? p1 : p3;
  expected.insert(gene_path.triples.begin(), gene_path.triples.end());
  CHECK(std::set<Triple>(g.triples.begin(), g.triples.end()) == expected);
}

TEST_CASE("adding a path never removes triples") {
  const KnowledgeGraph kg = typed_graph();
  const ICTable table = compute_ic_table(kg, ICMode::kIC);
  TempDir dir("exp");
  const OntologyHierarchy ont = load_ontology(
      write_file(dir, "c.tsv", "A\tB\n"), write_file(dir, "a.tsv", ""), kg);
  const Hypothesis h{kg.entity_id("asp"), kg.relation_id("treats"),
                     kg.entity_id("flu")};

  const Path p1 = path_of(kg, {{"asp", "binds", "geneA"},
                               {"geneA", "assoc", "flu"}});
  const Path p2 = path_of(kg, {{"asp", "treats", "flu"}});
  const std::vector<Path> one{p1};
  const std::vector<Path> two{p1, p2};
  const ExplanationSubgraph small =
      build_explanation(h, group_and_select(one, table, kg), ont);
  const ExplanationSubgraph large =
      build_explanation(h, group_and_select(two, table, kg), ont);
  for (const Triple& t : small.triples) {
    CHECK(std::find(large.triples.begin(), large.triples.end(), t) !=
          large.triples.end());
  }
}

// --- export ---------------------------------------------------------------------------

TEST_CASE("an empty explanation document is valid and round trips") {
  TempDir dir("exp");
  const KnowledgeGraph kg = typed_graph();
  const Hypothesis h{kg.entity_id("asp"), kg.relation_id("treats"),
                     kg.entity_id("flu")};
  const ExplanationDocument doc = make_empty_document(h, kg);
  CHECK(doc.status == "no explanation found");
  export_explanation(doc, ExplanationFormat::kJson, dir.path("empty.json"));
  CHECK(import_explanation_json(dir.path("empty.json")) == doc);
}

TEST_CASE("JSON export/import preserves the document exactly") {
  const KnowledgeGraph kg = typed_graph();
  const ICTable table = compute_ic_table(kg, ICMode::kIC);
  TempDir dir("exp");
  const OntologyHierarchy ont = load_ontology(
      write_file(dir, "c.tsv", "DrugLike\tChemical\nProteinLike\tChemical\n"),
      write_file(dir, "a.tsv", "asp\tDrugLike\ngeneA\tProteinLike\n"), kg);

  const Path p = path_of(kg, {{"asp", "binds", "geneA"},
                              {"geneA", "assoc", "flu"}});
  const std::vector<Path> paths{p};
  const Hypothesis h{kg.entity_id("asp"), kg.relation_id("treats"),
                     kg.entity_id("flu")};
  const ExplanationSubgraph g =
      build_explanation(h, group_and_select(paths, table, kg), ont);
  const ExplanationDocument doc = to_document(g, kg, ont);
  export_explanation(doc, ExplanationFormat::kJson, dir.path("doc.json"));
  CHECK(import_explanation_json(dir.path("doc.json")) == doc);
}

TEST_CASE("DOT output is structurally well formed with styled class nodes") {
  const KnowledgeGraph kg = typed_graph();
  const ICTable table = compute_ic_table(kg, ICMode::kIC);
  TempDir dir("exp");
  const OntologyHierarchy ont = load_ontology(
      write_file(dir, "c.tsv", "DrugLike\tChemical\nProteinLike\tChemical\n"),
      write_file(dir, "a.tsv", "asp\tDrugLike\ngeneA\tProteinLike\n"), kg);
  const Path p = path_of(kg, {{"asp", "binds", "geneA"}});
  const std::vector<Path> paths{p};
  const Hypothesis h{kg.entity_id("asp"), kg.relation_id("treats"),
                     kg.entity_id("flu")};
  const ExplanationDocument doc = to_document(
      build_explanation(h, group_and_select(paths, table, kg), ont), kg, ont);

  const std::string dot = explanation_to_dot(doc);
  CHECK(dot.rfind("digraph", 0) == 0);
  CHECK(std::count(dot.begin(), dot.end(), '{') ==
        std::count(dot.begin(), dot.end(), '}'));
  CHECK(dot.find("->") != std::string::npos);
  CHECK(dot.find("shape=box") != std::string::npos);  // class node styling
  CHECK(dot.find("Chemical") != std::string::npos);
}
