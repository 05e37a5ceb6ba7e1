#include "rex/explanation.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rex/errors.hpp"
#include "rex/util.hpp"

namespace rex {

// --- metapaths -----------------------------------------------------------------

std::string to_string(const Metapath& mp) {
  std::string text;
  for (std::size_t i = 0; i < mp.elements.size(); ++i) {
    if (i > 0) text += '|';
    text += mp.elements[i];
  }
  return text;
}

Metapath metapath_from_string(const std::string& line) {
  Metapath mp;
  mp.elements = split(line, '|');
  if (mp.elements.size() < 3 || mp.elements.size() % 2 == 0)
    throw DataError("malformed metapath '" + line +
                    "': expected type(|relation|type)+");
  return mp;
}

Metapath metapath_of(const Path& p, const KnowledgeGraph& kg) {
  Metapath mp;
  mp.elements.reserve(2 * p.triples.size() + 1);
  mp.elements.push_back(kg.entity_type(p.source));
  for (const Triple& t : p.triples) {
    mp.elements.push_back(kg.relation_label(t.relation));
    mp.elements.push_back(kg.entity_type(t.object));
  }
  return mp;
}

std::vector<Metapath> load_metapaths(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open metapath file " + path.string());
  std::vector<Metapath> result;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    result.push_back(metapath_from_string(line));
  }
  return result;
}

void save_metapaths(std::span<const Metapath> metapaths,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write metapath file " + path.string());
  for (const Metapath& mp : metapaths) out << to_string(mp) << '\n';
  if (!out) throw IOError("failed writing metapath file " + path.string());
}

// --- grouping ------------------------------------------------------------------

std::vector<SelectedPath> group_and_select(std::span<const Path> paths,
                                           const ICTable& table,
                                           const KnowledgeGraph& kg) {
  if (paths.empty())
    throw ContractError("group_and_select requires at least one path");

  std::map<Metapath, SelectedPath> best;
  for (const Path& p : paths) {
    Metapath mp = metapath_of(p, kg);
    const double relevance = path_relevance(table, p);
    const auto it = best.find(mp);
    if (it == best.end()) {
      best.emplace(std::move(mp), SelectedPath{{}, p, relevance});
      continue;
    }
    SelectedPath& current = it->second;
    const bool better =
        relevance > current.relevance ||
        (relevance == current.relevance &&
         entity_sequence(p) < entity_sequence(current.path));
    if (better) current = SelectedPath{{}, p, relevance};
  }

  std::vector<SelectedPath> selected;
  selected.reserve(best.size());
  for (auto& [mp, sp] : best) {
    sp.metapath = mp;
    selected.push_back(std::move(sp));
  }
  return selected;
}

// --- ontology ------------------------------------------------------------------

const std::string& OntologyHierarchy::class_label(int c) const {
  if (c < 0 || c >= num_classes())
    throw LookupError("unknown ontology class id " + std::to_string(c));
  return class_labels_[c];
}

std::optional<int> OntologyHierarchy::find_class(const std::string& label) const {
  const auto it = class_index_.find(label);
  if (it == class_index_.end()) return std::nullopt;
  return it->second;
}

const std::vector<int>& OntologyHierarchy::parents(int c) const {
  if (c < 0 || c >= num_classes())
    throw LookupError("unknown ontology class id " + std::to_string(c));
  return parents_[c];
}

const std::vector<int>& OntologyHierarchy::annotations(int entity) const {
  static const std::vector<int> empty;
  const auto it = annotations_.find(entity);
  return it == annotations_.end() ? empty : it->second;
}

bool OntologyHierarchy::is_direct_subclass(int child, int parent) const {
  const auto& ps = parents(child);
  return std::find(ps.begin(), ps.end(), parent) != ps.end();
}

std::set<int> OntologyHierarchy::ancestors(int c) const {
  std::set<int> result;
  std::vector<int> stack{c};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    if (!result.insert(cur).second) continue;
    for (const int parent : parents(cur)) stack.push_back(parent);
  }
  return result;
}

std::set<int> OntologyHierarchy::entity_ancestors(int entity) const {
  std::set<int> result;
  for (const int c : annotations(entity)) {
    const auto anc = ancestors(c);
    result.insert(anc.begin(), anc.end());
  }
  return result;
}

OntologyHierarchy load_ontology(const std::filesystem::path& class_edges_path,
                                const std::filesystem::path& annotations_path,
                                const KnowledgeGraph& kg) {
  OntologyHierarchy ont;
  const auto intern = [&ont](const std::string& label) {
    const auto it = ont.class_index_.find(label);
    if (it != ont.class_index_.end()) return it->second;
    const int id = static_cast<int>(ont.class_labels_.size());
    ont.class_index_.emplace(label, id);
    ont.class_labels_.push_back(label);
    ont.parents_.emplace_back();
    return id;
  };

  {
    std::ifstream in(class_edges_path);
    if (!in)
      throw IOError("cannot open class edge file " + class_edges_path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto fields = split(line, '\t');
      if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
        throw ParseError(class_edges_path.string(), line_no,
                         "expected child<TAB>parent");
      const int child = intern(fields[0]);
      const int parent = intern(fields[1]);
      auto& ps = ont.parents_[child];
      if (std::find(ps.begin(), ps.end(), parent) == ps.end())
        ps.push_back(parent);
    }
  }

  // Cycle check: DFS with colors; report a member of the offending cycle.
  {
    std::vector<int> color(ont.num_classes(), 0);  // 0 white, 1 gray, 2 black
    std::vector<int> stack;
    for (int start = 0; start < ont.num_classes(); ++start) {
      if (color[start] != 0) continue;
      stack.push_back(start);
      while (!stack.empty()) {
        const int c = stack.back();
        if (color[c] == 0) {
          color[c] = 1;
          for (const int parent : ont.parents_[c]) {
            if (color[parent] == 1)
              throw DataError("subclass hierarchy contains a cycle through '" +
                              ont.class_labels_[parent] + "'");
            if (color[parent] == 0) stack.push_back(parent);
          }
        } else {
          color[c] = 2;
          stack.pop_back();
        }
      }
    }
  }

  {
    std::ifstream in(annotations_path);
    if (!in)
      throw IOError("cannot open annotation file " + annotations_path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto fields = split(line, '\t');
      if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
        throw ParseError(annotations_path.string(), line_no,
                         "expected entity<TAB>class");
      const auto cls = ont.find_class(fields[1]);
      if (!cls)
        throw ParseError(annotations_path.string(), line_no,
                         "annotation references unknown class '" + fields[1] +
                             "'");
      const auto entity = kg.find_entity(fields[0]);
      if (!entity) {
        log_warn("annotation for unknown entity '" + fields[0] + "' skipped");
        continue;
      }
      auto& anns = ont.annotations_[*entity];
      if (std::find(anns.begin(), anns.end(), *cls) == anns.end())
        anns.push_back(*cls);
    }
  }
  return ont;
}

std::set<int> lca(const OntologyHierarchy& ont, int e1, int e2) {
  const std::set<int> anc1 = ont.entity_ancestors(e1);
  if (anc1.empty()) return {};
  const std::set<int> anc2 = ont.entity_ancestors(e2);
  if (anc2.empty()) return {};

  std::vector<int> common;
  std::set_intersection(anc1.begin(), anc1.end(), anc2.begin(), anc2.end(),
                        std::back_inserter(common));

  // Keep the minimal elements: drop any common ancestor that has a proper
  // descendant which is also a common ancestor.
  std::set<int> common_set(common.begin(), common.end());
  std::set<int> minimal;
  for (const int c : common) {
    bool has_lower = false;
    for (const int other : common) {
      if (other == c) continue;
      const auto other_anc = ont.ancestors(other);
      if (other_anc.count(c)) {  // c is above other
        has_lower = true;
        break;
      }
    }
    if (!has_lower) minimal.insert(c);
  }
  return minimal;
}

// --- assembly ------------------------------------------------------------------

ExplanationSubgraph build_explanation(const Hypothesis& h,
                                      std::span<const SelectedPath> selected,
                                      const OntologyHierarchy& ont) {
  if (selected.empty())
    throw ContractError("build_explanation requires at least one path");

  ExplanationSubgraph g;
  g.hypothesis = h;
  g.paths.assign(selected.begin(), selected.end());

  std::set<Triple> triples;
  std::set<int> classes;
  std::set<std::pair<int, int>> type_axioms;
  for (std::size_t idx = 0; idx < selected.size(); ++idx) {
    const Path& p = selected[idx].path;
    for (const Triple& t : p.triples) {
      triples.insert(t);
      g.provenance[t].push_back(static_cast<int>(idx));
    }
    const auto entities = entity_sequence(p);
    for (std::size_t i = 0; i + 1 < entities.size(); ++i) {
      for (const int cls : lca(ont, entities[i], entities[i + 1])) {
        classes.insert(cls);
        type_axioms.emplace(entities[i], cls);
        type_axioms.emplace(entities[i + 1], cls);
      }
    }
  }

  std::set<std::pair<int, int>> subclass_axioms;
  for (const int child : classes) {
    for (const int parent : classes) {
      if (child != parent && ont.is_direct_subclass(child, parent))
        subclass_axioms.emplace(child, parent);
    }
  }

  g.triples.assign(triples.begin(), triples.end());
  g.class_ids.assign(classes.begin(), classes.end());
  g.type_axioms.assign(type_axioms.begin(), type_axioms.end());
  g.subclass_axioms.assign(subclass_axioms.begin(), subclass_axioms.end());
  return g;
}

// --- export --------------------------------------------------------------------

ExplanationDocument to_document(const ExplanationSubgraph& g,
                                const KnowledgeGraph& kg,
                                const OntologyHierarchy& ont) {
  ExplanationDocument doc;
  doc.status = "ok";
  doc.hypothesis = {kg.entity_label(g.hypothesis.subject),
                    kg.relation_label(g.hypothesis.relation),
                    g.hypothesis.object >= 0
                        ? kg.entity_label(g.hypothesis.object)
                        : ""};
  for (const SelectedPath& sp : g.paths) {
    ExplanationDocument::PathEntry entry;
    entry.metapath = to_string(sp.metapath);
    entry.relevance = sp.relevance;
    for (const Triple& t : sp.path.triples)
      entry.triples.push_back({kg.entity_label(t.subject),
                               kg.relation_label(t.relation),
                               kg.entity_label(t.object)});
    doc.paths.push_back(std::move(entry));
  }
  for (const int cls : g.class_ids)
    doc.classes.emplace_back(cls, ont.class_label(cls));
  for (const auto& [entity, cls] : g.type_axioms)
    doc.type_axioms.emplace_back(kg.entity_label(entity), ont.class_label(cls));
  for (const auto& [child, parent] : g.subclass_axioms)
    doc.subclass_axioms.emplace_back(ont.class_label(child),
                                     ont.class_label(parent));
  return doc;
}

ExplanationDocument make_empty_document(const Hypothesis& h,
                                        const KnowledgeGraph& kg) {
  ExplanationDocument doc;
  doc.status = "no explanation found";
  doc.hypothesis = {kg.entity_label(h.subject), kg.relation_label(h.relation),
                    h.object >= 0 ? kg.entity_label(h.object) : ""};
  return doc;
}

std::string explanation_to_json(const ExplanationDocument& doc) {
  nlohmann::json j;
  j["status"] = doc.status;
  j["hypothesis"] = doc.hypothesis;
  j["paths"] = nlohmann::json::array();
  for (const auto& entry : doc.paths) {
    nlohmann::json p;
    p["metapath"] = entry.metapath;
    p["relevance"] = entry.relevance;
    p["triples"] = nlohmann::json::array();
    for (const auto& t : entry.triples)
      p["triples"].push_back({t[0], t[1], t[2]});
    j["paths"].push_back(std::move(p));
  }
  j["classes"] = nlohmann::json::array();
  for (const auto& [id, label] : doc.classes)
    j["classes"].push_back({{"id", id}, {"label", label}});
  j["axioms"] = nlohmann::json::array();
  for (const auto& [entity, cls] : doc.type_axioms)
    j["axioms"].push_back({{"entity", entity}, {"class", cls}});
  for (const auto& [child, parent] : doc.subclass_axioms)
    j["axioms"].push_back({{"child", child}, {"parent", parent}});
  return j.dump(2);
}

ExplanationDocument import_explanation_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open explanation " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid explanation JSON: " + std::string(e.what()));
  }
  ExplanationDocument doc;
  doc.status = j.at("status").get<std::string>();
  doc.hypothesis = j.at("hypothesis").get<std::vector<std::string>>();
  for (const auto& p : j.at("paths")) {
    ExplanationDocument::PathEntry entry;
    entry.metapath = p.at("metapath").get<std::string>();
    entry.relevance = p.at("relevance").get<double>();
    for (const auto& t : p.at("triples"))
      entry.triples.push_back({t.at(0).get<std::string>(),
                               t.at(1).get<std::string>(),
                               t.at(2).get<std::string>()});
    doc.paths.push_back(std::move(entry));
  }
  for (const auto& c : j.at("classes"))
    doc.classes.emplace_back(c.at("id").get<int>(),
                             c.at("label").get<std::string>());
  for (const auto& a : j.at("axioms")) {
    if (a.contains("entity"))
      doc.type_axioms.emplace_back(a.at("entity").get<std::string>(),
                                   a.at("class").get<std::string>());
    else
      doc.subclass_axioms.emplace_back(a.at("child").get<std::string>(),
                                       a.at("parent").get<std::string>());
  }
  return doc;
}

namespace {

std::string dot_escape(const std::string& text) {
  std::string escaped;
  for (const char c : text) {
    if (c == '"' || c == '\\') escaped += '\\';
    escaped += c;
  }
  return escaped;
}

}  // namespace

std::string explanation_to_dot(const ExplanationDocument& doc) {
  std::ostringstream out;
  out << "digraph explanation {\n";
  out << "  rankdir=LR;\n";
  out << "  node [shape=ellipse];\n";

  std::set<std::string> entities;
  for (const auto& entry : doc.paths)
    for (const auto& t : entry.triples) {
      entities.insert(t[0]);
      entities.insert(t[2]);
    }
  for (const std::string& e : entities)
    out << "  \"" << dot_escape(e) << "\";\n";
  // Ontology classes get a distinct style.
  for (const auto& [id, label] : doc.classes)
    out << "  \"" << dot_escape(label)
        << "\" [shape=box, style=filled, fillcolor=lightgoldenrod];\n";

  std::set<std::string> edges;
  for (const auto& entry : doc.paths)
    for (const auto& t : entry.triples) {
      std::ostringstream edge;
      edge << "  \"" << dot_escape(t[0]) << "\" -> \"" << dot_escape(t[2])
           << "\" [label=\"" << dot_escape(t[1]) << "\"];\n";
      edges.insert(edge.str());
    }
  for (const std::string& e : edges) out << e;
  for (const auto& [entity, cls] : doc.type_axioms)
    out << "  \"" << dot_escape(entity) << "\" -> \"" << dot_escape(cls)
        << "\" [label=\"type\", style=dashed];\n";
  for (const auto& [child, parent] : doc.subclass_axioms)
    out << "  \"" << dot_escape(child) << "\" -> \"" << dot_escape(parent)
        << "\" [label=\"subclass_of\", style=dotted];\n";
  out << "}\n";
  return out.str();
}

void export_explanation(const ExplanationDocument& doc,
                        ExplanationFormat format,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write explanation " + path.string());
  out << (format == ExplanationFormat::kJson ? explanation_to_json(doc)
                                             : explanation_to_dot(doc));
  out << '\n';
  if (!out) throw IOError("failed writing explanation " + path.string());
}

}  // namespace rex
