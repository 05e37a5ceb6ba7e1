#include "rex/kg.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "rex/errors.hpp"
#include "rex/util.hpp"

namespace rex {

std::vector<int> entity_sequence(const Path& p) {
  std::vector<int> seq;
  seq.reserve(p.triples.size() + 1);
  seq.push_back(p.source);
  for (const Triple& t : p.triples) seq.push_back(t.object);
  return seq;
}

// --- KnowledgeGraph ----------------------------------------------------------

const std::string& KnowledgeGraph::entity_label(int v) const {
  if (v < 0 || v >= num_entities())
    throw LookupError("unknown entity id " + std::to_string(v));
  return entity_labels_[v];
}

const std::string& KnowledgeGraph::relation_label(int r) const {
  return relation(r).label;
}

const Relation& KnowledgeGraph::relation(int r) const {
  if (r < 0 || r >= num_relations())
    throw LookupError("unknown relation id " + std::to_string(r));
  return relations_[r];
}

const std::string& KnowledgeGraph::entity_type(int v) const {
  if (v < 0 || v >= num_entities())
    throw LookupError("unknown entity id " + std::to_string(v));
  return entity_types_[v];
}

std::optional<int> KnowledgeGraph::find_entity(const std::string& label) const {
  const auto it = entity_index_.find(label);
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> KnowledgeGraph::find_relation(const std::string& label) const {
  const auto it = relation_index_.find(label);
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

int KnowledgeGraph::entity_id(const std::string& label) const {
  const auto id = find_entity(label);
  if (!id) throw LookupError("unknown entity label '" + label + "'");
  return *id;
}

int KnowledgeGraph::relation_id(const std::string& label) const {
  const auto id = find_relation(label);
  if (!id) throw LookupError("unknown relation label '" + label + "'");
  return *id;
}

bool KnowledgeGraph::has_triple(const Triple& t) const {
  return std::binary_search(triples_.begin(), triples_.end(), t);
}

std::span<const RelEdge> KnowledgeGraph::neighbors(int v) const {
  if (v < 0 || v >= num_entities())
    throw LookupError("unknown entity id " + std::to_string(v));
  return out_[v];
}

std::span<const RelEdge> KnowledgeGraph::incoming(int v) const {
  if (v < 0 || v >= num_entities())
    throw LookupError("unknown entity id " + std::to_string(v));
  return in_[v];
}

std::size_t KnowledgeGraph::degree(int v) const {
  return neighbors(v).size() + incoming(v).size();
}

std::size_t KnowledgeGraph::degree_by_relation(int v, int r) const {
  if (r < 0 || r >= num_relations())
    throw LookupError("unknown relation id " + std::to_string(r));
  const auto count = [r](std::span<const RelEdge> edges) {
    const auto lo = std::lower_bound(edges.begin(), edges.end(),
                                     RelEdge{r, std::numeric_limits<int>::min()});
    const auto hi = std::upper_bound(edges.begin(), edges.end(),
                                     RelEdge{r, std::numeric_limits<int>::max()});
    return static_cast<std::size_t>(hi - lo);
  };
  return count(neighbors(v)) + count(incoming(v));
}

void KnowledgeGraph::apply_entity_types(
    const std::unordered_map<int, std::string>& types) {
  for (const auto& [v, tag] : types) {
    if (v < 0 || v >= num_entities())
      throw LookupError("type map references unknown entity id " +
                        std::to_string(v));
    entity_types_[v] = tag;
  }
}

std::uint64_t KnowledgeGraph::entity_vocab_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& label : entity_labels_) {
    h = fnv1a64(h, label);
    h = fnv1a64(h, "\n");
  }
  return h;
}

std::uint64_t KnowledgeGraph::relation_vocab_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& rel : relations_) {
    h = fnv1a64(h, rel.label);
    h = fnv1a64(h, "\n");
  }
  return h;
}

// --- KnowledgeGraphBuilder ---------------------------------------------------

int KnowledgeGraphBuilder::add_entity(const std::string& label) {
  const auto it = entity_index_.find(label);
  if (it != entity_index_.end()) return it->second;
  const int id = static_cast<int>(entity_labels_.size());
  entity_index_.emplace(label, id);
  entity_labels_.push_back(label);
  entity_types_.emplace_back(kUnknownType);
  return id;
}

int KnowledgeGraphBuilder::add_relation(const std::string& label) {
  const auto it = relation_index_.find(label);
  if (it != relation_index_.end()) return it->second;
  const int id = static_cast<int>(relations_.size());
  relation_index_.emplace(label, id);
  relations_.push_back(Relation{id, label, false, std::nullopt});
  return id;
}

void KnowledgeGraphBuilder::seed_relations(const std::vector<Relation>& relations) {
  if (!relations_.empty())
    throw ContractError("seed_relations requires an empty relation vocabulary");
  relations_ = relations;
  for (const Relation& r : relations_) relation_index_.emplace(r.label, r.id);
}

void KnowledgeGraphBuilder::add_triple(const Triple& t) {
  if (t.subject < 0 || t.subject >= static_cast<int>(entity_labels_.size()) ||
      t.object < 0 || t.object >= static_cast<int>(entity_labels_.size()) ||
      t.relation < 0 || t.relation >= static_cast<int>(relations_.size()))
    throw LookupError("triple references an id outside the vocabularies");
  triples_.push_back(t);
}

void KnowledgeGraphBuilder::add_triple(const std::string& s, const std::string& r,
                                       const std::string& o) {
  const int sid = add_entity(s);
  const int rid = add_relation(r);
  const int oid = add_entity(o);
  triples_.push_back(Triple{sid, rid, oid});
}

void KnowledgeGraphBuilder::set_entity_type(int v, std::string type) {
  if (v < 0 || v >= static_cast<int>(entity_types_.size()))
    throw LookupError("unknown entity id " + std::to_string(v));
  entity_types_[v] = std::move(type);
}

void KnowledgeGraphBuilder::declare_inverse(int r, int r_inv) {
  const int n = static_cast<int>(relations_.size());
  if (r < 0 || r >= n || r_inv < 0 || r_inv >= n)
    throw LookupError("declare_inverse references an unknown relation id");
  relations_[r].inverse_of = r_inv;
  relations_[r_inv].inverse_of = r;
  relations_[r_inv].is_inverse = true;
}

KnowledgeGraph KnowledgeGraphBuilder::build() {
  std::sort(triples_.begin(), triples_.end());
  triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());

  KnowledgeGraph kg;
  kg.entity_labels_ = std::move(entity_labels_);
  kg.entity_types_ = std::move(entity_types_);
  kg.relations_ = std::move(relations_);
  kg.triples_ = std::move(triples_);
  kg.entity_index_ = std::move(entity_index_);
  kg.relation_index_ = std::move(relation_index_);

  kg.out_.assign(kg.entity_labels_.size(), {});
  kg.in_.assign(kg.entity_labels_.size(), {});
  for (const Triple& t : kg.triples_) {
    kg.out_[t.subject].push_back(RelEdge{t.relation, t.object});
    kg.in_[t.object].push_back(RelEdge{t.relation, t.subject});
  }
  // Triples are sorted (s, r, o), so out_ lists are already ordered; the
  // incoming lists are not.
  for (auto& edges : kg.in_) std::sort(edges.begin(), edges.end());
  return kg;
}

// --- file loading ------------------------------------------------------------

namespace {

bool is_comment_or_blank(const std::string& line) {
  return line.empty() || line[0] == '#';
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

/// Re-pairs relations named "<prefix><base>" with their base relation so
/// a reloaded augmented graph keeps its inverse declarations.
KnowledgeGraph pair_prefixed_inverses(KnowledgeGraph kg) {
  const std::string prefix = kInversePrefix;
  std::vector<std::pair<int, int>> pairs;
  for (int r = 0; r < kg.num_relations(); ++r) {
    if (kg.relation(r).inverse_of) continue;
    const std::string& label = kg.relation_label(r);
    if (label.rfind(prefix, 0) != 0) continue;
    const auto base = kg.find_relation(label.substr(prefix.size()));
    if (base && *base != r) pairs.emplace_back(*base, r);
  }
  if (pairs.empty()) return kg;

  KnowledgeGraphBuilder rebuilt;
  rebuilt.seed_relations(kg.relations());
  for (int v = 0; v < kg.num_entities(); ++v) rebuilt.add_entity(kg.entity_label(v));
  for (const Triple& t : kg.triples()) rebuilt.add_triple(t);
  for (const auto& [base, inv] : pairs) rebuilt.declare_inverse(base, inv);
  return rebuilt.build();
}

}  // namespace

KnowledgeGraph load_triples(const std::filesystem::path& path,
                            TripleFormat format) {
  (void)format;  // kTsv is the only wire format
  std::ifstream in(path);
  if (!in) throw IOError("cannot open triple file " + path.string());

  KnowledgeGraphBuilder builder;
  std::string line;
  std::size_t line_no = 0;
  std::size_t triple_count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_comment_or_blank(line)) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() ||
        fields[2].empty())
      throw ParseError(path.string(), line_no,
                       "expected subject<TAB>relation<TAB>object");
    builder.add_triple(fields[0], fields[1], fields[2]);
    ++triple_count;
  }
  if (triple_count == 0)
    throw DataError("triple file " + path.string() + " contains no triples");

  // Recognize the inverse-prefix naming convention so augmentation stays
  // idempotent across save/load round trips.
  return pair_prefixed_inverses(builder.build());
}

void save_triples(const KnowledgeGraph& kg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write triple file " + path.string());
  for (const Triple& t : kg.triples()) {
    out << kg.entity_label(t.subject) << '\t' << kg.relation_label(t.relation)
        << '\t' << kg.entity_label(t.object) << '\n';
  }
  if (!out) throw IOError("failed writing triple file " + path.string());
}

KnowledgeGraph add_inverse_edges(const KnowledgeGraph& kg) {
  KnowledgeGraphBuilder builder;
  builder.seed_relations(kg.relations());
  for (int v = 0; v < kg.num_entities(); ++v) {
    const int id = builder.add_entity(kg.entity_label(v));
    builder.set_entity_type(id, kg.entity_type(v));
  }
  for (const Triple& t : kg.triples()) builder.add_triple(t);

  // Pick (or mint) the inverse relation of every relation in use.
  std::vector<int> inverse_of(kg.num_relations(), -1);
  for (int r = 0; r < kg.num_relations(); ++r) {
    if (kg.relation(r).inverse_of) inverse_of[r] = *kg.relation(r).inverse_of;
  }
  for (int r = 0; r < kg.num_relations(); ++r) {
    if (inverse_of[r] >= 0) continue;
    const int r_inv =
        builder.add_relation(std::string(kInversePrefix) + kg.relation_label(r));
    builder.declare_inverse(r, r_inv);
    inverse_of[r] = r_inv;
    if (r_inv < kg.num_relations()) inverse_of[r_inv] = r;
  }
  for (const Triple& t : kg.triples())
    builder.add_triple(Triple{t.object, inverse_of[t.relation], t.subject});
  return builder.build();
}

EntityTypeLoad load_entity_types(const std::filesystem::path& path,
                                 const KnowledgeGraph& kg) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open type file " + path.string());
  EntityTypeLoad result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_comment_or_blank(line)) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      throw ParseError(path.string(), line_no, "expected entity<TAB>type");
    const auto id = kg.find_entity(fields[0]);
    if (!id) {
      result.warnings.push_back(fields[0]);
      continue;
    }
    result.types[*id] = fields[1];
  }
  return result;
}

std::vector<Hypothesis> load_split(const std::filesystem::path& path,
                                   const KnowledgeGraph& kg) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open split file " + path.string());
  std::vector<Hypothesis> hyps;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_comment_or_blank(line)) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() ||
        fields[2].empty())
      throw ParseError(path.string(), line_no,
                       "expected subject<TAB>relation<TAB>object");
    const auto s = kg.find_entity(fields[0]);
    const auto r = kg.find_relation(fields[1]);
    const auto o = kg.find_entity(fields[2]);
    if (!s)
      throw ParseError(path.string(), line_no,
                       "unknown subject '" + fields[0] + "'");
    if (!r)
      throw ParseError(path.string(), line_no,
                       "unknown relation '" + fields[1] + "'");
    if (!o)
      throw ParseError(path.string(), line_no,
                       "unknown object '" + fields[2] + "'");
    if (*s == *o)
      throw ParseError(path.string(), line_no,
                       "degenerate hypothesis: subject equals object");
    hyps.push_back(Hypothesis{*s, *r, *o});
  }
  if (hyps.empty())
    throw DataError("split file " + path.string() + " contains no hypotheses");
  return hyps;
}

}  // namespace rex
