#include "rex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "rex/errors.hpp"
#include "rex/util.hpp"

namespace rex {

// --- known answers --------------------------------------------------------------

namespace {

std::uint64_t query_key(int subject, int relation) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(subject)) << 32) |
         static_cast<std::uint32_t>(relation);
}

}  // namespace

void KnownAnswers::add(int subject, int relation, int object) {
  answers_[query_key(subject, relation)].insert(object);
}

void KnownAnswers::add_triples(const KnowledgeGraph& kg) {
  for (const Triple& t : kg.triples()) add(t.subject, t.relation, t.object);
}

void KnownAnswers::add_hypotheses(std::span<const Hypothesis> hyps) {
  for (const Hypothesis& h : hyps) {
    if (h.object >= 0) add(h.subject, h.relation, h.object);
  }
}

bool KnownAnswers::contains(int subject, int relation, int object) const {
  const auto it = answers_.find(query_key(subject, relation));
  return it != answers_.end() && it->second.count(object) > 0;
}

// --- ranking ---------------------------------------------------------------------

std::size_t rank_of_target(std::span<const int> ranked, int target,
                           const KnownAnswers& known, int subject, int relation,
                           bool filtered) {
  std::size_t position = 0;
  for (const int candidate : ranked) {
    if (candidate == target) return position + 1;
    if (filtered && known.contains(subject, relation, candidate)) continue;
    ++position;
  }
  return kRankNotFound;
}

double hits_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw ContractError("hits@k of an empty rank list");
  std::size_t hits = 0;
  for (const std::size_t r : ranks)
    if (r != kRankNotFound && r <= k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double mrr(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw ContractError("MRR of an empty rank list");
  double sum = 0.0;
  for (const std::size_t r : ranks)
    if (r != kRankNotFound) sum += 1.0 / static_cast<double>(r);
  return sum / static_cast<double>(ranks.size());
}

// --- evaluation --------------------------------------------------------------------

namespace {

EvalResult result_from_ranks(std::vector<std::size_t> ranks, bool filtered,
                             std::uint64_t seed) {
  EvalResult res;
  res.hits1 = hits_at_k(ranks, 1);
  res.hits3 = hits_at_k(ranks, 3);
  res.hits10 = hits_at_k(ranks, 10);
  res.mrr = mrr(ranks);
  res.ranks = std::move(ranks);
  res.filtered = filtered;
  res.seed = seed;
  return res;
}

}  // namespace

EvalReport evaluate(const KnowledgeGraph& kg, const PolicyParameters& params,
                    std::span<const Hypothesis> test_hypotheses,
                    const KnownAnswers& known, const EvalConfig& cfg) {
  if (test_hypotheses.empty()) throw ContractError("empty test split");
  if (params.num_entities != kg.num_entities() ||
      params.num_relations != kg.num_relations())
    throw DataError("policy parameters do not match the graph vocabulary");

  const std::size_t n = test_hypotheses.size();
  std::vector<std::size_t> filtered_ranks(n), raw_ranks(n);
  std::vector<std::vector<Path>> success_paths(n);

  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const Hypothesis& h = test_hypotheses[i];
    const auto ranked = beam_search_infer(kg, params, h.subject, h.relation,
                                          cfg.beam_width, cfg.max_len);
    std::vector<int> targets;
    targets.reserve(ranked.size());
    for (const RankedTarget& entry : ranked) {
      targets.push_back(entry.entity);
      if (entry.entity == h.object && !entry.path.empty())
        success_paths[i].push_back(entry.path);
    }
    filtered_ranks[i] =
        rank_of_target(targets, h.object, known, h.subject, h.relation, true);
    raw_ranks[i] =
        rank_of_target(targets, h.object, known, h.subject, h.relation, false);
  });

  EvalReport report;
  report.filtered = result_from_ranks(std::move(filtered_ranks), true, cfg.seed);
  report.raw = result_from_ranks(std::move(raw_ranks), false, cfg.seed);
  for (auto& paths : success_paths)
    for (auto& p : paths) report.successful_paths.push_back(std::move(p));
  return report;
}

EvalAggregate aggregate_results(std::span<const EvalResult> results) {
  if (results.empty()) throw ContractError("no results to aggregate");
  EvalAggregate agg;
  agg.runs = static_cast<int>(results.size());
  const auto mean_of = [&](auto field) {
    double s = 0.0;
    for (const EvalResult& r : results) s += field(r);
    return s / static_cast<double>(results.size());
  };
  const auto std_of = [&](auto field, double mean) {
    if (results.size() < 2) return 0.0;
    double s = 0.0;
    for (const EvalResult& r : results) {
      const double d = field(r) - mean;
      s += d * d;
    }
    return std::sqrt(s / static_cast<double>(results.size() - 1));
  };
  const auto h1 = [](const EvalResult& r) { return r.hits1; };
  const auto h3 = [](const EvalResult& r) { return r.hits3; };
  const auto h10 = [](const EvalResult& r) { return r.hits10; };
  const auto m = [](const EvalResult& r) { return r.mrr; };
  agg.mean_hits1 = mean_of(h1);
  agg.mean_hits3 = mean_of(h3);
  agg.mean_hits10 = mean_of(h10);
  agg.mean_mrr = mean_of(m);
  agg.std_hits1 = std_of(h1, agg.mean_hits1);
  agg.std_hits3 = std_of(h3, agg.mean_hits3);
  agg.std_hits10 = std_of(h10, agg.mean_hits10);
  agg.std_mrr = std_of(m, agg.mean_mrr);
  return agg;
}

std::vector<AblationRow> run_ablation(const KnowledgeGraph& kg,
                                      std::span<const Hypothesis> train_hyps,
                                      std::span<const Hypothesis> test_hyps,
                                      const RewardConfig& base_cfg,
                                      const EvalConfig& eval_cfg,
                                      const ICTable& table,
                                      const KnownAnswers& known, int threads) {
  // (use_early_stop, use_relevance): full, -s, -r, -rs. Same seed for all
  // variants so metric differences trace back to the flags alone.
  const struct {
    const char* name;
    bool early_stop;
    bool relevance;
  } variants[] = {
      {"REx", true, true},
      {"REx -s", false, true},
      {"REx -r", true, false},
      {"REx -rs", false, false},
  };

  std::vector<AblationRow> rows;
  for (const auto& variant : variants) {
    RewardConfig cfg = base_cfg;
    cfg.use_early_stop = variant.early_stop;
    cfg.use_relevance = variant.relevance;
    const TrainResult trained = train(kg, train_hyps, cfg, table, threads);
    AblationRow row;
    row.variant = variant.name;
    row.use_early_stop = variant.early_stop;
    row.use_relevance = variant.relevance;
    row.report = evaluate(kg, trained.params, test_hyps, known, eval_cfg);
    log_info("ablation " + row.variant +
             ": mrr=" + std::to_string(row.report.filtered.mrr));
    rows.push_back(std::move(row));
  }
  return rows;
}

MetricsRow metrics_row(const std::string& variant, const EvalResult& result) {
  return MetricsRow{variant, result.hits1, result.hits3, result.hits10,
                    result.mrr, 0.0};
}

MetricsRow metrics_row(const std::string& variant, const EvalAggregate& agg) {
  return MetricsRow{variant, agg.mean_hits1, agg.mean_hits3, agg.mean_hits10,
                    agg.mean_mrr, agg.std_mrr};
}

void save_metrics_csv(std::span<const MetricsRow> rows,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write metrics " + path.string());
  out << "variant,hits1,hits3,hits10,mrr,std_mrr\n";
  out.precision(12);
  for (const MetricsRow& row : rows) {
    out << row.variant << ',' << row.hits1 << ',' << row.hits3 << ','
        << row.hits10 << ',' << row.mrr << ',' << row.std_mrr << '\n';
  }
  if (!out) throw IOError("failed writing metrics " + path.string());
}

// --- histograms ---------------------------------------------------------------------

Histogram ic_distribution(std::span<const Path> paths, const ICTable& table,
                          int bins) {
  if (bins < 1) throw ContractError("bins must be >= 1");
  if (paths.empty()) throw ContractError("no paths to score");

  Histogram hist;
  hist.bin_low.resize(bins);
  hist.bin_high.resize(bins);
  hist.counts.assign(bins, 0);
  for (int b = 0; b < bins; ++b) {
    hist.bin_low[b] = static_cast<double>(b) / bins;
    hist.bin_high[b] = static_cast<double>(b + 1) / bins;
  }
  for (const Path& p : paths) {
    const double value = path_relevance(table, p);
    int b = static_cast<int>(value * bins);
    if (b >= bins) b = bins - 1;  // relevance of exactly 1
    if (b < 0) b = 0;
    ++hist.counts[b];
  }
  return hist;
}

void save_histogram_csv(const Histogram& hist,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write histogram " + path.string());
  out << "bin_low,bin_high,count\n";
  for (std::size_t b = 0; b < hist.counts.size(); ++b)
    out << hist.bin_low[b] << ',' << hist.bin_high[b] << ',' << hist.counts[b]
        << '\n';
  if (!out) throw IOError("failed writing histogram " + path.string());
}

// --- ground truth -------------------------------------------------------------------

MetapathMatchResult match_ground_truth_metapaths(
    std::span<const Metapath> found, std::span<const Metapath> ground_truth) {
  MetapathMatchResult result;
  const std::set<Metapath> gt(ground_truth.begin(), ground_truth.end());

  std::set<Metapath> distinct;
  for (const Metapath& mp : found) {
    result.counts[mp] += 1;
    distinct.insert(mp);
  }
  for (const Metapath& mp : distinct) {
    if (gt.count(mp))
      result.matched.push_back(mp);
    else
      result.novel.push_back(mp);
  }

  // Ground-truth tokens never seen in any found metapath usually signal a
  // vocabulary mismatch; surface them as warnings.
  std::set<std::string> seen_tokens;
  for (const Metapath& mp : found)
    seen_tokens.insert(mp.elements.begin(), mp.elements.end());
  std::set<std::string> reported;
  for (const Metapath& mp : ground_truth) {
    for (const std::string& token : mp.elements) {
      if (!seen_tokens.count(token) && reported.insert(token).second)
        result.warnings.push_back("ground-truth token '" + token +
                                  "' never occurs in the found metapaths");
    }
  }
  return result;
}

}  // namespace rex
