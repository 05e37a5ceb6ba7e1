#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rex/explanation.hpp"
#include "rex/ic.hpp"
#include "rex/kg.hpp"
#include "rex/pathfinder.hpp"

namespace rex {

/// Rank value for a target that never appears in the candidate list.
inline constexpr std::size_t kRankNotFound =
    std::numeric_limits<std::size_t>::max();

/// Known correct objects per (subject, relation) query, used by the
/// filtered ranking protocol.
class KnownAnswers {
 public:
  void add(int subject, int relation, int object);
  void add_triples(const KnowledgeGraph& kg);
  void add_hypotheses(std::span<const Hypothesis> hyps);
  bool contains(int subject, int relation, int object) const;

 private:
  std::unordered_map<std::uint64_t, std::unordered_set<int>> answers_;
};

/// 1-based position of the target in a deduplicated ranked list. When
/// filtered, other known-correct answers are removed before ranking.
std::size_t rank_of_target(std::span<const int> ranked, int target,
                           const KnownAnswers& known, int subject,
                           int relation, bool filtered);

/// Fraction of ranks <= k (kRankNotFound contributes 0).
double hits_at_k(std::span<const std::size_t> ranks, std::size_t k);

/// Mean reciprocal rank (kRankNotFound contributes 0).
double mrr(std::span<const std::size_t> ranks);

struct EvalResult {
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  double mrr = 0.0;
  std::vector<std::size_t> ranks;
  bool filtered = true;
  std::uint64_t seed = 0;
};

struct EvalReport {
  EvalResult filtered;
  EvalResult raw;
  /// Successful explanatory paths found during ranking (target reached),
  /// kept for relevance histograms.
  std::vector<Path> successful_paths;
};

struct EvalConfig {
  int beam_width = 50;
  int max_len = 3;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Beam-search ranking of every test hypothesis, then metric aggregation
/// under both the filtered and raw protocols.
EvalReport evaluate(const KnowledgeGraph& kg, const PolicyParameters& params,
                    std::span<const Hypothesis> test_hypotheses,
                    const KnownAnswers& known, const EvalConfig& cfg);

struct EvalAggregate {
  double mean_hits1 = 0.0, mean_hits3 = 0.0, mean_hits10 = 0.0, mean_mrr = 0.0;
  double std_hits1 = 0.0, std_hits3 = 0.0, std_hits10 = 0.0, std_mrr = 0.0;
  int runs = 0;
};

/// Mean and sample standard deviation across independent runs.
EvalAggregate aggregate_results(std::span<const EvalResult> results);

struct AblationRow {
  std::string variant;  // REx, REx -s, REx -r, REx -rs
  bool use_early_stop = true;
  bool use_relevance = true;
  EvalReport report;
};

/// Four train+evaluate runs differing only in the (use_early_stop,
/// use_relevance) flags, identical seeds across variants.
std::vector<AblationRow> run_ablation(const KnowledgeGraph& kg,
                                      std::span<const Hypothesis> train_hyps,
                                      std::span<const Hypothesis> test_hyps,
                                      const RewardConfig& base_cfg,
                                      const EvalConfig& eval_cfg,
                                      const ICTable& table,
                                      const KnownAnswers& known,
                                      int threads = 1);

struct MetricsRow {
  std::string variant;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  double mrr = 0.0;
  double std_mrr = 0.0;
};

MetricsRow metrics_row(const std::string& variant, const EvalResult& result);
MetricsRow metrics_row(const std::string& variant, const EvalAggregate& agg);

void save_metrics_csv(std::span<const MetricsRow> rows,
                      const std::filesystem::path& path);

struct Histogram {
  std::vector<double> bin_low;
  std::vector<double> bin_high;
  std::vector<std::size_t> counts;
};

/// Histogram of path_relevance values over [0,1]; a value of exactly 1
/// lands in the last bin.
Histogram ic_distribution(std::span<const Path> paths, const ICTable& table,
                          int bins);

void save_histogram_csv(const Histogram& hist,
                        const std::filesystem::path& path);

struct MetapathMatchResult {
  std::vector<Metapath> matched;
  std::vector<Metapath> novel;
  std::map<Metapath, std::size_t> counts;  // found metapath -> frequency
  std::vector<std::string> warnings;
};

/// Exact-sequence matching of found metapaths against a ground-truth set.
/// Duplicates in `found` feed the frequency counts; matching is over the
/// distinct metapaths.
MetapathMatchResult match_ground_truth_metapaths(
    std::span<const Metapath> found, std::span<const Metapath> ground_truth);

}  // namespace rex
