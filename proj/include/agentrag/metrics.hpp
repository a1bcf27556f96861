#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentrag/judge.hpp"

namespace agentrag {

/// Normalized answer similarity, retrieval precision, augmentation accuracy,
/// augmentation precision, answer consistency.
enum class Metric { kNass, kRp, kAa, kAp, kAc };

inline constexpr Metric kAllMetrics[] = {Metric::kNass, Metric::kRp, Metric::kAa, Metric::kAp, Metric::kAc};

/// "NASS", "RP", "AA", "AP", "AC".
std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view name);

/// Maximum of the judge's similarity scale.
inline constexpr double kNassScale = 5.0;

double nass_from_score(double score);

/// Share of true flags; nullopt for an empty list.
std::optional<double> fraction_true(const std::vector<bool>& flags);

/// Flags with every verdict parsed, or nullopt if any verdict is missing.
std::optional<std::vector<bool>> complete_flags(const std::vector<std::optional<bool>>& verdicts);

/// |relevant ∧ used| / |relevant|; nullopt when nothing is relevant. Throws
/// ValidationError on length mismatch.
std::optional<double> augmentation_precision(const std::vector<bool>& relevance, const std::vector<bool>& usage);

struct ScoreOutcome {
  std::optional<double> value;
  std::optional<double> raw_score;
  std::string reply;
};

struct FlagOutcome {
  std::optional<double> value;
  std::vector<std::optional<bool>> verdicts;
  std::vector<std::string> replies;
};

struct ConsistencyOutcome {
  std::optional<double> value;
  std::vector<std::string> points;
  std::vector<std::optional<bool>> supported;
  /// Whole-answer verdict, recorded but not scored.
  std::optional<bool> derived_from_context;
};

ScoreOutcome nass(const Judge& judge, const std::string& question, const std::string& reference,
                  const std::string& answer);

/// One relevance verdict per context. Skipped (nullopt) for no contexts or
/// any unreadable verdict.
FlagOutcome retrieval_precision(const Judge& judge, const std::string& question,
                                const std::vector<std::string>& contexts);

/// One usage verdict per context, same skip rules as retrieval_precision.
FlagOutcome augmentation_accuracy(const Judge& judge, const std::vector<std::string>& contexts,
                                  const std::string& answer);

/// Main points of the answer, then one support verdict per point against the
/// joined contexts. Skipped for no contexts or no extracted points.
ConsistencyOutcome answer_consistency(const Judge& judge, const std::string& answer,
                                      const std::vector<std::string>& contexts);

}  // namespace agentrag
