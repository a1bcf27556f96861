#include "agentrag/metrics.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "agentrag/error.hpp"
#include "agentrag/util.hpp"

namespace agentrag {

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kNass: return "NASS";
    case Metric::kRp: return "RP";
    case Metric::kAa: return "AA";
    case Metric::kAp: return "AP";
    case Metric::kAc: return "AC";
  }
  return "NASS";
}

std::optional<Metric> parse_metric(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

double nass_from_score(double score) { return score / kNassScale; }

std::optional<double> fraction_true(const std::vector<bool>& flags) {
  if (flags.empty()) return std::nullopt;
  const auto hits = std::count(flags.begin(), flags.end(), true);
  return static_cast<double>(hits) / static_cast<double>(flags.size());
}

std::optional<std::vector<bool>> complete_flags(const std::vector<std::optional<bool>>& verdicts) {
  std::vector<bool> flags;
  flags.reserve(verdicts.size());
  for (const auto& v : verdicts) {
    if (!v) return std::nullopt;
    flags.push_back(*v);
  }
  return flags;
}

std::optional<double> augmentation_precision(const std::vector<bool>& relevance, const std::vector<bool>& usage) {
  if (relevance.size() != usage.size()) {
    throw ValidationError(fmt::format("relevance ({}) and usage ({}) flag counts differ", relevance.size(), usage.size()));
  }
  std::size_t relevant = 0;
  std::size_t relevant_and_used = 0;
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    if (!relevance[i]) continue;
    ++relevant;
    if (usage[i]) ++relevant_and_used;
  }
  if (relevant == 0) return std::nullopt;
  return static_cast<double>(relevant_and_used) / static_cast<double>(relevant);
}

namespace {

std::optional<double> score_flags(const std::vector<std::optional<bool>>& verdicts) {
  const auto flags = complete_flags(verdicts);
  if (!flags) return std::nullopt;
  return fraction_true(*flags);
}

}  // namespace

ScoreOutcome nass(const Judge& judge, const std::string& question, const std::string& reference,
                  const std::string& answer) {
  const auto score = judge.similarity(question, reference, answer);
  ScoreOutcome out;
  out.reply = score.reply;
  out.raw_score = score.value;
  if (score.value) out.value = nass_from_score(*score.value);
  return out;
}

FlagOutcome retrieval_precision(const Judge& judge, const std::string& question,
                                const std::vector<std::string>& contexts) {
  FlagOutcome out;
  for (const auto& context : contexts) {
    auto verdict = judge.context_relevant(question, context);
    out.verdicts.push_back(verdict.value);
    out.replies.push_back(std::move(verdict.reply));
  }
  out.value = score_flags(out.verdicts);
  return out;
}

FlagOutcome augmentation_accuracy(const Judge& judge, const std::vector<std::string>& contexts,
                                  const std::string& answer) {
  FlagOutcome out;
  for (const auto& context : contexts) {
    auto verdict = judge.context_used(context, answer);
    out.verdicts.push_back(verdict.value);
    out.replies.push_back(std::move(verdict.reply));
  }
  out.value = score_flags(out.verdicts);
  return out;
}

ConsistencyOutcome answer_consistency(const Judge& judge, const std::string& answer,
                                      const std::vector<std::string>& contexts) {
  ConsistencyOutcome out;
  if (contexts.empty()) return out;
  const std::string context = join(contexts, "\n\n");
  out.points = judge.main_points(answer);
  for (const auto& point : out.points) out.supported.push_back(judge.point_supported(point, context).value);
  out.derived_from_context = judge.derived_from_context(answer, context).value;
  out.value = score_flags(out.supported);
  return out;
}

}  // namespace agentrag
