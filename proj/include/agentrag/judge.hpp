#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentrag/model_gateway.hpp"

namespace agentrag {

/// Judge prompt wordings, loaded from the versioned prompt file.
struct JudgePrompts {
  int version = 0;
  std::string nass;
  std::string relevance;
  std::string usage;
  std::string main_points;
  std::string support;
  std::string derived;
  std::string reask_score;
  std::string reask_yes_no;
};

/// Parses the `[section]` prompt file format. Throws LoadError on an
/// unknown or missing section.
JudgePrompts parse_judge_prompts(std::string_view text);
JudgePrompts load_judge_prompts(const std::filesystem::path& path);

/// The prompt file shipped in prompts/judge_prompts.txt, compiled in.
const JudgePrompts& default_judge_prompts();

/// First number in the reply; accepted only on the 0..5 half-point grid.
std::optional<double> parse_score(std::string_view reply);
/// Leading word yes/true or no/false, case-insensitive.
std::optional<bool> parse_yes_no(std::string_view reply);
/// Lines shaped "1. point", "2) point", "- point" or "* point".
std::vector<std::string> parse_main_points(std::string_view reply);

/// LLM judge issuing constrained questions. Every constrained call re-asks
/// once when the reply cannot be parsed, then gives up (nullopt).
class Judge {
 public:
  explicit Judge(ChatEndpoint endpoint, JudgePrompts prompts = default_judge_prompts());

  struct Verdict {
    std::optional<bool> value;
    std::string reply;
  };
  struct Score {
    std::optional<double> value;
    std::string reply;
  };

  Score similarity(const std::string& question, const std::string& reference, const std::string& answer) const;
  Verdict context_relevant(const std::string& question, const std::string& context) const;
  Verdict context_used(const std::string& context, const std::string& answer) const;
  std::vector<std::string> main_points(const std::string& answer) const;
  Verdict point_supported(const std::string& point, const std::string& context) const;
  Verdict derived_from_context(const std::string& answer, const std::string& context) const;

  const JudgePrompts& prompts() const { return prompts_; }

 private:
  Verdict ask_yes_no(const std::string& prompt) const;

  ChatEndpoint endpoint_;
  JudgePrompts prompts_;
};

}  // namespace agentrag
