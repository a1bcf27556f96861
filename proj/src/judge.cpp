#include "agentrag/judge.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <regex>

#include <fmt/format.h>

#include "agentrag/error.hpp"
#include "agentrag/judge_prompts_text.hpp"
#include "agentrag/util.hpp"

namespace agentrag {

JudgePrompts parse_judge_prompts(std::string_view text) {
  JudgePrompts prompts;
  std::map<std::string, std::string*> sections{
      {"nass", &prompts.nass},           {"relevance", &prompts.relevance},     {"usage", &prompts.usage},
      {"main_points", &prompts.main_points}, {"support", &prompts.support},     {"derived", &prompts.derived},
      {"reask_score", &prompts.reask_score}, {"reask_yes_no", &prompts.reask_yes_no}};

  std::string* current = nullptr;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto stripped = trim(line);
    if (stripped.size() > 2 && stripped.front() == '[' && stripped.back() == ']') {
      const std::string name(stripped.substr(1, stripped.size() - 2));
      const auto it = sections.find(name);
      if (it == sections.end()) throw LoadError(fmt::format("judge prompts line {}: unknown section [{}]", line_no, name));
      current = it->second;
      continue;
    }
    if (current) {
      *current += line;
      *current += '\n';
      continue;
    }
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq != std::string_view::npos && trim(stripped.substr(0, eq)) == "version") {
      const auto value = trim(stripped.substr(eq + 1));
      try {
        prompts.version = std::stoi(std::string(value));
      } catch (const std::exception&) {
        throw LoadError(fmt::format("judge prompts line {}: bad version '{}'", line_no, value));
      }
      continue;
    }
    throw LoadError(fmt::format("judge prompts line {}: text outside a section", line_no));
  }

  for (auto& [name, body] : sections) {
    *body = std::string(trim(*body));
    if (body->empty()) throw LoadError(fmt::format("judge prompts: section [{}] is missing or empty", name));
  }
  if (prompts.version <= 0) throw LoadError("judge prompts: missing 'version = N' header");
  return prompts;
}

JudgePrompts load_judge_prompts(const std::filesystem::path& path) {
  return with_error_context(path.string(), [&] { return parse_judge_prompts(read_text_file(path)); });
}

const JudgePrompts& default_judge_prompts() {
  static const JudgePrompts prompts = parse_judge_prompts(detail::kJudgePromptFile);
  return prompts;
}

std::optional<double> parse_score(std::string_view reply) {
  static const std::regex number(R"((-?\d+(?:\.\d+)?))");
  const std::string text(reply);
  std::smatch m;
  if (!std::regex_search(text, m, number)) return std::nullopt;
  const double score = std::stod(m[1].str());
  if (score < 0.0 || score > 5.0) return std::nullopt;
  if (std::floor(score * 2.0) != score * 2.0) return std::nullopt;
  return score;
}

std::optional<bool> parse_yes_no(std::string_view reply) {
  const auto text = trim(reply);
  std::size_t start = 0;
  while (start < text.size() && !std::isalpha(static_cast<unsigned char>(text[start]))) ++start;
  std::size_t end = start;
  while (end < text.size() && std::isalpha(static_cast<unsigned char>(text[end]))) ++end;
  const std::string word = to_lower(text.substr(start, end - start));
  if (word == "yes" || word == "true") return true;
  if (word == "no" || word == "false") return false;
  return std::nullopt;
}

std::vector<std::string> parse_main_points(std::string_view reply) {
  static const std::regex item(R"(^\s*(?:\d+\s*[.)]|[-*])\s+(.+)$)");
  std::vector<std::string> points;
  std::size_t pos = 0;
  while (pos < reply.size()) {
    const auto end = std::min(reply.find('\n', pos), reply.size());
    const std::string line(reply.substr(pos, end - pos));
    pos = end + 1;
    std::smatch m;
    if (std::regex_match(line, m, item)) {
      std::string point(trim(m[1].str()));
      if (point.size() >= 2 && point.front() == '"' && point.back() == '"') point = point.substr(1, point.size() - 2);
      if (!point.empty()) points.push_back(std::move(point));
    }
  }
  return points;
}

Judge::Judge(ChatEndpoint endpoint, JudgePrompts prompts)
    : endpoint_(std::move(endpoint)), prompts_(std::move(prompts)) {}

Judge::Score Judge::similarity(const std::string& question, const std::string& reference,
                               const std::string& answer) const {
  const std::string prompt =
      fill_slots(prompts_.nass, {{"question", question}, {"reference", reference}, {"answer", answer}});

  Score score;
  score.reply = endpoint_.ask(prompt);
  score.value = parse_score(score.reply);
  if (!score.value) {
    score.reply = endpoint_.converse({{ChatRole::kUser, prompt},
                                      {ChatRole::kAssistant, score.reply},
                                      {ChatRole::kUser, prompts_.reask_score}});
    score.value = parse_score(score.reply);
  }
  return score;
}

Judge::Verdict Judge::ask_yes_no(const std::string& prompt) const {
  Verdict verdict;
  verdict.reply = endpoint_.ask(prompt);
  verdict.value = parse_yes_no(verdict.reply);
  if (!verdict.value) {
    verdict.reply = endpoint_.converse({{ChatRole::kUser, prompt},
                                        {ChatRole::kAssistant, verdict.reply},
                                        {ChatRole::kUser, prompts_.reask_yes_no}});
    verdict.value = parse_yes_no(verdict.reply);
  }
  return verdict;
}

Judge::Verdict Judge::context_relevant(const std::string& question, const std::string& context) const {
  return ask_yes_no(fill_slots(prompts_.relevance, {{"question", question}, {"context", context}}));
}

Judge::Verdict Judge::context_used(const std::string& context, const std::string& answer) const {
  return ask_yes_no(fill_slots(prompts_.usage, {{"context", context}, {"answer", answer}}));
}

std::vector<std::string> Judge::main_points(const std::string& answer) const {
  return parse_main_points(endpoint_.ask(fill_slots(prompts_.main_points, {{"answer", answer}})));
}

Judge::Verdict Judge::point_supported(const std::string& point, const std::string& context) const {
  return ask_yes_no(fill_slots(prompts_.support, {{"context", context}, {"point", point}}));
}

Judge::Verdict Judge::derived_from_context(const std::string& answer, const std::string& context) const {
  return ask_yes_no(fill_slots(prompts_.derived, {{"context", context}, {"answer", answer}}));
}

}  // namespace agentrag
