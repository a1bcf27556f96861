#include "agentrag/dataset.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "agentrag/error.hpp"
#include "agentrag/util.hpp"

namespace agentrag {

namespace {

using nlohmann::json;

constexpr std::string_view kQuestionSlot = "{question}";

constexpr char kSafetyEngineerTemplate[] =
    "Act as a safety engineer, who has the task to derive safety requirements for a given component pipeline.\n"
    "As input, you are given the pipeline, a known potential functional insufficiency, and possibly a trigger "
    "condition.\n"
    "Output a safety requirement, i.e. a description how the function of the component pipeline shall not "
    "perform in case the known insufficiency occurs.\n"
    "Consider the function of the component pipeline and possible further downstream system functions to state "
    "what shall not happen in case of the functional insufficiency.\n"
    "Keep your answer as brief as a single sentence, but make sure a system-specific requirement is given.\n"
    "Begin your statement with 'If...'\n"
    "INPUT: ///{question}///\n"
    "OUTPUT:";

std::string required_text(const json& row, const char* name, std::size_t line) {
  if (!row.contains(name) || !row[name].is_string() || trim(row[name].get<std::string>()).empty()) {
    throw ValidationError(fmt::format("dataset line {}: field '{}' must be a non-empty string", line, name));
  }
  return row[name].get<std::string>();
}

}  // namespace

std::string_view to_string(Category category) {
  return category == Category::kMlDesign ? "ml_design" : "safety_tactic";
}

std::optional<Category> parse_category(std::string_view name) {
  if (name == "safety_tactic") return Category::kSafetyTactic;
  if (name == "ml_design") return Category::kMlDesign;
  return std::nullopt;
}

std::vector<QAExample> parse_dataset(std::string_view jsonl) {
  std::vector<QAExample> examples;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    const auto end = std::min(jsonl.find('\n', pos), jsonl.size());
    const auto line = trim(jsonl.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;

    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(fmt::format("dataset line {}: invalid JSON: {}", line_no, e.what()));
    }
    if (!row.is_object()) throw ValidationError(fmt::format("dataset line {}: expected a JSON object", line_no));

    QAExample ex;
    ex.example_id = required_text(row, "example_id", line_no);
    const auto category = parse_category(required_text(row, "category", line_no));
    if (!category) {
      throw ValidationError(
          fmt::format("dataset line {}: field 'category' must be safety_tactic or ml_design", line_no));
    }
    ex.category = *category;
    ex.pipeline_text = required_text(row, "pipeline_text", line_no);
    ex.insufficiency = required_text(row, "insufficiency", line_no);
    ex.reference_answer = required_text(row, "reference_answer", line_no);
    if (row.contains("trigger_condition") && !row["trigger_condition"].is_null()) {
      if (!row["trigger_condition"].is_string()) {
        throw ValidationError(fmt::format("dataset line {}: field 'trigger_condition' must be a string", line_no));
      }
      auto trigger = row["trigger_condition"].get<std::string>();
      if (!trim(trigger).empty()) ex.trigger_condition = std::move(trigger);
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

std::vector<QAExample> load_dataset(const std::filesystem::path& path) {
  auto examples = with_error_context(path.string(), [&] { return parse_dataset(read_text_file(path)); });
  if (examples.empty()) {
    spdlog::warn("dataset '{}' contains no examples", path.string());
  } else {
    const auto counts = category_counts(examples);
    spdlog::info("loaded {} examples ({} safety_tactic, {} ml_design)", examples.size(),
                 counts.at(Category::kSafetyTactic), counts.at(Category::kMlDesign));
  }
  return examples;
}

std::map<Category, std::size_t> category_counts(const std::vector<QAExample>& examples) {
  std::map<Category, std::size_t> counts{{Category::kSafetyTactic, 0}, {Category::kMlDesign, 0}};
  for (const auto& ex : examples) ++counts[ex.category];
  return counts;
}

PromptTemplate PromptTemplate::safety_engineer() { return PromptTemplate{kSafetyEngineerTemplate}; }

PromptTemplate PromptTemplate::from_text(std::string text) {
  const std::string slot = "///" + std::string(kQuestionSlot) + "///";
  if (text.find(slot) == std::string::npos) {
    throw ValidationError("prompt template must contain the slot ///{question}///");
  }
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ')) text.pop_back();
  if (!text.ends_with("OUTPUT:")) throw ValidationError("prompt template must end with OUTPUT:");
  return PromptTemplate{std::move(text)};
}

std::string build_question(const QAExample& example) {
  std::string question = fmt::format("Pipeline: {}, Known potential function insufficiency: {}",
                                     example.pipeline_text, example.insufficiency);
  if (example.trigger_condition) question += ", Trigger condition: " + *example.trigger_condition;
  return question;
}

std::string build_prompt(const QAExample& example, const PromptTemplate& tmpl) {
  return replace_all(tmpl.text, kQuestionSlot, build_question(example));
}

}  // namespace agentrag
