#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agentrag {

enum class Category { kSafetyTactic, kMlDesign };

std::string_view to_string(Category category);
std::optional<Category> parse_category(std::string_view name);

/// One safety-requirement question: a component pipeline, a known functional
/// insufficiency, optionally a trigger condition, and the expert requirement.
struct QAExample {
  std::string example_id;
  Category category = Category::kSafetyTactic;
  std::string pipeline_text;
  std::string insufficiency;
  std::optional<std::string> trigger_condition;
  std::string reference_answer;

  friend bool operator==(const QAExample&, const QAExample&) = default;
};

/// JSONL, one example per line; blank lines are ignored. Throws
/// ValidationError naming the 1-based line on any schema violation.
std::vector<QAExample> load_dataset(const std::filesystem::path& path);
std::vector<QAExample> parse_dataset(std::string_view jsonl);

std::map<Category, std::size_t> category_counts(const std::vector<QAExample>& examples);

/// Instruction block wrapping each question. `text` holds a `{question}`
/// slot between `///` delimiters and ends with "OUTPUT:".
struct PromptTemplate {
  std::string text;

  static PromptTemplate safety_engineer();
  /// Validates the slot and the trailing "OUTPUT:".
  static PromptTemplate from_text(std::string text);
};

/// "Pipeline: {p}, Known potential function insufficiency: {i}" plus
/// ", Trigger condition: {t}" when a trigger is present.
std::string build_question(const QAExample& example);

std::string build_prompt(const QAExample& example, const PromptTemplate& tmpl = PromptTemplate::safety_engineer());

}  // namespace agentrag
