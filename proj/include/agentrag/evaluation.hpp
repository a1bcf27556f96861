#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentrag/dataset.hpp"
#include "agentrag/error.hpp"
#include "agentrag/judge.hpp"
#include "agentrag/metrics.hpp"
#include "agentrag/pipelines.hpp"

namespace agentrag {

/// One (question, contexts, answer, reference) tuple with every judge
/// artifact that produced its metric values.
struct EvalRecord {
  std::string example_id;
  PipelineKind pipeline = PipelineKind::kNoRag;
  std::string question;
  std::string prompt;
  std::vector<std::string> contexts;
  std::vector<std::string> context_sources;
  std::string answer;
  std::string reference;

  ScoreOutcome nass;
  FlagOutcome relevance;
  FlagOutcome usage;
  ConsistencyOutcome consistency;
  /// Absent metric = skipped for this record (or not applicable).
  std::map<Metric, double> metrics;

  bool failed = false;
  std::string error;
  std::optional<AgentTrace> trace;
};

nlohmann::json to_json(const EvalRecord& record);

/// Metrics reported for a pipeline kind: NASS only without retrieval.
std::vector<Metric> applicable_metrics(PipelineKind kind);

/// Runs the pipeline on one example and judges the result. Pipeline and
/// judge exceptions are not caught here.
EvalRecord evaluate_record(const QAExample& example, const Pipeline& pipeline, const Judge& judge,
                           const PromptTemplate& tmpl = PromptTemplate::safety_engineer());

struct RunAggregate {
  double mean = 0.0;
  /// Sample standard deviation of the run means over sqrt(n); 0 for n = 1.
  double std_error = 0.0;
};

/// Throws ValidationError for an empty list.
RunAggregate aggregate_runs(std::span<const double> run_means);

struct MetricStats {
  /// Absent when no run produced a value.
  std::optional<double> mean;
  std::optional<double> std_error;
  std::vector<double> run_means;
  /// Runs that produced a value.
  std::size_t n_runs = 0;
  /// Record-level skips summed over all runs.
  std::size_t skipped = 0;

  friend bool operator==(const MetricStats&, const MetricStats&) = default;
};

struct PipelineReport {
  PipelineKind kind = PipelineKind::kNoRag;
  std::map<Metric, MetricStats> metrics;
  /// Records that failed, summed over all runs.
  std::size_t failed_records = 0;

  friend bool operator==(const PipelineReport&, const PipelineReport&) = default;
};

struct MetricReport {
  std::size_t n_examples = 0;
  std::size_t n_runs = 0;
  std::vector<PipelineReport> pipelines;

  const PipelineReport* find(PipelineKind kind) const;
  const MetricStats* find(PipelineKind kind, Metric metric) const;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

class EvaluationAborted : public Error {
 public:
  using Error::Error;
};

struct EvalOptions {
  std::size_t n_runs = 10;
  std::size_t max_parallel = 4;
  /// A run aborts when more than this share of its records fail.
  double max_failure_fraction = 0.2;
  PromptTemplate prompt_template = PromptTemplate::safety_engineer();
};

/// Evaluates every example n_runs times. Per run, each metric's run mean
/// averages the non-skipped records; the report holds the mean of run means
/// and its standard error. `records` (optional) receives every record by run.
MetricReport run_evaluation(const std::vector<QAExample>& dataset, const Pipeline& pipeline, const Judge& judge,
                            const EvalOptions& options = {}, std::vector<std::vector<EvalRecord>>* records = nullptr);

/// Concatenates single-pipeline reports over the same dataset, ordered
/// no_rag, default_rag, agentic.
MetricReport merge_reports(const std::vector<MetricReport>& reports);

enum class ReportFormat { kJson, kCsv, kMarkdown };

nlohmann::json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& doc);
/// Header "pipeline,metric,mean,stderr,n_runs,skipped"; one row per
/// pipeline and applicable metric.
std::string report_to_csv(const MetricReport& report);
/// One row per metric, one column per pipeline.
std::string report_to_markdown(const MetricReport& report);

std::string render_report(const MetricReport& report, ReportFormat format);
void emit_report(const MetricReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace agentrag
