#include "agentrag/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "agentrag/util.hpp"

namespace agentrag {

namespace {

using nlohmann::json;

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json optional_json(const std::optional<bool>& v) { return v ? json(*v) : json(nullptr); }

template <class T>
json optional_list(const std::vector<std::optional<T>>& values) {
  json out = json::array();
  for (const auto& v : values) out.push_back(optional_json(v));
  return out;
}

std::optional<double> read_optional(const json& obj, const char* key) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  return obj[key].get<double>();
}

std::string format_stat(const MetricStats& s) {
  if (!s.mean) return "n/a";
  return fmt::format("{:.3f} ± {:.3f}", *s.mean, s.std_error.value_or(0.0));
}

}  // namespace

std::vector<Metric> applicable_metrics(PipelineKind kind) {
  if (kind == PipelineKind::kNoRag) return {Metric::kNass};
  return {std::begin(kAllMetrics), std::end(kAllMetrics)};
}

EvalRecord evaluate_record(const QAExample& example, const Pipeline& pipeline, const Judge& judge,
                           const PromptTemplate& tmpl) {
  EvalRecord record;
  record.example_id = example.example_id;
  record.pipeline = pipeline.kind();
  record.question = build_question(example);
  record.prompt = build_prompt(example, tmpl);
  record.reference = example.reference_answer;

  auto output = pipeline.run(record.prompt);
  record.answer = std::move(output.answer);
  record.contexts = std::move(output.contexts);
  record.context_sources = std::move(output.context_sources);
  record.trace = std::move(output.trace);

  record.nass = nass(judge, record.question, record.reference, record.answer);
  if (record.nass.value) record.metrics[Metric::kNass] = *record.nass.value;

  if (record.pipeline == PipelineKind::kNoRag || record.contexts.empty()) return record;

  record.relevance = retrieval_precision(judge, record.question, record.contexts);
  record.usage = augmentation_accuracy(judge, record.contexts, record.answer);
  record.consistency = answer_consistency(judge, record.answer, record.contexts);

  if (record.relevance.value) record.metrics[Metric::kRp] = *record.relevance.value;
  if (record.usage.value) record.metrics[Metric::kAa] = *record.usage.value;
  const auto relevant = complete_flags(record.relevance.verdicts);
  const auto used = complete_flags(record.usage.verdicts);
  if (relevant && used) {
    if (const auto ap = augmentation_precision(*relevant, *used)) record.metrics[Metric::kAp] = *ap;
  }
  if (record.consistency.value) record.metrics[Metric::kAc] = *record.consistency.value;
  return record;
}

RunAggregate aggregate_runs(std::span<const double> run_means) {
  if (run_means.empty()) throw ValidationError("cannot aggregate zero runs");
  const double n = static_cast<double>(run_means.size());
  // Shifting by the first value keeps identical run means exact.
  const double shift = run_means.front();
  double sum_dev = 0.0;
  for (double v : run_means) sum_dev += v - shift;
  const double mean_dev = sum_dev / n;
  const double mean = shift + mean_dev;
  if (run_means.size() == 1) return {mean, 0.0};
  double sum_sq = 0.0;
  for (double v : run_means) sum_sq += (v - shift - mean_dev) * (v - shift - mean_dev);
  const double sample_sd = std::sqrt(sum_sq / (n - 1.0));
  return {mean, sample_sd / std::sqrt(n)};
}

const PipelineReport* MetricReport::find(PipelineKind kind) const {
  const auto it = std::find_if(pipelines.begin(), pipelines.end(), [&](const PipelineReport& p) { return p.kind == kind; });
  return it == pipelines.end() ? nullptr : &*it;
}

const MetricStats* MetricReport::find(PipelineKind kind, Metric metric) const {
  const auto* p = find(kind);
  if (!p) return nullptr;
  const auto it = p->metrics.find(metric);
  return it == p->metrics.end() ? nullptr : &it->second;
}

MetricReport run_evaluation(const std::vector<QAExample>& dataset, const Pipeline& pipeline, const Judge& judge,
                            const EvalOptions& options, std::vector<std::vector<EvalRecord>>* records) {
  if (options.n_runs == 0) throw ValidationError("n_runs must be at least 1");
  const auto kind = pipeline.kind();
  const auto metrics = applicable_metrics(kind);

  PipelineReport pipeline_report;
  pipeline_report.kind = kind;
  for (Metric m : metrics) pipeline_report.metrics[m];

  for (std::size_t run = 0; run < options.n_runs; ++run) {
    std::vector<EvalRecord> run_records(dataset.size());
    parallel_for(dataset.size(), options.max_parallel, [&](std::size_t i) {
      try {
        run_records[i] = evaluate_record(dataset[i], pipeline, judge, options.prompt_template);
      } catch (const std::exception& e) {
        EvalRecord failed;
        failed.example_id = dataset[i].example_id;
        failed.pipeline = kind;
        failed.question = build_question(dataset[i]);
        failed.reference = dataset[i].reference_answer;
        failed.failed = true;
        failed.error = e.what();
        run_records[i] = std::move(failed);
      }
    });

    const auto failures = static_cast<std::size_t>(
        std::count_if(run_records.begin(), run_records.end(), [](const EvalRecord& r) { return r.failed; }));
    pipeline_report.failed_records += failures;
    if (static_cast<double>(failures) > options.max_failure_fraction * static_cast<double>(dataset.size())) {
      const auto first = std::find_if(run_records.begin(), run_records.end(), [](const EvalRecord& r) { return r.failed; });
      throw EvaluationAborted(fmt::format("{} run {} aborted: {} of {} records failed (first: {})", to_string(kind),
                                          run + 1, failures, dataset.size(), first->error));
    }
    for (const auto& r : run_records) {
      if (r.failed) spdlog::warn("{} run {}: example '{}' failed: {}", to_string(kind), run + 1, r.example_id, r.error);
    }

    for (Metric m : metrics) {
      auto& stats = pipeline_report.metrics[m];
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& r : run_records) {
        if (r.failed) continue;
        const auto it = r.metrics.find(m);
        if (it == r.metrics.end()) {
          ++stats.skipped;
          continue;
        }
        sum += it->second;
        ++count;
      }
      if (count > 0) stats.run_means.push_back(sum / static_cast<double>(count));
    }
    if (records) records->push_back(std::move(run_records));
  }

  for (auto& [metric, stats] : pipeline_report.metrics) {
    stats.n_runs = stats.run_means.size();
    if (stats.run_means.empty()) continue;
    const auto agg = aggregate_runs(stats.run_means);
    stats.mean = agg.mean;
    stats.std_error = agg.std_error;
  }

  MetricReport report;
  report.n_examples = dataset.size();
  report.n_runs = options.n_runs;
  report.pipelines.push_back(std::move(pipeline_report));
  return report;
}

MetricReport merge_reports(const std::vector<MetricReport>& reports) {
  MetricReport merged;
  if (reports.empty()) return merged;
  merged.n_examples = reports.front().n_examples;
  merged.n_runs = reports.front().n_runs;
  for (const auto& r : reports) {
    if (r.n_examples != merged.n_examples || r.n_runs != merged.n_runs) {
      throw ValidationError("cannot merge reports over different datasets or run counts");
    }
    for (const auto& p : r.pipelines) {
      if (merged.find(p.kind)) throw ValidationError(fmt::format("pipeline {} reported twice", to_string(p.kind)));
      merged.pipelines.push_back(p);
    }
  }
  std::stable_sort(merged.pipelines.begin(), merged.pipelines.end(),
                   [](const PipelineReport& a, const PipelineReport& b) { return a.kind < b.kind; });
  return merged;
}

json report_to_json(const MetricReport& report) {
  json pipelines = json::array();
  for (const auto& p : report.pipelines) {
    json metrics = json::array();
    for (Metric m : kAllMetrics) {
      const auto it = p.metrics.find(m);
      if (it == p.metrics.end()) continue;
      const auto& s = it->second;
      metrics.push_back({{"metric", to_string(m)},
                         {"mean", optional_json(s.mean)},
                         {"stderr", optional_json(s.std_error)},
                         {"run_means", s.run_means},
                         {"n_runs", s.n_runs},
                         {"skipped", s.skipped}});
    }
    pipelines.push_back({{"pipeline", to_string(p.kind)}, {"failed_records", p.failed_records}, {"metrics", metrics}});
  }
  return {{"version", 1}, {"n_examples", report.n_examples}, {"n_runs", report.n_runs}, {"pipelines", pipelines}};
}

MetricReport report_from_json(const json& doc) {
  try {
    MetricReport report;
    report.n_examples = doc.at("n_examples").get<std::size_t>();
    report.n_runs = doc.at("n_runs").get<std::size_t>();
    for (const auto& p : doc.at("pipelines")) {
      PipelineReport pr;
      pr.kind = parse_pipeline_kind(p.at("pipeline").get<std::string>());
      pr.failed_records = p.at("failed_records").get<std::size_t>();
      for (const auto& m : p.at("metrics")) {
        const auto metric = parse_metric(m.at("metric").get<std::string>());
        if (!metric) throw LoadError(fmt::format("report: unknown metric '{}'", m["metric"].dump()));
        MetricStats s;
        s.mean = read_optional(m, "mean");
        s.std_error = read_optional(m, "stderr");
        s.run_means = m.at("run_means").get<std::vector<double>>();
        s.n_runs = m.at("n_runs").get<std::size_t>();
        s.skipped = m.at("skipped").get<std::size_t>();
        pr.metrics[*metric] = std::move(s);
      }
      report.pipelines.push_back(std::move(pr));
    }
    return report;
  } catch (const json::exception& e) {
    throw LoadError(fmt::format("malformed report: {}", e.what()));
  }
}

std::string report_to_csv(const MetricReport& report) {
  std::string out = "pipeline,metric,mean,stderr,n_runs,skipped\n";
  for (const auto& p : report.pipelines) {
    for (Metric m : applicable_metrics(p.kind)) {
      const auto it = p.metrics.find(m);
      if (it == p.metrics.end()) continue;
      const auto& s = it->second;
      out += fmt::format("{},{},{},{},{},{}\n", to_string(p.kind), to_string(m),
                         s.mean ? fmt::format("{}", *s.mean) : "", s.std_error ? fmt::format("{}", *s.std_error) : "",
                         s.n_runs, s.skipped);
    }
  }
  return out;
}

std::string report_to_markdown(const MetricReport& report) {
  std::string out = fmt::format("Mean ± standard error over {} runs, {} examples.\n\n| Metric |", report.n_runs,
                                report.n_examples);
  for (const auto& p : report.pipelines) out += fmt::format(" {} |", to_string(p.kind));
  out += "\n| --- |";
  for (std::size_t i = 0; i < report.pipelines.size(); ++i) out += " --- |";
  out += '\n';
  for (Metric m : kAllMetrics) {
    out += fmt::format("| {} |", to_string(m));
    for (const auto& p : report.pipelines) {
      const auto it = p.metrics.find(m);
      out += fmt::format(" {} |", it == p.metrics.end() ? std::string("n/a") : format_stat(it->second));
    }
    out += '\n';
  }
  return out;
}

std::string render_report(const MetricReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: return report_to_json(report).dump(2) + "\n";
    case ReportFormat::kCsv: return report_to_csv(report);
    case ReportFormat::kMarkdown: return report_to_markdown(report);
  }
  return {};
}

void emit_report(const MetricReport& report, ReportFormat format, const std::filesystem::path& path) {
  write_file_atomic(path, render_report(report, format));
}

json to_json(const EvalRecord& r) {
  json metrics = json::object();
  for (const auto& [m, v] : r.metrics) metrics[std::string(to_string(m))] = v;
  json out{{"example_id", r.example_id},
           {"pipeline", to_string(r.pipeline)},
           {"question", r.question},
           {"contexts", r.contexts},
           {"context_sources", r.context_sources},
           {"answer", r.answer},
           {"reference", r.reference},
           {"failed", r.failed},
           {"error", r.error},
           {"metrics", metrics},
           {"judge",
            {{"nass_reply", r.nass.reply},
             {"nass_score", optional_json(r.nass.raw_score)},
             {"relevance", optional_list(r.relevance.verdicts)},
             {"usage", optional_list(r.usage.verdicts)},
             {"main_points", r.consistency.points},
             {"main_points_supported", optional_list(r.consistency.supported)},
             {"derived_from_context", optional_json(r.consistency.derived_from_context)}}}};
  if (r.trace) out["trace"] = to_json(*r.trace);
  return out;
}

}  // namespace agentrag
