#include "agentrag/cli.hpp"

#include <cstdlib>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "agentrag/dataset.hpp"
#include "agentrag/error.hpp"
#include "agentrag/evaluation.hpp"
#include "agentrag/judge.hpp"
#include "agentrag/summary_index.hpp"
#include "agentrag/util.hpp"
#include "agentrag/vector_index.hpp"

namespace agentrag {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::size_t parse_count(const std::string& key, const std::string& value, bool allow_zero = false) {
  try {
    std::size_t used = 0;
    const long long n = std::stoll(value, &used);
    if (used == value.size() && (n > 0 || (allow_zero && n == 0))) return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("config key '{}': expected a {} integer, got '{}'", key,
                                allow_zero ? "non-negative" : "positive", value));
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("config key '{}': expected a number, got '{}'", key, value));
}

fs::path resolve(const fs::path& base_dir, const std::string& value) {
  fs::path p = value;
  return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
}

void set_key(AppConfig& c, const std::string& key, const std::string& value, const fs::path& base_dir) {
  if (key == "manifest") c.manifest = resolve(base_dir, value);
  else if (key == "index_dir") c.index_dir = resolve(base_dir, value);
  else if (key == "chunk_size") c.chunking.chunk_size = parse_count(key, value);
  else if (key == "chunk_overlap") c.chunking.overlap = parse_count(key, value, true);
  else if (key == "k") c.k = parse_count(key, value);
  else if (key == "k_doc") c.k_doc = parse_count(key, value);
  else if (key == "branching_factor") c.branching_factor = parse_count(key, value);
  else if (key == "generator_model") c.generator_model = value;
  else if (key == "summarizer_model") c.summarizer_model = value;
  else if (key == "router_model") c.router_model = value;
  else if (key == "judge_model") c.judge_model = value;
  else if (key == "embedding_model") c.embedding_model = value;
  else if (key == "temperature") c.temperature = parse_real(key, value);
  else if (key == "max_tokens") c.max_tokens = static_cast<int>(parse_count(key, value));
  else if (key == "backend") {
    if (value == "live") c.backend = BackendKind::kLive;
    else if (value == "scripted") c.backend = BackendKind::kScripted;
    else throw ConfigError(fmt::format("config key 'backend': expected live or scripted, got '{}'", value));
  } else if (key == "transcript") c.transcript = resolve(base_dir, value);
  else if (key == "judge_prompts") c.judge_prompts = resolve(base_dir, value);
  else if (key == "base_url") c.base_url = value;
  else if (key == "n_runs") c.n_runs = parse_count(key, value);
  else if (key == "concurrency") c.concurrency = parse_count(key, value);
  else if (key == "api_key") throw ConfigError("api_key must not be stored in a config file; set RAG_API_KEY");
  else throw ConfigError(fmt::format("unknown config key '{}'", key));
}

constexpr const char* kConfigKeys[] = {
    "manifest",   "index_dir",       "chunk_size",      "chunk_overlap",    "k",          "k_doc",
    "branching_factor", "generator_model", "summarizer_model", "router_model", "judge_model", "embedding_model",
    "temperature", "max_tokens",     "backend",         "transcript",       "judge_prompts", "base_url",
    "n_runs",     "concurrency"};

void check_doc_id_for_files(const std::string& doc_id) {
  if (doc_id.find_first_of("/\\") != std::string::npos || doc_id == "." || doc_id == "..") {
    throw ValidationError(fmt::format("doc_id '{}' cannot be used as a file name", doc_id));
  }
  if (doc_id == "pooled" || doc_id == "tools") {
    throw ValidationError(fmt::format("doc_id '{}' is reserved by the index layout", doc_id));
  }
}

std::string random_suffix() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  return fmt::format("{:016x}", rng());
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) {
    throw LoadError(fmt::format("missing index artifact '{}'; run `agentrag ingest` first", path.string()));
  }
}

void configure_logging(bool verbose) {
  static const auto logger = [] {
    auto l = spdlog::stderr_color_mt("agentrag");
    spdlog::set_default_logger(l);
    return l;
  }();
  logger->set_level(verbose ? spdlog::level::info : spdlog::level::warn);
}

std::vector<PipelineKind> parse_pipeline_list(const std::string& list) {
  std::vector<PipelineKind> kinds;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto name = std::string(trim(item));
    if (name.empty()) continue;
    const auto kind = parse_pipeline_kind(name);
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) kinds.push_back(kind);
  }
  if (kinds.empty()) throw UsageError("--pipelines names no pipeline");
  return kinds;
}

std::unique_ptr<Pipeline> make_pipeline(PipelineKind kind, const AppConfig& config, const Backends& backends) {
  switch (kind) {
    case PipelineKind::kNoRag:
      return std::make_unique<NoRagPipeline>(backends.generator);
    case PipelineKind::kDefaultRag: {
      const auto path = config.index_dir / kPooledIndexFile;
      require_file(path);
      return std::make_unique<DefaultRagPipeline>(std::make_shared<VectorIndex>(load_index(path)), config.k,
                                                  backends.generator, backends.embedder);
    }
    case PipelineKind::kAgentic:
      return std::make_unique<AgenticPipeline>(
          std::make_shared<TopLevelAgent>(load_top_level_agent(config.index_dir, config.k_doc)),
          AgentBackends{backends.embedder, backends.router, backends.generator}, config.concurrency);
  }
  throw UsageError("unknown pipeline");
}

struct GlobalOptions {
  std::string config_path;
  std::string manifest;
  std::string index_dir;
  std::string backend;
  std::string transcript;
  std::size_t concurrency = 0;
  bool verbose = false;
};

AppConfig resolve_config(const GlobalOptions& g, const CliEnvironment& env) {
  AppConfig config = g.config_path.empty() ? AppConfig{} : load_config(g.config_path);
  apply_env_overrides(config, env.env);
  if (!g.manifest.empty()) config.manifest = g.manifest;
  if (!g.index_dir.empty()) config.index_dir = g.index_dir;
  if (!g.backend.empty()) set_key(config, "backend", g.backend, {});
  if (!g.transcript.empty()) config.transcript = g.transcript;
  if (g.concurrency > 0) config.concurrency = g.concurrency;
  config.validate();
  return config;
}

int cmd_ingest(const AppConfig& config, const Backends& backends, std::ostream& out) {
  const auto summary = ingest(config, backends);
  out << fmt::format("ingested {} documents ({} chunks) into {}\n", summary.documents, summary.chunks,
                     config.index_dir.string());
  return 0;
}

struct AskOptions {
  std::string pipeline;
  std::string prompt_file;
  std::string pipeline_text;
  std::string insufficiency;
  std::string trigger;
  std::string trace_path;
};

int cmd_ask(const AppConfig& config, const Backends& backends, const AskOptions& o, std::ostream& out) {
  const auto kind = parse_pipeline_kind(o.pipeline);
  std::string prompt;
  if (!o.prompt_file.empty()) {
    if (!o.pipeline_text.empty() || !o.insufficiency.empty() || !o.trigger.empty()) {
      throw UsageError("use either --prompt-file or the question fields, not both");
    }
    prompt = read_text_file(o.prompt_file);
  } else {
    if (o.pipeline_text.empty() || o.insufficiency.empty()) {
      throw UsageError("ask needs --prompt-file, or --pipeline-text and --insufficiency");
    }
    QAExample ex;
    ex.example_id = "ask";
    ex.pipeline_text = o.pipeline_text;
    ex.insufficiency = o.insufficiency;
    if (!o.trigger.empty()) ex.trigger_condition = o.trigger;
    prompt = build_prompt(ex);
  }

  const auto pipeline = make_pipeline(kind, config, backends);
  const auto output = pipeline->run(prompt);
  out << output.answer << "\n";
  if (!o.trace_path.empty()) {
    json trace{{"pipeline", to_string(kind)},
               {"prompt", prompt},
               {"answer", output.answer},
               {"contexts", output.contexts},
               {"context_sources", output.context_sources},
               {"synthesis_prompt", output.synthesis_prompt},
               {"trace", output.trace ? to_json(*output.trace) : json(nullptr)}};
    write_file_atomic(o.trace_path, trace.dump(2) + "\n");
  }
  return 0;
}

struct EvalCliOptions {
  std::string dataset;
  std::string pipelines = "no-rag,default,agentic";
  std::size_t runs = 0;
  std::string out_dir = "eval_out";
  bool trace = false;
};

int cmd_eval(const AppConfig& config, const Backends& backends, const EvalCliOptions& o, std::ostream& out) {
  if (!fs::is_regular_file(o.dataset)) throw UsageError(fmt::format("dataset '{}' does not exist", o.dataset));
  const auto kinds = parse_pipeline_list(o.pipelines);
  const auto dataset = load_dataset(o.dataset);
  const Judge judge(backends.judge,
                    config.judge_prompts.empty() ? default_judge_prompts() : load_judge_prompts(config.judge_prompts));

  EvalOptions options;
  options.n_runs = o.runs > 0 ? o.runs : config.n_runs;
  options.max_parallel = config.concurrency;

  const fs::path out_dir = o.out_dir;
  fs::create_directories(out_dir);
  std::vector<MetricReport> reports;
  for (const auto kind : kinds) {
    const auto pipeline = make_pipeline(kind, config, backends);
    std::vector<std::vector<EvalRecord>> records;
    auto report = run_evaluation(dataset, *pipeline, judge, options, o.trace ? &records : nullptr);
    emit_report(report, ReportFormat::kJson, out_dir / fmt::format("report_{}.json", to_string(kind)));
    if (o.trace) {
      std::string lines;
      for (std::size_t run = 0; run < records.size(); ++run) {
        for (const auto& r : records[run]) {
          auto j = to_json(r);
          j["run"] = run + 1;
          lines += j.dump() + "\n";
        }
      }
      write_file_atomic(out_dir / fmt::format("records_{}.jsonl", to_string(kind)), lines);
    }
    reports.push_back(std::move(report));
  }

  const auto combined = merge_reports(reports);
  emit_report(combined, ReportFormat::kJson, out_dir / "comparison.json");
  emit_report(combined, ReportFormat::kCsv, out_dir / "comparison.csv");
  emit_report(combined, ReportFormat::kMarkdown, out_dir / "comparison.md");
  out << report_to_markdown(combined);
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void AppConfig::validate() const {
  chunking.validate();
  if (branching_factor < 2) throw ConfigError("branching_factor must be at least 2");
  if (backend == BackendKind::kScripted && transcript.empty()) {
    throw ConfigError("the scripted backend requires a transcript path");
  }
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

void apply_config_text(AppConfig& config, const std::string& text, const fs::path& base_dir) {
  std::stringstream ss(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    auto line = std::string(trim(raw));
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[' && line.back() == ']') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("config line {}: expected key = value", line_no));
    const std::string key(trim(std::string_view(line).substr(0, eq)));
    std::string value(trim(std::string_view(line).substr(eq + 1)));
    if (!value.empty() && value.front() == '"') {
      const auto close = value.find('"', 1);
      const auto rest = close == std::string::npos ? std::string_view{} : trim(std::string_view(value).substr(close + 1));
      if (close == std::string::npos || !(rest.empty() || rest.front() == '#')) {
        throw ConfigError(fmt::format("config line {}: malformed quoted value", line_no));
      }
      value = value.substr(1, close - 1);
    } else if (const auto hash = value.find(" #"); hash != std::string::npos) {
      value = std::string(trim(std::string_view(value).substr(0, hash)));
    }
    with_error_context(fmt::format("config line {}", line_no), [&] { set_key(config, key, value, base_dir); });
  }
}

AppConfig load_config(const fs::path& path) {
  AppConfig config;
  apply_config_text(config, read_text_file(path), path.parent_path());
  return config;
}

void apply_env_overrides(AppConfig& config, const EnvLookup& env) {
  for (const char* key : kConfigKeys) {
    std::string name = "RAG_" + std::string(key);
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
    if (const auto value = env(name)) {
      with_error_context(fmt::format("environment {}", name), [&] { set_key(config, key, *value, {}); });
    }
  }
}

Backends make_backends(const AppConfig& config, const CliEnvironment& env) {
  const auto params = [&](const std::string& model) {
    return CompletionParams{config.temperature, config.max_tokens, model};
  };
  std::shared_ptr<ChatModel> chat;
  std::shared_ptr<Embedder> embedder;
  if (config.backend == BackendKind::kScripted) {
    auto spec = load_transcript(config.transcript);
    chat = std::make_shared<ScriptedChat>(std::move(spec.rules));
    embedder = std::make_shared<ScriptedEmbedder>(spec.embedding_dimension);
  } else {
    LiveBackendConfig live;
    live.base_url = config.base_url;
    if (live.base_url.empty()) throw ConfigError("live backend needs base_url (config) or RAG_BASE_URL");
    const auto key = env.env("RAG_API_KEY");
    if (!key || key->empty()) throw ConfigError("live backend needs RAG_API_KEY");
    live.api_key = *key;
    live.embedding_model = config.embedding_model;
    live.max_in_flight = config.concurrency;
    auto client = std::make_shared<LiveClient>(live, env.make_transport(live.base_url));
    chat = std::make_shared<LiveChat>(client);
    embedder = std::make_shared<LiveEmbedder>(client);
  }
  return Backends{embedder, ChatEndpoint{chat, params(config.generator_model)},
                  ChatEndpoint{chat, params(config.summarizer_model)}, ChatEndpoint{chat, params(config.router_model)},
                  ChatEndpoint{chat, params(config.judge_model)}};
}

// ---------------------------------------------------------------------------
// Index directory
// ---------------------------------------------------------------------------

fs::path vector_index_file(const fs::path& dir, const std::string& doc_id) { return dir / (doc_id + ".vec.json"); }

fs::path summary_tree_file(const fs::path& dir, const std::string& doc_id) { return dir / (doc_id + ".tree.json"); }

IngestSummary ingest(const AppConfig& config, const Backends& backends) {
  if (config.manifest.empty()) throw ConfigError("no corpus manifest configured");
  const auto docs = load_corpus(config.manifest);
  if (docs.empty()) throw ValidationError("corpus manifest lists no documents");

  AgentConfig agent_cfg;
  agent_cfg.k_doc = config.k_doc;
  agent_cfg.tree.branching_factor = config.branching_factor;
  agent_cfg.tree.max_parallel = config.concurrency;

  IngestSummary summary;
  std::vector<Chunk> pooled;
  std::vector<DocumentTool> tools;
  for (const auto& doc : docs) {
    check_doc_id_for_files(doc.doc_id);
    const auto chunks = chunk_document(doc, config.chunking);
    spdlog::info("'{}': {} chunks", doc.doc_id, chunks.size());
    summary.chunks += chunks.size();
    pooled.insert(pooled.end(), chunks.begin(), chunks.end());
    tools.push_back(DocumentTool{doc.doc_id, doc.description,
                                 build_document_agent(doc, chunks, *backends.embedder, backends.summarizer, agent_cfg)});
  }
  const auto pooled_index = build_index(pooled, *backends.embedder);
  const auto top = build_top_level_agent(std::move(tools), *backends.embedder);
  summary.documents = docs.size();

  const fs::path target = config.index_dir;
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path staging = target.string() + ".staging-" + random_suffix();
  try {
    fs::create_directories(staging);
    for (const auto& tool : top.tools()) {
      save_index(tool.agent.vector_index, vector_index_file(staging, tool.doc_id));
      save_tree(tool.agent.summary_tree, summary_tree_file(staging, tool.doc_id));
    }
    save_index(pooled_index, staging / kPooledIndexFile);
    save_index(top.tool_index(), staging / kToolIndexFile);

    const fs::path retired = target.string() + ".old-" + random_suffix();
    const bool had_previous = fs::exists(target);
    if (had_previous) fs::rename(target, retired);
    fs::rename(staging, target);
    if (had_previous) fs::remove_all(retired);
  } catch (const fs::filesystem_error& e) {
    std::error_code ignored;
    fs::remove_all(staging, ignored);
    throw LoadError(fmt::format("cannot write index directory '{}': {}", target.string(), e.what()));
  } catch (...) {
    std::error_code ignored;
    fs::remove_all(staging, ignored);
    throw;
  }
  return summary;
}

TopLevelAgent load_top_level_agent(const fs::path& index_dir, std::size_t k_doc) {
  const auto tools_path = index_dir / kToolIndexFile;
  require_file(tools_path);
  auto tool_index = load_index(tools_path);
  std::vector<DocumentTool> tools;
  for (const auto& entry : tool_index.entries()) {
    const auto vec_path = vector_index_file(index_dir, entry.doc_id);
    const auto tree_path = summary_tree_file(index_dir, entry.doc_id);
    require_file(vec_path);
    require_file(tree_path);
    tools.push_back(DocumentTool{entry.doc_id, entry.text,
                                 DocumentAgent{entry.doc_id, load_index(vec_path), k_doc, load_tree(tree_path)}});
  }
  return TopLevelAgent(std::move(tools), std::move(tool_index));
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliEnvironment& env) {
  CLI::App app{"Agent-based retrieval-augmented generation for safety requirements", "agentrag"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("-c,--config", g.config_path, "Config file (key = value)");
  app.add_option("--manifest", g.manifest, "Corpus manifest JSON");
  app.add_option("--index-dir", g.index_dir, "Index directory");
  app.add_option("--backend", g.backend, "live or scripted")->check(CLI::IsMember({"live", "scripted"}));
  app.add_option("--transcript", g.transcript, "Scripted backend transcript JSON");
  app.add_option("--concurrency", g.concurrency, "Maximum in-flight model requests");
  app.add_flag("-v,--verbose", g.verbose, "Log progress to stderr");

  auto* ingest_cmd = app.add_subcommand("ingest", "Chunk, embed and summarize the corpus into the index directory");

  AskOptions ask;
  auto* ask_cmd = app.add_subcommand("ask", "Answer one question through a pipeline");
  ask_cmd->add_option("--pipeline", ask.pipeline, "no-rag, default or agentic")
      ->required()
      ->check(CLI::IsMember({"no-rag", "default", "agentic"}));
  ask_cmd->add_option("--prompt-file", ask.prompt_file, "File holding the full prompt");
  ask_cmd->add_option("--pipeline-text", ask.pipeline_text, "Component pipeline");
  ask_cmd->add_option("--insufficiency", ask.insufficiency, "Known functional insufficiency");
  ask_cmd->add_option("--trigger", ask.trigger, "Trigger condition");
  ask_cmd->add_option("--trace", ask.trace_path, "Write contexts and agent trace JSON here");

  EvalCliOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate pipelines on a dataset over repeated runs");
  eval_cmd->add_option("--dataset", ev.dataset, "Dataset JSONL")->required();
  eval_cmd->add_option("--pipelines", ev.pipelines, "Comma-separated list of no-rag, default, agentic");
  eval_cmd->add_option("--runs", ev.runs, "Independent runs (default: config n_runs)");
  eval_cmd->add_option("--out", ev.out_dir, "Output directory");
  eval_cmd->add_flag("--trace", ev.trace, "Also write per-record JSONL with judge artifacts and agent traces");

  std::vector<const char*> argv{"agentrag"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::Error& e) {
    err << "error: usage: " << e.what() << "\n";
    return 1;
  }

  try {
    configure_logging(g.verbose);
    const auto config = resolve_config(g, env);
    if (*eval_cmd) {
      if (!fs::is_regular_file(ev.dataset)) throw UsageError(fmt::format("dataset '{}' does not exist", ev.dataset));
      parse_pipeline_list(ev.pipelines);
    }
    const auto backends = make_backends(config, env);
    if (*ingest_cmd) return cmd_ingest(config, backends, out);
    if (*ask_cmd) return cmd_ask(config, backends, ask, out);
    return cmd_eval(config, backends, ev, out);
  } catch (const UsageError& e) {
    err << "error: usage: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: runtime: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace agentrag
