#include "medtx/cli.hpp"

#include <pthread.h>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "medtx/errors.hpp"
#include "medtx/http_server.hpp"
#include "medtx/pipeline.hpp"
#include "medtx/service.hpp"

namespace medtx::cli {

namespace {

namespace fs = std::filesystem;

struct Resources {
  std::string data_dir = MEDTX_DEFAULT_DATA_DIR;
  std::string mapping;
  std::string stopwords;
  std::string lemmas;

  fs::path mapping_path() const { return mapping.empty() ? fs::path(data_dir) / "specialty_mapping.tsv" : fs::path(mapping); }
  fs::path stopwords_path() const { return stopwords.empty() ? fs::path(data_dir) / "stopwords.txt" : fs::path(stopwords); }
  fs::path lemmas_path() const { return lemmas.empty() ? fs::path(data_dir) / "lemmas.tsv" : fs::path(lemmas); }
};

void add_resource_flags(CLI::App* cmd, Resources& r) {
  cmd->add_option("--data-dir", r.data_dir, "Directory holding the default mapping and lexical resources")
      ->capture_default_str();
  cmd->add_option("--mapping", r.mapping, "Specialty mapping TSV (default: <data-dir>/specialty_mapping.tsv)");
  cmd->add_option("--stopwords", r.stopwords, "Stopword list (default: <data-dir>/stopwords.txt)");
  cmd->add_option("--lemmas", r.lemmas, "Lemma table TSV (default: <data-dir>/lemmas.tsv)");
}

CurationResult load_curated(const fs::path& data, const SpecialtyMapping& mapping) {
  return curate(load_reports(data), mapping);
}

void write_text_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << bytes;
  if (!out.flush()) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::string now_timestamp() { return format_timestamp(std::chrono::system_clock::now()); }

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string percent(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v * 100.0 << '%';
  return s.str();
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string data;
  std::string histogram_out;
  std::string json_out;
  Resources res;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  const auto mapping = SpecialtyMapping::load(a.res.mapping_path());
  const auto curated = load_curated(a.data, mapping);
  const auto stats = compute_stats(curated.examples);

  out << "reports        " << stats.report_count << '\n';
  for (BodySystem c : kClassOrder) {
    const auto it = stats.per_class_counts.find(c);
    out << std::left << std::setw(15) << to_string(c) << (it == stats.per_class_counts.end() ? 0 : it->second)
        << '\n';
  }
  out << "unique words   " << stats.unique_word_count << '\n';
  out << "mean length    " << std::fixed << std::setprecision(2) << stats.mean_char_length << '\n';
  out << "excluded       " << curated.excluded_unmapped << " unmapped, " << curated.excluded_empty << " empty\n";
  out.unsetf(std::ios::fixed);

  if (!a.histogram_out.empty()) {
    std::string csv = "bucket_start,bucket_end,count\n";
    for (const auto& b : stats.length_histogram) {
      csv += std::to_string(b.start) + "," + std::to_string(b.end) + "," + std::to_string(b.count) + "\n";
    }
    write_text_file(a.histogram_out, csv);
  }
  if (!a.json_out.empty()) {
    Json j = to_json(stats);
    j["excluded_unmapped"] = curated.excluded_unmapped;
    j["excluded_empty"] = curated.excluded_empty;
    write_text_file(a.json_out, j.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string model = "logreg";
  std::string out;
  std::uint64_t seed = 0;
  bool no_stratify = false;
  bool no_pca = false;
  bool grid_search = false;
  std::size_t max_features = 0;
  PipelineOptions opt;
  Resources res;
};

Json manifest_for(const TrainArgs& a, const ModelArtifact& artifact, const std::string& bytes,
                  const std::vector<std::string>& command_line, const std::string& started,
                  const std::string& finished) {
  const auto hashes = artifact_hashes(artifact);
  return {{"seed", a.seed},
          {"model", a.model},
          {"artifact", fs::path(a.out).filename().string()},
          {"artifact_hash", content_hash(bytes)},
          {"config_hashes", {{"clean", hashes.clean}, {"tfidf", hashes.tfidf}, {"pca", hashes.pca}, {"model", hashes.model}}},
          {"dataset_fingerprint", artifact.dataset_fingerprint},
          {"command_line", command_line},
          {"test_accuracy", artifact.test_accuracy},
          {"started_at", started},
          {"finished_at", finished}};
}

int cmd_train(TrainArgs a, const std::vector<std::string>& command_line, std::ostream& out) {
  const std::string started = now_timestamp();
  const auto family = parse_model_family(a.model);
  if (!family) throw Error(ErrorKind::Config, "unknown model family '" + a.model + "'");
  PipelineOptions opt = a.opt;
  opt.family = *family;
  opt.split.seed = a.seed;
  opt.split.stratified = !a.no_stratify;
  opt.gd.seed = a.seed;
  opt.forest_seed = a.seed;
  opt.network.seed = a.seed;
  opt.use_pca = !a.no_pca;
  if (a.max_features > 0) opt.max_features = a.max_features;
  if (a.grid_search) opt.grid = default_logreg_grid(opt.gd);
  if (a.out.empty()) a.out = a.model + ".model.json";

  const auto mapping = SpecialtyMapping::load(a.res.mapping_path());
  const auto clean = CleanConfig::load(a.res.stopwords_path(), a.res.lemmas_path());
  const auto curated = load_curated(a.data, mapping);
  const auto outcome = train_pipeline(curated.examples, clean, mapping, opt);

  const std::string bytes = serialize_artifact(outcome.artifact);
  write_text_file(a.out, bytes);
  const auto manifest = manifest_for(a, outcome.artifact, bytes, command_line, started, now_timestamp());
  write_text_file(a.out + ".manifest.json", manifest.dump(2) + "\n");

  out << "model          " << a.model << '\n';
  out << "artifact       " << a.out << '\n';
  out << "test accuracy  " << percent(outcome.test_report.accuracy) << '\n';
  if (outcome.artifact.pca) out << "pca components " << outcome.artifact.pca->components.rows() << '\n';
  out << '\n' << render_table(outcome.test_report);
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string artifact;
  std::string data;
  std::string json_out;
  bool all = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto artifact = load_artifact(a.artifact);
  const auto curated = load_curated(a.data, artifact.mapping);
  if (curated.examples.empty()) throw Error(ErrorKind::EmptyDataset, "no curated examples");
  if (dataset_fingerprint(curated.examples) != artifact.dataset_fingerprint) {
    throw Error(ErrorKind::Input, "dataset does not match the one the artifact was trained on");
  }
  const auto report = a.all ? evaluate_examples(artifact, curated.examples) : evaluate_artifact(artifact, curated.examples);
  out << "model     " << to_string(artifact.family) << '\n';
  out << "accuracy  " << percent(report.accuracy) << '\n';
  out << "macro F1  " << format_metric(report.macro_f1) << "\n\n";
  out << render_table(report);
  if (!a.json_out.empty()) write_text_file(a.json_out, to_json(report).dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct ClassifyArgs {
  std::string artifact;
  std::optional<std::string> text;
  std::string file;
  bool json = false;
};

int cmd_classify(const ClassifyArgs& a, std::ostream& out) {
  std::string text;
  if (a.text) {
    text = *a.text;
  } else {
    std::ifstream in(a.file, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + a.file);
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  const auto artifact = load_artifact(a.artifact);
  const auto p = classify_text(artifact, text);
  if (a.json) {
    Json probs = Json::object();
    for (std::size_t c = 0; c < kNumClasses; ++c) probs[std::string(to_string(kClassOrder[c]))] = p.probabilities[c];
    out << Json{{"label", std::string(to_string(p.label))}, {"probabilities", probs}}.dump() << '\n';
    return 0;
  }
  out << "label  " << to_string(p.label) << '\n';
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out << std::left << std::setw(14) << to_string(kClassOrder[c]) << std::fixed << std::setprecision(6)
        << p.probabilities[c] << '\n';
  }
  out.unsetf(std::ios::fixed);
  return 0;
}

// ---------------------------------------------------------------------------

struct ExportArgs {
  std::string data;
  std::string artifact;
  std::string out;
  std::size_t max_features = 0;
  Resources res;
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
  std::optional<ModelArtifact> artifact;
  if (!a.artifact.empty()) artifact = load_artifact(a.artifact);
  const auto mapping = artifact ? artifact->mapping : SpecialtyMapping::load(a.res.mapping_path());
  const auto clean = artifact ? artifact->clean : CleanConfig::load(a.res.stopwords_path(), a.res.lemmas_path());
  const auto curated = load_curated(a.data, mapping);

  std::vector<TokenizedDoc> docs;
  for (const auto& ex : curated.examples) docs.push_back(preprocess_document(ex.transcription, clean, ex.id));
  const TfidfModel tfidf = artifact ? artifact->tfidf
                                    : fit_tfidf(docs, a.max_features > 0 ? std::optional(a.max_features) : std::nullopt);
  std::vector<FeatureVector> vectors;
  for (const auto& d : docs) vectors.push_back(transform_tfidf(tfidf, d));
  const Eigen::MatrixXd dense = densify(vectors);
  const PcaModel pca = fit_pca_components(dense, 2);

  std::string csv;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const Eigen::VectorXd xy = project(pca, Eigen::VectorXd(dense.row(static_cast<Eigen::Index>(i)).transpose()));
    csv += format_real(xy(0)) + "," + format_real(xy.size() > 1 ? xy(1) : 0.0) + "," +
           std::string(to_string(curated.examples[i].label)) + "\n";
  }
  write_text_file(a.out, csv);
  out << "wrote " << vectors.size() << " rows to " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string config;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  ServiceConfig config = a.config.empty() ? ServiceConfig{} : ServiceConfig::load(a.config);
  config.apply_env();

  AccountStore accounts(config.accounts_path);
  RecordStore records(config.store_path);
  ModelRegistry models;
  for (const auto& p : config.artifact_paths) models.load_file(p);
  ClassificationService service(accounts, records, models, make_extractor(config),
                                std::chrono::seconds(config.token_ttl_seconds));
  HttpServer server(service, config.static_dir);
  if (!server.bind(config.listen_address, config.port)) {
    throw Error(ErrorKind::Io, "cannot bind " + config.listen_address + ":" + std::to_string(config.port));
  }

  // Block the shutdown signals here so the worker threads inherit the mask
  // and only this thread receives them via sigwait.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread worker([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  out << "listening on " << config.listen_address << ":" << config.port << " with " << models.models().size()
      << " model(s)" << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  worker.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  return 0;
}

// ---------------------------------------------------------------------------

struct AddUserArgs {
  std::string accounts;
  std::string username;
  std::optional<std::string> password;
  bool password_stdin = false;
  std::string role = "clinician";
};

int cmd_add_user(const AddUserArgs& a, std::ostream& out) {
  const auto role = parse_role(a.role);
  if (!role) throw Error(ErrorKind::Validation, "role must be 'clinician' or 'admin'");
  std::string password;
  if (a.password_stdin) {
    std::getline(std::cin, password);
    if (!password.empty() && password.back() == '\r') password.pop_back();
  } else if (a.password) {
    password = *a.password;
  } else {
    throw Error(ErrorKind::Validation, "provide --password or --password-stdin");
  }
  AccountStore store(a.accounts);
  store.add_user(a.username, password, *role);
  out << "added " << to_string(*role) << " '" << a.username << "'\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clinical transcription classifier: curate, train, evaluate, classify and serve."};
  app.name("medtx");
  app.require_subcommand(1);
  app.set_config("--settings", "", "TOML/INI file whose keys mirror the long flags (flags win)");

  StatsArgs stats;
  auto* s = app.add_subcommand("stats", "Dataset statistics and length histogram");
  s->add_option("--data", stats.data, "Transcription CSV")->required()->check(CLI::ExistingFile);
  s->add_option("--histogram-out", stats.histogram_out, "Write the length histogram as CSV");
  s->add_option("--json-out", stats.json_out, "Write the statistics as JSON");
  add_resource_flags(s, stats.res);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model and write artifact + manifest");
  t->add_option("--data", train.data, "Transcription CSV")->required()->check(CLI::ExistingFile);
  t->add_option("--model", train.model, "logreg | forest | lstm | cnn-lstm")
      ->check(CLI::IsMember({"logreg", "forest", "lstm", "cnn-lstm"}))
      ->capture_default_str();
  t->add_option("--out", train.out, "Artifact path (default: <model>.model.json)");
  t->add_option("--seed", train.seed, "Seed for the split and every model")->capture_default_str();
  t->add_option("--train-fraction", train.opt.split.train_fraction)->capture_default_str();
  t->add_flag("--no-stratify", train.no_stratify, "Shuffle-split without per-class stratification");
  t->add_option("--max-features", train.max_features, "Keep only the most frequent terms (0 = all)");
  t->add_option("--epochs", train.opt.gd.epochs, "Softmax regression epochs")->capture_default_str();
  t->add_option("--batch-size", train.opt.gd.batch_size, "Softmax regression batch size")->capture_default_str();
  t->add_option("--lr", train.opt.gd.learning_rate, "Softmax regression learning rate")->capture_default_str();
  t->add_option("--l2", train.opt.gd.l2_penalty)->capture_default_str();
  t->add_flag("--grid-search", train.grid_search, "Pick lr and l2 on a validation split");
  t->add_option("--validation-fraction", train.opt.validation_fraction)->capture_default_str();
  t->add_flag("--no-pca", train.no_pca, "Train the logistic model on raw TF-IDF");
  t->add_option("--pca-threshold", train.opt.pca_threshold)->capture_default_str();
  t->add_option("--n-estimators", train.opt.n_estimators)->capture_default_str();
  t->add_option("--max-depth", train.opt.max_depth)->capture_default_str();
  t->add_option("--nn-epochs", train.opt.network.epochs)->capture_default_str();
  t->add_option("--nn-batch-size", train.opt.network.batch_size)->capture_default_str();
  t->add_option("--nn-lr", train.opt.network.learning_rate)->capture_default_str();
  t->add_option("--embed-dim", train.opt.network.embed_dim)->capture_default_str();
  t->add_option("--hidden-size", train.opt.network.hidden_size)->capture_default_str();
  t->add_option("--filters", train.opt.network.n_filters)->capture_default_str();
  t->add_option("--kernel-width", train.opt.network.kernel_width)->capture_default_str();
  t->add_option("--max-len", train.opt.network.max_len)->capture_default_str();
  t->add_option("--init-scale", train.opt.network.init_scale)->capture_default_str();
  t->add_option("--forget-bias", train.opt.network.forget_bias)->capture_default_str();
  add_resource_flags(t, train.res);

  EvaluateArgs eval;
  auto* e = app.add_subcommand("evaluate", "Per-class precision / recall / F1 on the held-out split");
  e->add_option("--model-artifact", eval.artifact)->required()->check(CLI::ExistingFile);
  e->add_option("--data", eval.data, "The CSV the artifact was trained on")->required()->check(CLI::ExistingFile);
  e->add_option("--json-out", eval.json_out, "Also write the report as JSON");
  e->add_flag("--all", eval.all, "Evaluate on every curated example instead of the test split");

  ClassifyArgs cls;
  auto* c = app.add_subcommand("classify", "Classify one transcription");
  c->add_option("--model-artifact", cls.artifact)->required()->check(CLI::ExistingFile);
  auto* text_opt = c->add_option("--text", cls.text, "Transcription text");
  auto* file_opt = c->add_option("--file", cls.file, "File holding the transcription")->check(CLI::ExistingFile);
  text_opt->excludes(file_opt);
  c->add_flag("--json", cls.json, "Print JSON");

  ExportArgs exp;
  auto* x = app.add_subcommand("export-embeddings", "Write a 2-D PCA projection (x,y,label per document)");
  x->add_option("--data", exp.data, "Transcription CSV")->required()->check(CLI::ExistingFile);
  x->add_option("--model-artifact", exp.artifact, "Reuse this artifact's preprocessing and TF-IDF vocabulary");
  x->add_option("--out", exp.out, "Output CSV")->required();
  x->add_option("--max-features", exp.max_features, "Vocabulary cap when fitting TF-IDF here (0 = all)");
  add_resource_flags(x, exp.res);

  ServeArgs serve;
  auto* v = app.add_subcommand("serve", "Run the HTTP service");
  v->add_option("--config", serve.config, "Service config JSON (MEDTX_* variables override it)")
      ->check(CLI::ExistingFile);

  AddUserArgs user;
  auto* u = app.add_subcommand("add-user", "Create a service account");
  u->add_option("--accounts", user.accounts, "Accounts file")->required();
  u->add_option("--username", user.username)->required();
  auto* pw = u->add_option("--password", user.password);
  auto* pw_stdin = u->add_flag("--password-stdin", user.password_stdin, "Read the password from stdin");
  pw->excludes(pw_stdin);
  u->add_option("--role", user.role, "clinician | admin")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (c->parsed() && !cls.text && cls.file.empty()) {
      throw CLI::RequiredError("--text or --file");
    }
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h, out, err);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h, out, err);
  } catch (const CLI::ParseError& pe) {
    err << "medtx: " << pe.what() << "\n" << "Run with --help for usage.\n";
    return kUsageError;
  }

  try {
    if (s->parsed()) return cmd_stats(stats, out);
    if (t->parsed()) return cmd_train(train, args, out);
    if (e->parsed()) return cmd_evaluate(eval, out);
    if (c->parsed()) return cmd_classify(cls, out);
    if (x->parsed()) return cmd_export(exp, out);
    if (v->parsed()) return cmd_serve(serve, out);
    if (u->parsed()) return cmd_add_user(user, out);
  } catch (const Error& ex) {
    err << "medtx: " << error_code(ex.kind()) << ": " << ex.what() << '\n';
    return 1;
  } catch (const std::exception& ex) {
    err << "medtx: " << ex.what() << '\n';
    return 1;
  }
  return kUsageError;
}

}  // namespace medtx::cli
