// Command-line front end. Talks to the toolkit only through the C API.
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <sys/stat.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "lqm/lqm.h"

namespace {

using json = nlohmann::json;

constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;

struct Failure {
  int code;
  std::string message;
};

int exit_code(lqm_status s) {
  switch (s) {
    case LQM_OK: return 0;
    case LQM_ERR_USAGE:
    case LQM_ERR_IO: return kExitUsage;
    default: return kExitValidation;
  }
}

void check(lqm_status s) {
  if (s != LQM_OK) throw Failure{exit_code(s), lqm_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Taxonomy = std::unique_ptr<lqm_taxonomy, Deleter<lqm_taxonomy, lqm_taxonomy_free>>;
using Corpus = std::unique_ptr<lqm_corpus, Deleter<lqm_corpus, lqm_corpus_free>>;
using Annotations = std::unique_ptr<lqm_annotations, Deleter<lqm_annotations, lqm_annotations_free>>;
using Server = std::unique_ptr<lqm_server, Deleter<lqm_server, lqm_server_free>>;

std::string take(char* s) {
  std::string out(s);
  lqm_string_free(s);
  return out;
}

bool is_file(const std::string& path) {
  struct stat st {};
  return ::stat(path.c_str(), &st) == 0 && S_ISREG(st.st_mode);
}

Taxonomy load_taxonomy(const std::string& spec) {
  lqm_taxonomy* t = nullptr;
  if (spec.empty()) {
    check(lqm_taxonomy_builtin("LQM", &t));
  } else if (is_file(spec)) {
    check(lqm_taxonomy_load(spec.c_str(), &t));
  } else if (lqm_taxonomy_builtin(spec.c_str(), &t) != LQM_OK) {
    throw Failure{kExitUsage, "cannot open taxonomy '" + spec + "' (not a file or a built-in name)"};
  }
  return Taxonomy(t);
}

Corpus load_corpus(const std::string& path) {
  lqm_corpus* c = nullptr;
  check(lqm_corpus_load(path.c_str(), &c));
  return Corpus(c);
}

Annotations load_annotations(const std::string& path, const Corpus& c, const Taxonomy& t) {
  if (path.empty()) return nullptr;
  lqm_annotations* a = nullptr;
  check(lqm_annotations_load(path.c_str(), c.get(), t.get(), &a));
  return Annotations(a);
}

struct Output {
  std::string format = "json";
  std::string path;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "table"}));
    cmd->add_option("--out", path, "Output file (default: standard output)");
  }

  // Nothing is written until the whole result exists, so a failed run leaves
  // no partial file behind.
  void write(const std::string& kind, const std::string& report_json) const {
    std::string data = report_json;
    if (format == "table") {
      char* text = nullptr;
      check(lqm_render_table(kind.c_str(), report_json.c_str(), &text));
      data = take(text);
    }
    if (path.empty()) {
      std::fwrite(data.data(), 1, data.size(), stdout);
      std::fflush(stdout);
    } else {
      check(lqm_write_file(path.c_str(), data.data(), data.size()));
    }
  }
};

std::string options_json(const json& j) { return j.dump(); }

lqm_server* g_server = nullptr;

int serve(const std::string& data_dir, const std::string& host, int port, std::string admin_token) {
  if (admin_token.empty()) {
    if (const char* env = std::getenv("LQM_ADMIN_TOKEN")) admin_token = env;
  }
  json opts = {{"data_dir", data_dir}, {"host", host}, {"port", port}};
  if (!admin_token.empty()) opts["admin_token"] = admin_token;

  // Handle termination on a dedicated thread instead of in a signal handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  lqm_server* raw = nullptr;
  check(lqm_server_create(options_json(opts).c_str(), &raw));
  Server server(raw);
  int bound = 0;
  check(lqm_server_bind(server.get(), &bound));
  g_server = server.get();
  std::printf("listening on http://%s:%d\n", host.c_str(), bound);
  std::fflush(stdout);

  std::thread waiter([&signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    lqm_server_stop(g_server);
  });
  const lqm_status status = lqm_server_run(server.get());
  if (waiter.joinable()) {
    // run() can return on its own; wake the waiter so it can exit.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  check(status);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Span-level translation quality annotation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lqm_version()));

  std::string segments, annotations, taxonomy, weights, annotator, report, bleu_path, level, direction, model,
      dialect, annotator_pair, hyp_field = "target_text", tok = "whitespace", data_dir, project, out_dir,
      host = "127.0.0.1", admin_token;
  bool covered_only = false, lowercase = false, exact = false;
  std::size_t min_overlap = 1;
  int port = 8080;
  Output out;

  auto inputs = [&](CLI::App* cmd, bool annotations_required) {
    cmd->add_option("--segments", segments, "segments.jsonl")->required();
    auto* a = cmd->add_option("--annotations", annotations, "annotations.jsonl");
    if (annotations_required) a->required();
    cmd->add_option("--taxonomy", taxonomy, "Taxonomy file or built-in name (default: LQM)");
  };

  auto* validate = app.add_subcommand("validate", "Check segments and annotations");
  inputs(validate, false);
  out.add_to(validate);

  auto* score = app.add_subcommand("score", "Per-segment and per-group LQM scores");
  inputs(score, false);
  score->add_option("--weights", weights, "Severity weights JSON");
  score->add_option("--annotator", annotator, "Score only this annotator's spans");
  score->add_flag("--covered-only", covered_only, "Skip segments no annotator covered");
  out.add_to(score);

  auto* iaa = app.add_subcommand("iaa", "Inter-annotator agreement");
  inputs(iaa, true);
  iaa->add_option("--annotators", annotator_pair, "Two annotator ids, comma-separated")->required();
  iaa->add_option("--min-overlap", min_overlap, "Characters two spans must share to match")
      ->check(CLI::PositiveNumber);
  out.add_to(iaa);

  auto* bleu = app.add_subcommand("bleu", "Sentence BLEU against reference_text");
  bleu->add_option("--segments", segments, "segments.jsonl")->required();
  bleu->add_option("--hyp-field", hyp_field, "Hypothesis field");
  bleu->add_option("--tok", tok, "whitespace | pretok | subword:VOCAB");
  bleu->add_flag("--lowercase", lowercase, "Lowercase before tokenizing");
  out.add_to(bleu);

  auto* analyze = app.add_subcommand("analyze", "Distribution, attribution, correlation and length analyses");
  inputs(analyze, true);
  analyze->add_option("--report", report, "dist | attrib | corr | buckets")
      ->required()
      ->check(CLI::IsMember({"dist", "attrib", "corr", "buckets"}));
  analyze->add_option("--bleu", bleu_path, "BLEU report from `lqm bleu` (corr)");
  analyze->add_option("--level", level, "category | error_type | subcategory (dist)")
      ->check(CLI::IsMember({"category", "error_type", "subcategory"}));
  analyze->add_option("--direction", direction, "SRC->TGT, DA->EN or EN->DA");
  analyze->add_option("--model", model, "Restrict to one model");
  analyze->add_option("--dialect", dialect, "Restrict to one dialect");
  analyze->add_option("--annotator", annotator, "Restrict to one annotator");
  analyze->add_option("--weights", weights, "Severity weights JSON");
  analyze->add_flag("--exact", exact, "Exact permutation p-values (n <= 10)");
  out.add_to(analyze);

  auto* exp = app.add_subcommand("export", "Write a server project as segments.jsonl and annotations.jsonl");
  exp->add_option("--data-dir", data_dir, "Server data directory")->required();
  exp->add_option("--project", project, "Project id")->required();
  exp->add_option("--out-dir", out_dir, "Destination directory")->required();

  auto* srv = app.add_subcommand("serve", "Run the annotation server");
  srv->add_option("--data-dir", data_dir, "Server data directory")->required();
  srv->add_option("--host", host, "Listen address");
  srv->add_option("--port", port, "Listen port (0 picks a free one)")->check(CLI::Range(0, 65535));
  srv->add_option("--admin-token", admin_token, "Token for project creation (or LQM_ADMIN_TOKEN)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "lqm: usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (validate->parsed() || score->parsed() || iaa->parsed() || analyze->parsed()) {
      // Load every input before computing anything.
      const Taxonomy tax = load_taxonomy(taxonomy);
      const Corpus corpus = load_corpus(segments);
      const Annotations anns = load_annotations(annotations, corpus, tax);
      char* result = nullptr;
      std::string kind;
      if (validate->parsed()) {
        check(lqm_validate_summary(corpus.get(), anns.get(), &result));
        kind = "validate";
        if (out.format == "table") throw Failure{kExitUsage, "validate only writes JSON"};
      } else if (score->parsed()) {
        json opts = {{"covered_only", covered_only}};
        if (!weights.empty()) opts["weights_path"] = weights;
        if (!annotator.empty()) opts["annotator"] = annotator;
        check(lqm_score(corpus.get(), anns.get(), options_json(opts).c_str(), &result));
        kind = "score";
      } else if (iaa->parsed()) {
        const auto comma = annotator_pair.find(',');
        if (comma == std::string::npos || annotator_pair.find(',', comma + 1) != std::string::npos) {
          throw Failure{kExitUsage, "--annotators expects exactly two ids, e.g. A,B"};
        }
        const std::string a = annotator_pair.substr(0, comma), b = annotator_pair.substr(comma + 1);
        check(lqm_iaa(corpus.get(), anns.get(), tax.get(), a.c_str(), b.c_str(), min_overlap, &result));
        kind = "iaa";
      } else {
        json opts = {{"exact", exact}};
        for (const auto& [key, value] : {std::pair{"level", &level}, {"direction", &direction}, {"model", &model},
                                         {"dialect", &dialect}, {"annotator", &annotator}}) {
          if (!value->empty()) opts[key] = *value;
        }
        if (!weights.empty()) opts["weights_path"] = weights;
        std::optional<std::string> bleu_json;
        if (!bleu_path.empty()) {
          std::FILE* f = std::fopen(bleu_path.c_str(), "rb");
          if (f == nullptr) throw Failure{kExitUsage, "cannot open '" + bleu_path + "'"};
          std::string text;
          char buf[65536];
          for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, f)) > 0;) text.append(buf, n);
          std::fclose(f);
          bleu_json = std::move(text);
        } else if (report == "corr") {
          throw Failure{kExitUsage, "--report corr needs --bleu"};
        }
        check(lqm_analyze(corpus.get(), anns.get(), tax.get(), report.c_str(), options_json(opts).c_str(),
                          bleu_json ? bleu_json->c_str() : nullptr, &result));
        kind = report;
      }
      out.write(kind, take(result));
    } else if (bleu->parsed()) {
      const Corpus corpus = load_corpus(segments);
      char* result = nullptr;
      check(lqm_bleu(corpus.get(), hyp_field.c_str(), tok.c_str(), lowercase ? 1 : 0, &result));
      out.write("bleu", take(result));
    } else if (exp->parsed()) {
      check(lqm_export_project(data_dir.c_str(), project.c_str(), out_dir.c_str()));
    } else if (srv->parsed()) {
      return serve(data_dir, host, port, admin_token);
    }
  } catch (const Failure& f) {
    std::cerr << "lqm: " << (f.code == kExitUsage ? "usage error: " : "error: ") << f.message << "\n";
    return f.code;
  }
  return 0;
}
