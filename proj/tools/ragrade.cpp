// ragrade: batch and server front end for the grading engine.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <thread>

#include "ragrade/service.hpp"

namespace {

using nlohmann::json;

struct Globals {
  std::string config_path;
  std::optional<std::size_t> k;
};

ragrade::ServiceConfig load_config(const Globals& g) {
  if (g.config_path.empty()) throw ragrade::Error(ragrade::ErrorCode::InvalidConfig, "--config is required");
  return ragrade::load_service_config(g.config_path);
}

int serve(const Globals& g) {
  // Block the termination signals before any thread starts so only sigwait
  // sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ragrade::Engine engine(load_config(g));
  const auto [host, port] = ragrade::parse_listen_address(engine.config().listen_address);
  ragrade::HttpService http(engine);
  const int bound = http.bind(host, port);
  std::cerr << "listening on " << host << ":" << bound << "\n";

  std::thread server([&] { http.listen(); });
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "signal " << sig << ", shutting down\n";
  http.stop();
  server.join();
  return 0;
}

int ingest(const Globals& g, const std::string& dir, const std::string& doc_type) {
  ragrade::Engine engine(load_config(g));
  std::optional<ragrade::DocType> type;
  if (!doc_type.empty()) type = ragrade::parse_doc_type(doc_type);
  const auto result = engine.ingest_directory(dir, type);
  json errors = json::array();
  for (const auto& e : result.errors) {
    errors.push_back({{"path", e.path.string()}, {"code", std::string(ragrade::to_string(e.code))},
                      {"message", e.message}});
  }
  json ids = json::array();
  for (const auto& d : result.documents) ids.push_back(d.id);
  std::cout << json{{"ingested", result.documents.size()}, {"document_ids", ids}, {"errors", errors}}.dump(2)
            << "\n";
  return 0;
}

int grade(const Globals& g, const std::string& dir, bool drain) {
  ragrade::Engine engine(load_config(g));
  auto summary = engine.grade_batch(dir, g.k);
  json out = ragrade::batch_summary_to_json(summary);
  if (drain) out["regenerated"] = ragrade::batch_summary_to_json(engine.drain_regeneration_queue(g.k));
  std::cout << out.dump(2) << "\n";
  return summary.failed == 0 ? 0 : 3;
}

int review_list(const Globals& g, const std::string& cohort) {
  ragrade::Engine engine(load_config(g));
  std::optional<std::string> c;
  if (!cohort.empty()) c = cohort;
  json items = json::array();
  for (const auto& a : engine.review().list_pending(c)) {
    items.push_back({{"assessment_id", a.id},
                     {"submission_id", a.submission_id},
                     {"total_percent", a.total_percent},
                     {"generated_at", a.generated_at}});
  }
  std::cout << items.dump(2) << "\n";
  return 0;
}

int review_approve(const Globals& g, const std::string& id, const std::string& reviewer) {
  ragrade::Engine engine(load_config(g));
  const auto doc = engine.review().approve(id, reviewer);
  std::cout << json{{"assessment_id", id}, {"status", "approved"}, {"feedback_document_id", doc.id}}.dump(2) << "\n";
  return 0;
}

int review_reject(const Globals& g, const std::string& id, const std::string& reviewer, const std::string& reason,
                  bool regenerate) {
  ragrade::Engine engine(load_config(g));
  engine.review().reject(id, reviewer, reason, regenerate);
  std::cout << json{{"assessment_id", id}, {"status", "rejected"}, {"regeneration_queued", regenerate}}.dump(2)
            << "\n";
  return 0;
}

int report(const std::string& csv_path) {
  const auto pairs = ragrade::stats::load_pairs_csv(csv_path);
  const auto r = ragrade::stats::reliability_report(pairs, ragrade::stats::default_total_bands());
  std::cout << ragrade::stats::report_to_json(r).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rubric-grounded retrieval-augmented grading"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Service configuration JSON");
  app.add_option("--k", g.k, "Evidence documents retrieved per essay")->check(CLI::PositiveNumber);

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API until SIGINT/SIGTERM");

  std::string ingest_dir, doc_type;
  auto* ingest_cmd = app.add_subcommand("ingest", "Ingest an inbox directory into the corpus");
  ingest_cmd->add_option("dir", ingest_dir)->required();
  ingest_cmd->add_option("--doc-type", doc_type, "Default doc_type when a file has no front matter");

  std::string grade_dir;
  bool drain = false;
  auto* grade_cmd = app.add_subcommand("grade", "Grade every submission file in a directory");
  grade_cmd->add_option("dir", grade_dir)->required();
  grade_cmd->add_flag("--drain-queue", drain, "Also re-grade submissions queued by rejections");

  auto* review_cmd = app.add_subcommand("review", "Instructor review");
  review_cmd->require_subcommand(1);
  std::string cohort, assessment_id, reviewer = "cli", reason;
  bool regenerate = false;
  auto* list_cmd = review_cmd->add_subcommand("list", "Pending assessments by generated_at");
  list_cmd->add_option("--cohort", cohort);
  auto* approve_cmd = review_cmd->add_subcommand("approve", "Approve an assessment");
  approve_cmd->add_option("id", assessment_id)->required();
  approve_cmd->add_option("--reviewer", reviewer);
  auto* reject_cmd = review_cmd->add_subcommand("reject", "Reject an assessment");
  reject_cmd->add_option("id", assessment_id)->required();
  reject_cmd->add_option("--reviewer", reviewer);
  reject_cmd->add_option("--reason", reason)->required();
  reject_cmd->add_flag("--regenerate", regenerate, "Queue the submission for re-grading");

  std::string pairs_path;
  auto* report_cmd = app.add_subcommand("report", "Reliability metrics for a paired-score CSV");
  report_cmd->add_option("pairs", pairs_path)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(g);
    if (*ingest_cmd) return ingest(g, ingest_dir, doc_type);
    if (*grade_cmd) return grade(g, grade_dir, drain);
    if (*list_cmd) return review_list(g, cohort);
    if (*approve_cmd) return review_approve(g, assessment_id, reviewer);
    if (*reject_cmd) return review_reject(g, assessment_id, reviewer, reason, regenerate);
    if (*report_cmd) return report(pairs_path);
  } catch (const ragrade::Error& e) {
    std::cerr << "error: " << ragrade::to_string(e.code()) << ": " << e.what() << "\n";
    return 2;
  }
  return 1;
}
