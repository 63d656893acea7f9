#include <httplib.h>

#include <algorithm>
#include <cstdlib>

#include "ragrade/service.hpp"

namespace ragrade {

using nlohmann::json;

int http_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::InvalidState: return 409;
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::RemoteUnavailable:
    case ErrorCode::UnparseableAfterRepairs: return 502;
    case ErrorCode::IoFailure:
    case ErrorCode::StoreLoadFailure:
    case ErrorCode::CorruptIndex: return 500;
    default: return 400;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, std::string_view message) {
  send_json(res, http_status_for(code),
            {{"error", {{"code", std::string(to_string(code))}, {"message", std::string(message)}}}});
}

json parse_body(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidInput, std::string("malformed JSON: ") + e.what());
  }
}

std::string required_string(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string()) {
    throw SchemaViolationError(key, "required string");
  }
  return body[key].get<std::string>();
}

std::optional<std::string> optional_string(const json& body, const char* key) {
  if (!body.contains(key) || body[key].is_null()) return std::nullopt;
  if (!body[key].is_string()) throw SchemaViolationError(key, "expected a string");
  return body[key].get<std::string>();
}

std::optional<std::string> query_param(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  auto v = req.get_param_value(key);
  if (v.empty()) return std::nullopt;
  return v;
}

// Wraps a handler so every ragrade::Error becomes the JSON error envelope.
template <class F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, ErrorCode::InvalidInput, e.what());
    } catch (const std::exception& e) {
      send_error(res, ErrorCode::IoFailure, e.what());
    }
  };
}

}  // namespace

struct HttpService::Impl {
  Engine& engine;
  httplib::Server server;
  std::optional<std::string> token;
  bool bound = false;

  explicit Impl(Engine& e) : engine(e) {
    if (const auto& var = engine.config().auth_token_env_var) {
      const char* value = std::getenv(var->c_str());
      token = value ? std::string(value) : std::string();
    }
    // httplib defaults to SO_REUSEPORT, which would let a second instance
    // share the port silently.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    install_auth();
    install_routes();
  }

  void install_auth() {
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (!token || req.path == "/api/health") return httplib::Server::HandlerResponse::Unhandled;
      if (!token->empty() && req.get_header_value("Authorization") == "Bearer " + *token) {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      send_error(res, ErrorCode::Unauthorized, "missing or invalid bearer token");
      return httplib::Server::HandlerResponse::Handled;
    });
  }

  json assessment_detail(const Assessment& a) const {
    auto j = assessment_to_json(a);
    if (auto s = engine.submissions().find(a.submission_id)) {
      auto sj = submission_to_json(*s);
      sj["length_flag"] = s->length_flag();
      j["submission"] = std::move(sj);
    } else {
      j["submission"] = nullptr;
    }
    json evidence = json::array();
    for (const auto& r : a.evidence) {
      auto ej = retrieval_result_to_json(r);
      const auto doc = engine.corpus().find(r.doc_id);
      ej["text"] = doc ? json(doc->text) : json(nullptr);
      evidence.push_back(std::move(ej));
    }
    j["evidence"] = std::move(evidence);
    return j;
  }

  void install_routes() {
    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });

    server.Post("/api/corpus/documents", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto doc_type = parse_doc_type(required_string(body, "doc_type"));
      if (doc_type == DocType::approved_feedback) {
        throw Error(ErrorCode::InvalidInput, "approved_feedback documents come only from review");
      }
      const auto doc = engine.ingest_text(required_string(body, "text"), doc_type,
                                          optional_string(body, "source_name").value_or("api"),
                                          optional_string(body, "cohort"));
      auto out = document_to_json(doc);
      out.erase("embedding");
      send_json(res, 201, out);
    }));

    // Sorted by id.
    server.Get("/api/corpus/documents", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::optional<DocType> type;
      if (auto t = query_param(req, "doc_type")) type = parse_doc_type(*t);
      const auto cohort = query_param(req, "cohort");
      json items = json::array();
      for (const auto& d : engine.corpus().documents()) {
        if (type && d.doc_type != *type) continue;
        if (cohort && d.cohort != cohort) continue;
        auto j = document_to_json(d);
        j.erase("embedding");
        items.push_back(std::move(j));
      }
      send_json(res, 200, {{"documents", items}});
    }));

    server.Post("/api/submissions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto s = engine.create_submission(required_string(body, "student_ref"),
                                              required_string(body, "essay_text"), optional_string(body, "cohort"));
      auto j = submission_to_json(s);
      j["length_flag"] = s.length_flag();
      send_json(res, 201, j);
    }));

    server.Post(R"(/api/submissions/([^/]+)/grade)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  std::optional<std::size_t> k;
                  if (auto v = query_param(req, "k")) {
                    try {
                      k = std::stoul(*v);
                    } catch (const std::exception&) {
                      throw Error(ErrorCode::InvalidInput, "k must be a positive integer");
                    }
                  }
                  send_json(res, 201, assessment_to_json(engine.grade_submission(req.matches[1].str(), k)));
                }));

    // Sorted by (generated_at, id).
    server.Get("/api/assessments", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::optional<AssessmentStatus> status;
      if (auto s = query_param(req, "status")) status = parse_assessment_status(*s);
      const auto cohort = query_param(req, "cohort");
      json items = json::array();
      for (const auto& a : engine.assessments().all()) {
        if (status && a.status != *status) continue;
        if (cohort && a.cohort != cohort) continue;
        auto j = assessment_to_json(a);
        if (auto s = engine.submissions().find(a.submission_id)) {
          j["student_ref"] = s->student_ref;
          j["length_flag"] = s->length_flag();
        }
        items.push_back(std::move(j));
      }
      send_json(res, 200, {{"assessments", items}});
    }));

    server.Get(R"(/api/assessments/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      const auto a = engine.assessments().find(id);
      if (!a) throw Error(ErrorCode::NotFound, "no assessment " + id);
      send_json(res, 200, assessment_detail(*a));
    }));

    server.Post(R"(/api/assessments/([^/]+)/approve)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  const auto id = req.matches[1].str();
                  engine.review().approve(id, required_string(body, "reviewer_id"));
                  send_json(res, 200, assessment_detail(*engine.assessments().find(id)));
                }));

    server.Post(R"(/api/assessments/([^/]+)/edit)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  const auto id = req.matches[1].str();
                  if (!body.contains("criterion_scores") || !body["criterion_scores"].is_array()) {
                    throw SchemaViolationError("criterion_scores", "required array");
                  }
                  std::vector<CriterionScore> scores;
                  for (const auto& s : body["criterion_scores"]) {
                    try {
                      scores.push_back(criterion_score_from_json(s));
                    } catch (const json::exception& e) {
                      throw SchemaViolationError("criterion_scores", e.what());
                    }
                  }
                  engine.review().edit_and_approve(id, required_string(body, "reviewer_id"), std::move(scores),
                                                   required_string(body, "overall_comment"));
                  send_json(res, 200, assessment_detail(*engine.assessments().find(id)));
                }));

    server.Post(R"(/api/assessments/([^/]+)/reject)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  const auto id = req.matches[1].str();
                  const bool regen = body.value("request_regeneration", false);
                  engine.review().reject(id, required_string(body, "reviewer_id"),
                                         optional_string(body, "reason").value_or(""), regen);
                  send_json(res, 200, assessment_detail(*engine.assessments().find(id)));
                }));

    server.Get("/api/reports/reliability", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, stats::report_to_json(engine.reliability(query_param(req, "cohort"))));
    }));

    server.Post("/api/reports/human-scores", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto n = engine.store_human_scores(req.body);
      send_json(res, 201, {{"stored", n}});
    }));
  }
};

HttpService::HttpService(Engine& engine) : impl_(std::make_unique<Impl>(engine)) {}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  int bound = -1;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    bound = port;
  }
  if (bound <= 0) {
    throw Error(ErrorCode::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->bound = true;
  return bound;
}

void HttpService::listen() {
  if (!impl_->bound) throw Error(ErrorCode::BindFailure, "listen() before bind()");
  impl_->server.listen_after_bind();
}

void HttpService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpService::is_running() const { return impl_->server.is_running(); }

}  // namespace ragrade
