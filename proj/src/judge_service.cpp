#include "detox/judge_service.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include "detox/collect.hpp"
#include "detox/corpus.hpp"
#include "detox/judge.hpp"

// After Eigen: <resolv.h> defines an `_res` macro that breaks Eigen headers.
#include "httplib.h"

namespace detox {

namespace {

constexpr const char* kForbiddenKeys[] = {"model1_is_a", "assignment", "model_1",
                                          "model_2",     "model_1_pct", "model_2_pct"};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}});
}

Timestamp now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

bool leaks_assignment(const json& body) {
  if (body.is_object()) {
    for (const auto& [key, value] : body.items()) {
      for (const char* forbidden : kForbiddenKeys) {
        if (key == forbidden) return true;
      }
      if (leaks_assignment(value)) return true;
    }
  } else if (body.is_array()) {
    for (const auto& value : body) {
      if (leaks_assignment(value)) return true;
    }
  }
  return false;
}

struct JudgeService::Impl {
  explicit Impl(ServiceConfig c)
      : config(std::move(c)), store(config.data_dir), queue(config.data_dir) {}

  ServiceConfig config;
  SessionStore store;
  AnnotationQueue queue;
  httplib::Server server;
  std::thread thread;
  int bound_port = -1;

  std::filesystem::path resolve(const std::string& path) const {
    std::filesystem::path p(path);
    return p.is_relative() ? config.data_dir / p : p;
  }

  RelationIndex relations() const {
    std::filesystem::path path = config.relations_path ? *config.relations_path
                                                       : config.data_dir / "relations.jsonl";
    if (!std::filesystem::exists(path)) return {};
    return load_relations(path);
  }

  // Blinded send for anything a judge sees while the session is open.
  void send_blinded(httplib::Response& res, int status, const json& body) const {
    if (leaks_assignment(body)) {
      send_error(res, 500, "response withheld: it would reveal the model assignment");
      return;
    }
    send_json(res, status, body);
  }

  bool authorized(const httplib::Request& req) const {
    if (!config.token) return true;
    return req.get_header_value("Authorization") == "Bearer " + *config.token;
  }

  template <typename Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req)) {
        send_error(res, 401, "missing or invalid bearer token");
        return;
      }
      try {
        fn(req, res);
      } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
      } catch (const ConflictError& e) {
        send_error(res, 409, e.what());
      } catch (const ValidationError& e) {
        send_error(res, 422, e.what());
      } catch (const json::exception& e) {
        send_error(res, 422, std::string("invalid JSON: ") + e.what());
      } catch (const Error& e) {
        send_error(res, 422, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  template <typename T>
  std::vector<T> rows(const json& body, const std::string& key) const {
    if (body.contains(key)) return body.at(key).get<std::vector<T>>();
    if (body.contains(key + "_path")) {
      std::vector<T> out;
      for (const auto& row : read_jsonl(resolve(body.at(key + "_path").get<std::string>()))) {
        out.push_back(row.get<T>());
      }
      return out;
    }
    throw ValidationError(key + " or " + key + "_path is required");
  }

  void routes() {
    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = json::parse(req.body);
      auto first = rows<GeneratedOutput>(body, "outputs_model1");
      auto second = rows<GeneratedOutput>(body, "outputs_model2");
      std::vector<StyleTransferPair> corpus;
      if (body.contains("corpus_path")) {
        corpus = load_corpus(resolve(body.at("corpus_path").get<std::string>()));
      } else {
        corpus = rows<StyleTransferPair>(body, "corpus");
      }
      const auto n_items = body.value("n_items", std::size_t{100});
      const auto seed = body.value("seed", std::uint64_t{0});
      JudgingSession session;
      try {
        session = create_session(first, second, corpus, n_items, seed,
                                 body.value("session_id", std::string()));
      } catch (const Error& e) {
        throw ValidationError(e.what());
      }
      store.create(session);
      send_blinded(res, 201, store.get(session.session_id)->summary());
    }));

    server.Get(R"(/sessions/([A-Za-z0-9_-]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_blinded(res, 200, store.get(req.matches[1])->summary());
               }));

    server.Get(R"(/sessions/([A-Za-z0-9_-]+)/next)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto session = store.get(req.matches[1]);
                 if (session->closed) throw ConflictError("session is closed");
                 bool parent = config.show_parent;
                 if (req.has_param("parent")) parent = req.get_param_value("parent") != "0";
                 json body = session->summary();
                 const JudgeItem* item = session->next_pending();
                 body["item"] = item ? blinded_view(*item, parent) : json(nullptr);
                 send_blinded(res, 200, body);
               }));

    server.Post(R"(/sessions/([A-Za-z0-9_-]+)/judgments)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.matches[1];
                  Judgment judgment = json::parse(req.body).get<Judgment>();
                  if (judgment.timestamp.empty()) judgment.timestamp = format_utc(now_seconds());
                  const RecordOutcome outcome = store.record(id, judgment);
                  json body = store.get(id)->summary();
                  body["status"] = outcome == RecordOutcome::kStored ? "stored" : "duplicate";
                  send_blinded(res, outcome == RecordOutcome::kStored ? 201 : 200, body);
                }));

    server.Post(R"(/sessions/([A-Za-z0-9_-]+)/close)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.matches[1];
                  const bool changed = store.close(id);
                  json body = store.get(id)->summary();
                  body["changed"] = changed;
                  send_json(res, 200, body);
                }));

    server.Get(R"(/sessions/([A-Za-z0-9_-]+)/aggregate)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto session = store.get(req.matches[1]);
                 if (!session->closed) {
                   throw ConflictError("session is open; close it before aggregating");
                 }
                 const Subset subset = parse_subset(
                     req.has_param("subset") ? req.get_param_value("subset") : "all");
                 AggregateTable table;
                 try {
                   table = aggregate(*session, subset,
                                     subset == Subset::kAll ? RelationIndex{} : relations());
                 } catch (const ConflictError&) {
                   throw;
                 } catch (const Error& e) {
                   throw ValidationError(e.what());
                 }
                 json body = table;
                 body["session_id"] = session->session_id;
                 body["items"] = session->items;
                 send_json(res, 200, body);
               }));

    server.Get("/annotate/next", guarded([this](const httplib::Request&, httplib::Response& res) {
                 auto next = queue.next();
                 if (!next) {
                   res.status = 204;
                   return;
                 }
                 send_json(res, 200, *next);
               }));

    server.Post("/annotate/records",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  StyleTransferPair record;
                  try {
                    record = json::parse(req.body).get<StyleTransferPair>();
                  } catch (const Error& e) {
                    throw ValidationError(e.what());
                  }
                  queue.submit(record);
                  send_json(res, 201, json{{"status", "stored"}, {"id", record.id},
                                           {"annotated", queue.annotated()}});
                }));
  }
};

JudgeService::JudgeService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  impl_->routes();
  // SO_REUSEADDR only; no SO_REUSEPORT.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
}

JudgeService::~JudgeService() { stop(); }

int JudgeService::bind() {
  if (impl_->bound_port >= 0) return impl_->bound_port;
  const auto& c = impl_->config;
  if (c.port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(c.host);
    if (impl_->bound_port < 0) throw Error("cannot bind " + c.host);
  } else {
    if (!impl_->server.bind_to_port(c.host, c.port)) {
      throw Error("cannot bind " + c.host + ":" + std::to_string(c.port) +
                  " (port in use or not permitted)");
    }
    impl_->bound_port = c.port;
  }
  return impl_->bound_port;
}

void JudgeService::listen() {
  bind();
  impl_->server.listen_after_bind();
}

void JudgeService::start() {
  bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void JudgeService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int JudgeService::port() const { return impl_->bound_port; }

}  // namespace detox
