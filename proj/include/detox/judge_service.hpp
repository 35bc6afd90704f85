#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "detox/common.hpp"

namespace detox {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds any free port
  std::filesystem::path data_dir;
  // When set, every request needs "Authorization: Bearer <token>".
  std::optional<std::string> token;
  // Default for including the parent comment in judge payloads; requests
  // can override with ?parent=0|1.
  bool show_parent = true;
  // Relation index for the discourse subset; defaults to
  // <data_dir>/relations.jsonl when present.
  std::optional<std::filesystem::path> relations_path;
};

// Keys that would reveal which model produced which output. Responses for
// open sessions are checked against this list before they are sent.
bool leaks_assignment(const json& body);

// HTTP+JSON endpoints:
//   POST /sessions                          create (201)
//   GET  /sessions/{id}                     progress summary
//   GET  /sessions/{id}/next                next pending item, blinded
//   POST /sessions/{id}/judgments           record (201 stored, 200 duplicate)
//   POST /sessions/{id}/close               close, irreversible
//   GET  /sessions/{id}/aggregate?subset=   closed sessions only
//   GET  /annotate/next                     next comment to rewrite (204 when done)
//   POST /annotate/records                  submit a StyleTransferPair
// Errors: 401 bad token, 404 unknown, 409 state conflict, 422 invalid body.
class JudgeService {
 public:
  explicit JudgeService(ServiceConfig config);
  ~JudgeService();

  JudgeService(const JudgeService&) = delete;
  JudgeService& operator=(const JudgeService&) = delete;

  // Binds the listening socket; throws Error when the port is taken.
  // Returns the bound port.
  int bind();
  // Serves until stop(); binds first if needed.
  void listen();
  // listen() on a background thread; returns once the server accepts.
  void start();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace detox
