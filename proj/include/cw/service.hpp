#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "cw/session.hpp"

namespace cw {

inline constexpr const char* kVersion = "1.0.0";

struct ServiceConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::size_t max_upload_bytes = 50u * 1024u * 1024u;
  std::size_t workers = 1;
};

// Reads CW_BIND, CW_PORT, CW_MAX_UPLOAD_MB and CW_WORKERS; unset variables
// keep the defaults. Throws Input on malformed values.
ServiceConfig service_config_from_env();

struct UploadedFile {
  std::string field;
  std::string filename;
  std::string content;
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::string content_type;
  std::vector<UploadedFile> files;
  std::map<std::string, std::string> form;  // non-file multipart fields
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

// Routes /v1 requests onto sessions. Independent of the HTTP transport so it
// can be driven directly in tests.
class Api {
 public:
  explicit Api(ServiceConfig config = {});

  ApiResponse handle(const ApiRequest& request);
  SessionManager& sessions() noexcept { return sessions_; }
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  ApiResponse route(const ApiRequest& request);
  ApiResponse session_route(const ApiRequest& request, const std::shared_ptr<Session>& session,
                            const std::vector<std::string>& rest);

  ServiceConfig config_;
  SessionManager sessions_;
};

}  // namespace cw
