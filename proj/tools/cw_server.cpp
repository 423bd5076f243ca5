// HTTP front end for the session API.

// Eigen names parameters _res, which <resolv.h> (pulled in by httplib) defines
// as a macro, so the library headers come first.
#include "cw/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <csignal>
#include <iostream>

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

cw::ApiRequest to_api(const httplib::Request& req) {
  cw::ApiRequest out;
  out.method = req.method;
  out.path = req.path;
  for (const auto& [k, v] : req.params) out.query.emplace(k, v);
  out.body = req.body;
  out.content_type = req.get_header_value("Content-Type");
  for (const auto& [name, file] : req.files) {
    if (file.filename.empty())
      out.form[name] = file.content;
    else
      out.files.push_back({name, file.filename, file.content});
  }
  return out;
}

}  // namespace

int main() {
  cw::ServiceConfig config;
  try {
    config = cw::service_config_from_env();
  } catch (const cw::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  cw::Api api(config);
  httplib::Server server;
  server.set_payload_max_length(config.max_upload_bytes + 1024 * 1024);
  server.new_task_queue = [&] { return new httplib::ThreadPool(std::max<std::size_t>(config.workers, 4)); };

  const auto handler = [&](const httplib::Request& req, httplib::Response& res) {
    const cw::ApiResponse r = api.handle(to_api(req));
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    if (r.status != 204) res.set_content(r.body, r.content_type);
  };
  const char* pattern = R"(/v1(/.*)?)";
  server.Get(pattern, handler);
  server.Post(pattern, handler);
  server.Put(pattern, handler);
  server.Delete(pattern, handler);

  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on " << config.bind << ":" << config.port << " (" << config.workers << " workers)\n";
  if (!server.listen(config.bind, config.port)) {
    std::cerr << "cannot bind " << config.bind << ":" << config.port << "\n";
    return 1;
  }
  return 0;
}
