#include "medtx/http_server.hpp"

#include <sodium.h>

#include <httplib.h>

#include "medtx/errors.hpp"
#include "text_util.hpp"

namespace medtx {

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error_code", code}, {"message", message}});
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    Json j = Json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorKind::Validation, "request body must be a JSON object");
    return j;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Validation, std::string("malformed JSON body: ") + e.what());
  }
}

std::string required_string(const Json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    throw Error(ErrorKind::Validation, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::string bearer_token(const httplib::Request& req) {
  const auto header = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (header.size() <= prefix.size() || detail::ascii_lower(header.substr(0, prefix.size())) != "bearer ") {
    return {};
  }
  return std::string(detail::trim(std::string_view(header).substr(prefix.size())));
}

std::string decode_base64(const std::string& encoded) {
  std::string out(encoded.size(), '\0');
  std::size_t len = 0;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), encoded.data(), encoded.size(),
                        " \r\n", &len, nullptr, sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw Error(ErrorKind::Validation, "image_base64 is not valid base64");
  }
  out.resize(len);
  return out;
}

std::optional<std::string> query(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  auto v = req.get_param_value(key);
  if (detail::trim(v).empty()) return std::nullopt;
  return v;
}

template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.kind()), error_code(e.kind()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal_error", e.what());
    }
  };
}

}  // namespace

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Authentication:
    case ErrorKind::Authorization:
      return 401;
    case ErrorKind::NotFound:
      return 404;
    case ErrorKind::Validation:
    case ErrorKind::Extraction:
    case ErrorKind::Unclassifiable:
    case ErrorKind::Input:
      return 422;
    default:
      return 500;
  }
}

HttpServer::HttpServer(ClassificationService& service, std::optional<std::filesystem::path> static_dir)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  install_routes();
  if (static_dir) {
    if (!server_->set_mount_point("/", static_dir->string())) {
      throw Error(ErrorKind::Config, "static_dir is not a directory: " + static_dir->string());
    }
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind_to_any_port(const std::string& host) { return server_->bind_to_any_port(host); }
bool HttpServer::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }
bool HttpServer::listen_after_bind() { return server_->listen_after_bind(); }
void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }
void HttpServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void HttpServer::install_routes() {
  auto& svc = service_;
  auto& s = *server_;

  s.Post("/api/login", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    const auto token = svc.login(required_string(body, "username"), required_string(body, "password"));
    send_json(res, 200, {{"token", token.token}, {"expires_at", format_timestamp(token.expires_at)}});
  }));

  s.Post("/api/logout", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    svc.logout(bearer_token(req));
    send_json(res, 200, Json::object());
  }));

  s.Post("/api/records", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const auto token = bearer_token(req);
    const Json body = parse_body(req);
    // Authorize before looking at the payload so unauthenticated callers
    // learn nothing about validation rules.
    svc.authorize(token);
    Payload payload;
    const bool has_text = body.contains("text") && !body["text"].is_null();
    const bool has_image = body.contains("image_base64") && !body["image_base64"].is_null();
    if (has_text == has_image) throw Error(ErrorKind::Validation, "exactly one of 'text' or 'image_base64' is required");
    if (has_text) payload.text = required_string(body, "text");
    else payload.image_bytes = decode_base64(required_string(body, "image_base64"));
    send_json(res, 200, to_json(svc.create_record(token, required_string(body, "patient_name"), payload)));
  }));

  s.Get("/api/records", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const auto token = bearer_token(req);
    svc.authorize(token);
    RecordFilter filter;
    if (const auto c = query(req, "category")) {
      filter.category = parse_body_system(*c);
      if (!filter.category) throw Error(ErrorKind::Validation, "unknown category '" + *c + "'");
    }
    filter.patient_name_substring = query(req, "q");
    filter.from = query(req, "from");
    filter.to = query(req, "to");
    Json out = Json::array();
    for (const auto& r : svc.list_records(token, filter)) out.push_back(to_json(r));
    send_json(res, 200, out);
  }));

  s.Post("/api/records/:id/classify", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const auto token = bearer_token(req);
    svc.authorize(token);
    const Json body = parse_body(req);
    const auto& id = req.path_params.at("id");
    send_json(res, 200, to_json(svc.classify_record(token, id, required_string(body, "model_id"))));
  }));

  s.Get("/api/models", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    Json out = Json::array();
    for (const auto& m : svc.list_models(bearer_token(req))) {
      out.push_back({{"model_id", m.model_id},
                     {"architecture", std::string(to_string(m.artifact->family))},
                     {"trained_at", m.trained_at ? Json(*m.trained_at) : Json(nullptr)},
                     {"test_accuracy", m.artifact->test_accuracy}});
    }
    send_json(res, 200, out);
  }));

  s.Get("/api/health", guarded([&svc](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"model_loaded", svc.model_loaded()}});
  }));

  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404 && res.body.empty() && req.path.rfind("/api/", 0) == 0) {
      send_error(res, 404, "not_found", "no route for " + req.method + " " + req.path);
    }
  });
}

}  // namespace medtx
