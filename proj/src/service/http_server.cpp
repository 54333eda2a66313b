#include <httplib.h>

#include "vtv/error.hpp"
#include "vtv/service/rating_service.hpp"

namespace vtv::service {

struct HttpServer::Impl {
  RatingService* service = nullptr;
  httplib::Server server;
};

HttpServer::HttpServer(RatingService& service) : impl_(std::make_unique<Impl>()) {
  impl_->service = &service;
  const auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    Request r{req.method, req.path, req.get_header_value("X-Session-Token"), req.body};
    const Response out = impl_->service->handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type.c_str());
  };
  impl_->server.Get(R"(/.*)", forward);
  impl_->server.Post(R"(/.*)", forward);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error(ErrorKind::Io, "cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace vtv::service
