#include "sidequest/tools.hpp"

#include "httplib.h"

#include <thread>

namespace sidequest {

struct ToolServer::Impl {
    ToolBackend& backend;
    httplib::Server server;
    std::thread worker;
    std::mutex mu;

    explicit Impl(ToolBackend& b) : backend(b) {
        server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"status":"ok"})", "application/json");
        });
        server.Post("/tools/reset", [this](const httplib::Request&, httplib::Response& res) {
            std::lock_guard lock(mu);
            backend.reset();
            res.set_content(R"({"status":"ok"})", "application/json");
        });
        server.Post("/tools/call", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body, nullptr, false);
            const auto call = body.is_discarded() ? std::nullopt : tool_call_from_json(body);
            if (!call) {
                res.status = 400;
                res.set_content(R"({"error":"expected {\"name\": \"search\"|\"open\", \"args\": ...}"})",
                                "application/json");
                return;
            }
            ToolOutput out;
            {
                std::lock_guard lock(mu);
                out = backend.execute(*call);
            }
            nlohmann::ordered_json j;
            j["cursor_id"] = out.cursor_id;
            j["text"] = out.text;
            res.set_content(j.dump(), "application/json");
        });
    }
};

ToolServer::ToolServer(ToolBackend& backend) : impl_(std::make_unique<Impl>(backend)) {}

ToolServer::~ToolServer() { stop(); }

int ToolServer::start(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) return -1;
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

bool ToolServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

void ToolServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

} // namespace sidequest
