#include "webgym/gateway_service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <thread>

namespace webgym {

using nlohmann::json;

std::pair<std::string, int> parse_bind_address(const std::string& spec,
                                               const std::string& default_host,
                                               int default_port) {
    if (spec.empty()) return {default_host, default_port};
    auto colon = spec.rfind(':');
    if (colon == std::string::npos) return {spec, default_port};
    std::string host = spec.substr(0, colon);
    if (host.empty()) host = default_host;
    int port = default_port;
    const std::string port_str = spec.substr(colon + 1);
    if (!port_str.empty()) port = std::stoi(port_str);
    return {host, port};
}

struct GatewayService::Impl {
    std::shared_ptr<ToolGateway> gateway;
    httplib::Server server;
    std::thread worker;
};

GatewayService::GatewayService(std::shared_ptr<ToolGateway> gateway)
    : impl_(std::make_unique<Impl>()) {
    impl_->gateway = std::move(gateway);

    impl_->server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });

    impl_->server.Post("/search", [this](const httplib::Request& req,
                                         httplib::Response& res) {
        json body = json::parse(req.body, nullptr, false);
        if (!body.is_object() || !body.contains("query") || !body["query"].is_string()) {
            res.status = 400;
            res.set_content(R"({"ok":false,"error":"malformed request"})",
                            "application/json");
            return;
        }
        auto result = impl_->gateway->search_structured(body["query"].get<std::string>());
        json out;
        out["ok"] = result.ok;
        json hits = json::array();
        for (const auto& h : result.hits) {
            hits.push_back({{"rank", h.rank},
                            {"title", h.title},
                            {"url", h.url},
                            {"snippet", h.snippet}});
        }
        out["results"] = std::move(hits);
        if (!result.ok) out["error"] = result.error;
        res.set_content(out.dump(), "application/json");
    });

    impl_->server.Post("/browse", [this](const httplib::Request& req,
                                         httplib::Response& res) {
        json body = json::parse(req.body, nullptr, false);
        if (!body.is_object() || !body.contains("url") || !body["url"].is_string()) {
            res.status = 400;
            res.set_content(R"({"ok":false,"error":"malformed request"})",
                            "application/json");
            return;
        }
        auto obs = impl_->gateway->tool_browse(body["url"].get<std::string>(),
                                               body.value("query", ""));
        json out;
        out["ok"] = obs.ok;
        out["summary"] = obs.text;
        res.set_content(out.dump(), "application/json");
    });
}

GatewayService::~GatewayService() {
    stop();
}

int GatewayService::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) return -1;
    } else if (!impl_->server.bind_to_port(host, port)) {
        return -1;
    }
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void GatewayService::stop() {
    if (impl_ && impl_->worker.joinable()) {
        impl_->server.stop();
        impl_->worker.join();
    }
}

}  // namespace webgym
