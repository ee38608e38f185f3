#pragma once

#include "webgym/tool_gateway.hpp"

#include <memory>
#include <string>
#include <utility>

namespace webgym {

inline constexpr std::string_view kBindEnvVar = "WEBGYM_BIND";

// "host:port" -> parts; either side may be omitted ("0.0.0.0:8089" default).
std::pair<std::string, int> parse_bind_address(const std::string& spec,
                                               const std::string& default_host = "127.0.0.1",
                                               int default_port = 8089);

// JSON-over-HTTP face of the gateway:
//   POST /search {"query":...}        -> {"ok":..., "results":[{"rank","title","url","snippet"}]}
//   POST /browse {"url":...,"query":...} -> {"ok":..., "summary":...}
//   GET  /healthz                     -> 200 "ok"
// Failed requests keep 200 with ok=false and in-band error text, matching the
// in-process observations.
class GatewayService {
public:
    explicit GatewayService(std::shared_ptr<ToolGateway> gateway);
    ~GatewayService();

    GatewayService(const GatewayService&) = delete;
    GatewayService& operator=(const GatewayService&) = delete;

    // Serves on a background thread; port 0 picks a free port. Returns the
    // bound port, or -1 on bind failure.
    int start(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace webgym
