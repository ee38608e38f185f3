#pragma once

#include "webgym/episode.hpp"
#include "webgym/multihop.hpp"
#include "webgym/qa_synthesis.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace webgym::cli {

// Offline doubles for every pluggable client, driven by one JSON fixtures
// file (see README for the schema). Lookups key on the natural id (url,
// question, entity name) with "*" as fallback; a missing key throws, which
// surfaces as the client-failure path of the pipeline under test.
class FixtureClients {
public:
    static FixtureClients load(const std::string& path);
    explicit FixtureClients(nlohmann::json root);

    // GeneratorClient double returning the canned extraction output for a url.
    std::unique_ptr<GeneratorClient> extract_generator_for(const std::string& url) const;
    // GeneratorClient double returning the canned rubric output for a question.
    std::unique_ptr<GeneratorClient> rubric_judge() const;

    std::unique_ptr<WebSearchClient> web_search() const;
    std::unique_ptr<FetcherClient> fetcher() const;
    std::unique_ptr<GraphClient> graph_client() const;

private:
    nlohmann::json root_;
};

// Scripted policy spec file:
//   {"<question>": ["message", ...], "*": [...]}             (rollout mode)
//   {"<question>": [0, 2, 5], ...}                           (correct seeds)
//   {"<question>": 0.4, ...}                                 (success probability)
struct ScriptedPolicySpec {
    static ScriptedPolicySpec load(const std::string& path);

    PolicyFactory factory_for(const std::string& question, const std::string& gold) const;

    nlohmann::json root;
};

}  // namespace webgym::cli
