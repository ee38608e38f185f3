#pragma once

#include "webgym/qa_synthesis.hpp"

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace webgym {

struct Entity {
    int id = 0;
    std::string name;
    std::vector<std::string> features;
};

struct Relation {
    int src = 0;
    std::string label;
    int dst = 0;
};

// Directed entity graph grown from a seed by search -> extract -> discover
// rounds. No self-loops; endpoints always exist; at most N_max + K_ent nodes
// (the final discovery round may overshoot by one step).
struct KnowledgeGraph {
    std::map<int, Entity> entities;
    std::vector<Relation> relations;
    bool under_size = false;  // frontier exhausted below N_max

    std::string to_json() const;
    static std::optional<KnowledgeGraph> from_json(const std::string& text);
};

struct DiscoveredEntity {
    std::string name;
    std::string relation_label;
    bool outgoing = true;  // frontier entity -> discovered; false reverses it
};

struct ComposedQuestion {
    std::string target_label;  // anonymized, e.g. "Entity C"
    std::string question;
};

// The LLM roles in graph construction and backward question generation, one
// typed method per prompt. Fixtures script these directly.
class GraphClient {
public:
    virtual ~GraphClient() = default;
    virtual std::vector<std::string> select_sources(
        const std::string& entity, const std::vector<SearchResultRef>& results) = 0;
    virtual std::vector<std::string> extract_features(const std::string& entity,
                                                      const std::string& evidence) = 0;
    virtual std::vector<DiscoveredEntity> discover_entities(
        const std::string& entity, const std::string& evidence) = 0;
    virtual ComposedQuestion compose_question(const std::string& formatted_subgraph) = 0;
};

struct GraphBuildParams {
    int n_max = 8;
    int k_feat = 2;
    int k_ent = 2;
    std::size_t search_results = 10;
    std::vector<std::string> blocklist = {"Wikipedia", "Britannica", "YouTube", "Google"};
};

// Frontier loop per Phase 1: search the entity, let the client pick sources,
// fetch evidence, extract <= k_feat features, discover <= k_ent new concrete
// entities with directed relations. Blocklisted names are rejected locally;
// generic-concept filtering beyond that belongs to the client prompt. Stops
// once |V| >= n_max or the frontier drains (under_size flag).
KnowledgeGraph build_graph(const std::string& seed_name, GraphClient& client,
                           WebSearchClient& web_search, FetcherClient& fetcher,
                           const GraphBuildParams& params = {});

struct SubgraphNode {
    int id = 0;
    std::string name;                   // real name; never rendered
    std::vector<std::string> features;  // <= 3
};

struct Subgraph {
    std::vector<SubgraphNode> nodes;  // ascending id; labels follow this order
    std::vector<Relation> relations;  // induced
    int root_id = 0;                  // the BFS root the sampler started from
    bool complete = true;             // false if growth stalled (disconnected graph)

    std::string label_of(int id) const;                 // "Entity A", "Entity B", ...
    std::map<std::string, std::string> label_to_name() const;
};

// Connectivity-biased sampling: uniform random root, then repeatedly add the
// frontier candidate maximizing (edges into the current subgraph) + a fresh
// Uniform(0, perturbation) draw, ties to the lowest id, until min(6, |V|)
// nodes. perturbation = 0 is the pure-greedy oracle mode.
Subgraph sample_subgraph(const KnowledgeGraph& graph, std::mt19937_64& rng,
                         double perturbation = 0.5, std::size_t max_nodes = 6);

// Stable anonymized rendering: entity blocks with <= 3 features, then
// relation triples, real names absent throughout.
std::string format_subgraph(const Subgraph& sub);

// Backward question composition: the client picks a target label and writes
// the multi-hop question; the answer is the target's real name. A question
// leaking the answer is retried once, then dropped.
std::optional<QAPair> compose_question(const Subgraph& sub, GraphClient& client,
                                       int iteration = 0);

}  // namespace webgym
