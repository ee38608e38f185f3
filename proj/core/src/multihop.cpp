#include "webgym/multihop.hpp"

#include "webgym/hash.hpp"
#include "webgym/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

namespace webgym {

using nlohmann::json;

std::string KnowledgeGraph::to_json() const {
    json j;
    json ents = json::array();
    for (const auto& [id, e] : entities) {
        ents.push_back({{"id", e.id}, {"name", e.name}, {"features", e.features}});
    }
    j["entities"] = std::move(ents);
    json rels = json::array();
    for (const auto& r : relations) {
        rels.push_back(json::array({r.src, r.label, r.dst}));
    }
    j["relations"] = std::move(rels);
    j["under_size"] = under_size;
    return j.dump();
}

std::optional<KnowledgeGraph> KnowledgeGraph::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (!j.is_object()) return std::nullopt;
    KnowledgeGraph g;
    for (const auto& e : j.value("entities", json::array())) {
        Entity entity;
        entity.id = e.value("id", 0);
        entity.name = e.value("name", "");
        if (e.contains("features")) {
            entity.features = e["features"].get<std::vector<std::string>>();
        }
        g.entities[entity.id] = std::move(entity);
    }
    for (const auto& r : j.value("relations", json::array())) {
        if (!r.is_array() || r.size() != 3) continue;
        g.relations.push_back({r[0].get<int>(), r[1].get<std::string>(), r[2].get<int>()});
    }
    g.under_size = j.value("under_size", false);
    return g;
}

namespace {

bool blocklisted(const std::string& name, const std::vector<std::string>& blocklist) {
    const std::string lowered = to_lower(trim(name));
    for (const auto& blocked : blocklist) {
        if (lowered == to_lower(blocked)) return true;
    }
    return false;
}

}  // namespace

KnowledgeGraph build_graph(const std::string& seed_name, GraphClient& client,
                           WebSearchClient& web_search, FetcherClient& fetcher,
                           const GraphBuildParams& params) {
    if (trim(seed_name).empty()) throw std::invalid_argument("build_graph: empty seed");
    KnowledgeGraph graph;
    int next_id = 0;
    std::map<std::string, int> by_name;

    auto add_entity = [&](const std::string& name) {
        const int id = next_id++;
        graph.entities[id] = Entity{id, name, {}};
        by_name[name] = id;
        return id;
    };

    std::deque<int> frontier;
    frontier.push_back(add_entity(trim(seed_name)));

    while (!frontier.empty() &&
           graph.entities.size() < static_cast<std::size_t>(params.n_max)) {
        const int current = frontier.front();
        frontier.pop_front();
        Entity& entity = graph.entities[current];

        std::string evidence;
        try {
            const auto results = web_search.web_search(entity.name, params.search_results);
            const auto urls = client.select_sources(entity.name, results);
            for (const auto& url : urls) {
                try {
                    if (!evidence.empty()) evidence += "\n\n";
                    evidence += fetcher.fetch(url);
                } catch (const std::exception&) {
                    // dead source, keep going with the rest
                }
            }
            auto features = client.extract_features(entity.name, evidence);
            if (features.size() > static_cast<std::size_t>(params.k_feat)) {
                features.resize(static_cast<std::size_t>(params.k_feat));
            }
            entity.features = std::move(features);

            // The client names at most k_ent candidates; exclusions are
            // applied to those, so a blocklisted discovery consumes a slot.
            const auto discovered = client.discover_entities(entity.name, evidence);
            int considered = 0;
            for (const auto& d : discovered) {
                if (considered >= params.k_ent) break;
                ++considered;
                const std::string name = trim(d.name);
                if (name.empty() || name == entity.name) continue;  // no self-loops
                if (blocklisted(name, params.blocklist)) continue;
                auto it = by_name.find(name);
                int other;
                if (it == by_name.end()) {
                    other = add_entity(name);
                    frontier.push_back(other);
                } else {
                    other = it->second;  // known entity: relation only
                }
                if (other == current) continue;
                Relation rel = d.outgoing ? Relation{current, d.relation_label, other}
                                          : Relation{other, d.relation_label, current};
                graph.relations.push_back(std::move(rel));
            }
        } catch (const std::exception&) {
            continue;  // client or search failure: skip this entity
        }
    }
    graph.under_size = graph.entities.size() < static_cast<std::size_t>(params.n_max);
    return graph;
}

std::string Subgraph::label_of(int id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].id == id) {
            return std::string("Entity ") + static_cast<char>('A' + i);
        }
    }
    throw std::invalid_argument("label_of: id not in subgraph");
}

std::map<std::string, std::string> Subgraph::label_to_name() const {
    std::map<std::string, std::string> mapping;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        mapping[std::string("Entity ") + static_cast<char>('A' + i)] = nodes[i].name;
    }
    return mapping;
}

Subgraph sample_subgraph(const KnowledgeGraph& graph, std::mt19937_64& rng,
                         double perturbation, std::size_t max_nodes) {
    if (graph.entities.empty()) {
        throw std::invalid_argument("sample_subgraph: empty graph");
    }
    std::vector<int> ids;
    ids.reserve(graph.entities.size());
    for (const auto& [id, e] : graph.entities) ids.push_back(id);

    std::uniform_int_distribution<std::size_t> root_dist(0, ids.size() - 1);
    const int root = ids[root_dist(rng)];

    const std::size_t target = std::min(max_nodes, ids.size());
    std::set<int> chosen{root};
    std::uniform_real_distribution<double> perturb(0.0, perturbation);

    while (chosen.size() < target) {
        // Candidates adjacent to the current subgraph, visited in ascending
        // id order so perturbation draws are reproducible.
        std::map<int, int> edge_counts;  // candidate id -> edges into subgraph
        for (const auto& r : graph.relations) {
            const bool src_in = chosen.count(r.src) > 0;
            const bool dst_in = chosen.count(r.dst) > 0;
            if (src_in && !dst_in) ++edge_counts[r.dst];
            if (dst_in && !src_in) ++edge_counts[r.src];
        }
        if (edge_counts.empty()) break;  // disconnected remainder

        int best_id = -1;
        double best_score = -1.0;
        for (const auto& [candidate, edges] : edge_counts) {
            double score = static_cast<double>(edges);
            if (perturbation > 0.0) score += perturb(rng);
            if (score > best_score) {  // strict: ties keep the lowest id
                best_score = score;
                best_id = candidate;
            }
        }
        chosen.insert(best_id);
    }

    Subgraph sub;
    sub.root_id = root;
    sub.complete = chosen.size() == target;
    for (int id : chosen) {  // std::set iterates ascending
        const Entity& e = graph.entities.at(id);
        SubgraphNode node;
        node.id = id;
        node.name = e.name;
        node.features = e.features;
        if (node.features.size() > 3) node.features.resize(3);
        sub.nodes.push_back(std::move(node));
    }
    for (const auto& r : graph.relations) {
        if (chosen.count(r.src) > 0 && chosen.count(r.dst) > 0) {
            sub.relations.push_back(r);
        }
    }
    return sub;
}

std::string format_subgraph(const Subgraph& sub) {
    std::ostringstream out;
    for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
        out << "Entity " << static_cast<char>('A' + i) << ":\n";
        for (const auto& f : sub.nodes[i].features) {
            out << "- " << f << "\n";
        }
    }
    out << "Relations:\n";
    for (const auto& r : sub.relations) {
        out << sub.label_of(r.src) << " -[" << r.label << "]-> " << sub.label_of(r.dst)
            << "\n";
    }
    return out.str();
}

std::optional<QAPair> compose_question(const Subgraph& sub, GraphClient& client,
                                       int iteration) {
    const std::string formatted = format_subgraph(sub);
    const auto mapping = sub.label_to_name();
    for (int attempt = 0; attempt < 2; ++attempt) {
        ComposedQuestion composed;
        try {
            composed = client.compose_question(formatted);
        } catch (const std::exception&) {
            continue;
        }
        auto it = mapping.find(composed.target_label);
        if (it == mapping.end()) continue;
        const std::string& answer = it->second;
        // The question must not leak the answer.
        if (to_lower(composed.question).find(to_lower(answer)) != std::string::npos) {
            continue;
        }
        QAPair qa;
        qa.question = composed.question;
        qa.answer = answer;
        qa.origin_url = "";  // graph questions have no single origin page
        qa.capability_tag = CapabilityTag::direct;
        qa.iteration = iteration;
        qa.qa_id = make_qa_id("multihop", qa.question);
        return qa;
    }
    return std::nullopt;
}

}  // namespace webgym
