#include "fixture_clients.hpp"

#include "webgym/prompts.hpp"
#include "webgym/toy_env.hpp"

#include <fstream>
#include <stdexcept>

namespace webgym::cli {

using nlohmann::json;

namespace {

json lookup(const json& table, const std::string& key) {
    if (table.is_object()) {
        if (table.contains(key)) return table[key];
        if (table.contains("*")) return table["*"];
    }
    throw std::runtime_error("fixture has no entry for: " + key);
}

std::string as_text(const json& value) {
    return value.is_string() ? value.get<std::string>() : value.dump();
}

class StaticGenerator final : public GeneratorClient {
public:
    explicit StaticGenerator(std::string response) : response_(std::move(response)) {}
    std::string generate(const std::string&) override { return response_; }

private:
    std::string response_;
};

// Rubric judge keyed by the question, recovered from the filled prompt's
// evaluation block.
class RubricFixtureJudge final : public GeneratorClient {
public:
    explicit RubricFixtureJudge(json table) : table_(std::move(table)) {}

    std::string generate(const std::string& prompt) override {
        // The last "Question: ..." line carries the pair under evaluation.
        const std::string needle = "Question: ";
        auto pos = prompt.rfind(needle);
        if (pos == std::string::npos) throw std::runtime_error("unrecognized rubric prompt");
        auto end = prompt.find('\n', pos);
        const std::string question =
            prompt.substr(pos + needle.size(), end - pos - needle.size());
        return as_text(lookup(table_, question));
    }

private:
    json table_;
};

class FixtureWebSearch final : public WebSearchClient {
public:
    explicit FixtureWebSearch(json table) : table_(std::move(table)) {}

    std::vector<SearchResultRef> web_search(const std::string& query,
                                            std::size_t n) override {
        const json hits = lookup(table_, query);
        std::vector<SearchResultRef> out;
        for (const auto& h : hits) {
            if (out.size() >= n) break;
            out.push_back({h.value("url", ""), h.value("title", "")});
        }
        return out;
    }

private:
    json table_;
};

class FixtureFetcher final : public FetcherClient {
public:
    explicit FixtureFetcher(json table) : table_(std::move(table)) {}

    std::string fetch(const std::string& url) override {
        return as_text(lookup(table_, url));
    }

private:
    json table_;
};

class FixtureGraphClient final : public GraphClient {
public:
    explicit FixtureGraphClient(json root) : root_(std::move(root)) {}

    std::vector<std::string> select_sources(
        const std::string& entity, const std::vector<SearchResultRef>& results) override {
        if (root_.contains("sources")) {
            const json urls = lookup(root_["sources"], entity);
            return urls.get<std::vector<std::string>>();
        }
        std::vector<std::string> out;
        for (const auto& r : results) out.push_back(r.url);
        return out;
    }

    std::vector<std::string> extract_features(const std::string& entity,
                                              const std::string&) override {
        if (!root_.contains("features")) return {};
        return lookup(root_["features"], entity).get<std::vector<std::string>>();
    }

    std::vector<DiscoveredEntity> discover_entities(const std::string& entity,
                                                    const std::string&) override {
        std::vector<DiscoveredEntity> out;
        if (!root_.contains("discover")) return out;
        json items;
        try {
            items = lookup(root_["discover"], entity);
        } catch (const std::exception&) {
            return out;  // frontier entity with no scripted discoveries
        }
        for (const auto& d : items) {
            out.push_back({d.value("name", ""), d.value("label", "related to"),
                           d.value("outgoing", true)});
        }
        return out;
    }

    ComposedQuestion compose_question(const std::string&) override {
        if (!root_.contains("compose")) {
            throw std::runtime_error("fixtures lack a compose entry");
        }
        const json& c = root_["compose"];
        return {c.value("target_label", ""), c.value("question", "")};
    }

private:
    json root_;
};

}  // namespace

FixtureClients FixtureClients::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open fixtures file " + path);
    json root = json::parse(in);
    return FixtureClients(std::move(root));
}

FixtureClients::FixtureClients(json root) : root_(std::move(root)) {}

std::unique_ptr<GeneratorClient> FixtureClients::extract_generator_for(
    const std::string& url) const {
    if (!root_.contains("extract")) {
        throw std::runtime_error("fixtures lack an extract table");
    }
    return std::make_unique<StaticGenerator>(as_text(lookup(root_["extract"], url)));
}

std::unique_ptr<GeneratorClient> FixtureClients::rubric_judge() const {
    if (!root_.contains("rubric")) {
        throw std::runtime_error("fixtures lack a rubric table");
    }
    return std::make_unique<RubricFixtureJudge>(root_["rubric"]);
}

std::unique_ptr<WebSearchClient> FixtureClients::web_search() const {
    return std::make_unique<FixtureWebSearch>(root_.value("web_search", json::object()));
}

std::unique_ptr<FetcherClient> FixtureClients::fetcher() const {
    return std::make_unique<FixtureFetcher>(root_.value("fetch", json::object()));
}

std::unique_ptr<GraphClient> FixtureClients::graph_client() const {
    return std::make_unique<FixtureGraphClient>(root_);
}

ScriptedPolicySpec ScriptedPolicySpec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open policy script " + path);
    ScriptedPolicySpec spec;
    spec.root = json::parse(in);
    return spec;
}

PolicyFactory ScriptedPolicySpec::factory_for(const std::string& question,
                                              const std::string& gold) const {
    json entry;
    if (root.is_object() && root.contains(question)) {
        entry = root[question];
    } else if (root.is_object() && root.contains("*")) {
        entry = root["*"];
    } else {
        throw std::runtime_error("policy script has no entry for question: " + question);
    }

    if (entry.is_number()) {
        return scripted_bernoulli_factory(gold, entry.get<double>());
    }
    if (entry.is_array() && (entry.empty() || entry[0].is_number_integer())) {
        std::set<std::uint64_t> seeds;
        for (const auto& s : entry) seeds.insert(s.get<std::uint64_t>());
        return scripted_success_factory(gold, std::move(seeds));
    }
    if (entry.is_array()) {
        auto messages = entry.get<std::vector<std::string>>();
        return [messages](std::uint64_t) {
            return std::make_unique<ScriptedPolicy>(messages);
        };
    }
    throw std::runtime_error("unrecognized policy script entry for: " + question);
}

}  // namespace webgym::cli
