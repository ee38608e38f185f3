#include "webgym/search_index.hpp"

#include "oracles.hpp"
#include "webgym/toy_env.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace webgym;

namespace {

WebPage page_of(const std::string& url, const std::string& title,
                const std::string& summary) {
    WebPage p;
    p.url = url;
    p.title = title;
    p.summary = summary;
    p.content_markdown = std::string(1200, 'c');
    return p;
}

std::shared_ptr<HashingEmbedder> embedder_of(std::size_t dim = 64) {
    return std::make_shared<HashingEmbedder>(dim);
}

// A deliberately failing embedder for the skip-and-continue path.
struct FlakyEmbedder final : Embedder {
    std::size_t dim() const override { return 8; }
    std::vector<double> embed(std::string_view text) const override {
        if (text.find("poison") != std::string_view::npos) {
            throw std::runtime_error("embedder failure");
        }
        return HashingEmbedder(8).embed(text);
    }
};

}  // namespace

TEST_SUITE("search_index") {

TEST_CASE("build indexes every page once; duplicates are a hard error") {
    auto pages = std::vector<WebPage>{page_of("https://a.example/1", "alpha", "one"),
                                      page_of("https://a.example/2", "beta", "two"),
                                      page_of("https://a.example/3", "gamma", "three")};
    auto index = SearchIndex::build(pages, embedder_of());
    CHECK(index.size() == 3);

    pages.push_back(page_of("https://a.example/1", "alpha again", "dup"));
    CHECK_THROWS_AS(SearchIndex::build(pages, embedder_of()), std::invalid_argument);
}

TEST_CASE("embedder failure skips the page and reports it") {
    auto pages = std::vector<WebPage>{page_of("https://a.example/1", "fine", "ok"),
                                      page_of("https://a.example/2", "poison", "bad")};
    BuildReport report;
    auto index = SearchIndex::build(pages, std::make_shared<FlakyEmbedder>(), {}, &report);
    CHECK(index.size() == 1);
    CHECK(report.indexed == 1);
    REQUIRE(report.skipped_urls.size() == 1);
    CHECK(report.skipped_urls[0] == "https://a.example/2");
}

TEST_CASE("page with empty summary is retrievable by title terms") {
    auto pages = std::vector<WebPage>{
        page_of("https://a.example/1", "zephyrqux report", ""),
        page_of("https://a.example/2", "other", "unrelated words")};
    auto index = SearchIndex::build(pages, embedder_of());
    auto hits = index.sparse_search("zephyrqux", 5);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].url == "https://a.example/1");
}

TEST_CASE("dense self-similarity puts the page first with score 1") {
    auto pages = std::vector<WebPage>{page_of("https://a.example/1", "alpha beta", "gamma"),
                                      page_of("https://a.example/2", "delta", "epsilon")};
    auto index = SearchIndex::build(pages, embedder_of());
    auto hits = index.dense_search("alpha beta. gamma", 2);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].url == "https://a.example/1");
    CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("k handling: zero throws, oversized k returns everything") {
    auto pages = std::vector<WebPage>{page_of("https://a.example/1", "alpha", "x"),
                                      page_of("https://a.example/2", "beta", "y")};
    auto index = SearchIndex::build(pages, embedder_of());
    CHECK_THROWS_AS(index.dense_search("alpha", 0), std::invalid_argument);
    CHECK_THROWS_AS(index.sparse_search("alpha", 0), std::invalid_argument);
    CHECK_THROWS_AS(index.hybrid_search("alpha", 0), std::invalid_argument);
    CHECK(index.dense_search("alpha", 100).size() == 2);
}

TEST_CASE("dense ranking equals the exhaustive cosine oracle") {
    ToyEnvParams params;
    params.n_tasks = 40;
    params.hop_depth_weights = {{1, 0.6}, {2, 0.4}};
    params.distractor_pages = 30;
    const auto env = generate_env(params, 11);
    auto embedder = embedder_of(32);
    auto index = SearchIndex::build(env.pages, embedder);
    for (std::size_t i = 0; i < 20; ++i) {
        const auto& q = env.tasks[i % env.tasks.size()].question;
        const auto got = index.dense_search(q, 15);
        const auto want = oracle::cosine_ranking(env.pages, *embedder, q);
        REQUIRE(got.size() == 15);
        for (std::size_t r = 0; r < got.size(); ++r) {
            CHECK(got[r].url == want[r].url);
            CHECK(got[r].score == doctest::Approx(want[r].score).epsilon(1e-9));
        }
    }
}

TEST_CASE("sparse: unique title term ranks first; OOV query is empty") {
    auto pages = std::vector<WebPage>{
        page_of("https://a.example/1", "unique kraken sighting", "report of events"),
        page_of("https://a.example/2", "plain report", "report of other events")};
    auto index = SearchIndex::build(pages, embedder_of());
    auto hits = index.sparse_search("kraken", 5);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].url == "https://a.example/1");
    CHECK(index.sparse_search("zzznotindexed", 5).empty());
}

TEST_CASE("sparse scores match the reference BM25 on a 5-document corpus") {
    // Small hand corpus with varied lengths and term frequencies.
    std::vector<WebPage> pages = {
        page_of("https://d.example/1", "falcon falcon nest", "desert birds"),
        page_of("https://d.example/2", "falcon migration", "long route over water"),
        page_of("https://d.example/3",
                "sparrow nest survey", "urban bird counts and nest notes"),
        page_of("https://d.example/4", "owl habits", "night hunting behavior"),
        page_of("https://d.example/5", "falcon owl overlap", "shared hunting range"),
    };
    auto index = SearchIndex::build(pages, embedder_of());
    for (const std::string query : {"falcon", "nest", "falcon nest", "owl hunting"}) {
        const auto got = index.sparse_search(query, 5);
        const auto want = oracle::bm25_ranking(pages, query, 1.2, 0.75);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].url == want[i].url);
            CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-9));
        }
    }
    // One frozen value, computed by hand from the reference formula:
    // "falcon" in doc1: tf=2, df=3, N=5, dl=5, avgdl=31/5=6.2,
    // idf=ln(1+2.5/3.5)=0.5389965, len_norm=1.2*(0.25+0.75*5/6.2)=1.0258065,
    // score=0.5389965*(2*2.2)/(2+1.0258065)=0.783786.
    const auto hits = index.sparse_search("falcon", 1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].url == "https://d.example/1");
    CHECK(hits[0].score == doctest::Approx(0.783786).epsilon(1e-4));
}

TEST_CASE("rrf fused score matches the formula on known rank positions") {
    // Three docs engineered so that doc A is dense rank 1 and sparse rank 3.
    // Dense: titles share tokens with the query in decreasing proportion.
    // Sparse: rare terms push A below B and C.
    std::vector<WebPage> pages = {
        page_of("https://r.example/a", "query words exactly match here", ""),
        page_of("https://r.example/b", "query words somewhat", "rarewordb rarewordb"),
        page_of("https://r.example/c", "query only", "rarewordc rarewordc rarewordc"),
    };
    IndexConfig cfg;
    cfg.rrf_kappa = 60.0;
    auto index = SearchIndex::build(pages, embedder_of(), cfg);
    const std::string query = "query words exactly match here rarewordb rarewordc";

    const auto dense = index.dense_search(query, 3);
    const auto sparse = index.sparse_search(query, 3);
    REQUIRE(dense.size() == 3);
    REQUIRE(sparse.size() == 3);

    // Fused score of every document must equal 1/(60+r_dense) + 1/(60+r_sparse).
    auto rank_of = [](const std::vector<ScoredDoc>& docs, const std::string& url) {
        for (std::size_t i = 0; i < docs.size(); ++i) {
            if (docs[i].url == url) return static_cast<double>(i + 1);
        }
        return 0.0;
    };
    for (const auto& hit : index.hybrid_search(query, 3)) {
        const double expected = 1.0 / (60.0 + rank_of(dense, hit.url)) +
                                1.0 / (60.0 + rank_of(sparse, hit.url));
        CHECK(hit.fused_score == doctest::Approx(expected).epsilon(1e-12));
    }

    // The formula's arithmetic itself, frozen: rank 1 + rank 3 and a
    // single-list rank 2.
    CHECK(1.0 / 61.0 + 1.0 / 63.0 == doctest::Approx(0.032266).epsilon(1e-4));
    CHECK(1.0 / 62.0 == doctest::Approx(0.0161290).epsilon(1e-5));
}

TEST_CASE("hybrid equals the brute-force RRF oracle on a generated corpus") {
    ToyEnvParams params;
    params.n_tasks = 50;
    params.hop_depth_weights = {{1, 0.5}, {2, 0.5}};
    params.distractor_pages = 40;
    const auto env = generate_env(params, 5);
    auto embedder = embedder_of(32);
    IndexConfig cfg;
    cfg.fusion_depth = 30;
    auto index = SearchIndex::build(env.pages, embedder, cfg);
    for (std::size_t i = 0; i < env.tasks.size(); i += 3) {
        const auto& q = env.tasks[i].question;
        const auto got = index.hybrid_search(q, 10);
        const auto want = oracle::hybrid_ranking(env.pages, *embedder, q, cfg.rrf_kappa,
                                                 cfg.fusion_depth, cfg.bm25_k1,
                                                 cfg.bm25_b, 10);
        REQUIRE(got.size() == want.size());
        for (std::size_t r = 0; r < got.size(); ++r) {
            CHECK(got[r].url == want[r].url);
            CHECK(got[r].rank == static_cast<int>(r + 1));
        }
    }
}

TEST_CASE("rrf monotonicity: improving a rank never lowers the fused score") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> rank_dist(1, 100);
    for (int trial = 0; trial < 200; ++trial) {
        const double kappa = trial % 2 == 0 ? 60.0 : 10.0;
        int dense_rank = rank_dist(rng);
        int sparse_rank = rank_dist(rng);
        auto fused = [kappa](int rd, int rs) {
            return 1.0 / (kappa + rd) + 1.0 / (kappa + rs);
        };
        if (dense_rank > 1) {
            CHECK(fused(dense_rank - 1, sparse_rank) > fused(dense_rank, sparse_rank));
        }
        if (sparse_rank > 1) {
            CHECK(fused(dense_rank, sparse_rank - 1) > fused(dense_rank, sparse_rank));
        }
    }
}

TEST_CASE("results are independent of insertion order") {
    ToyEnvParams params;
    params.n_tasks = 20;
    params.distractor_pages = 10;
    auto env = generate_env(params, 9);
    auto index_a = SearchIndex::build(env.pages, embedder_of());
    auto shuffled = env.pages;
    std::mt19937_64 rng(4);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto index_b = SearchIndex::build(shuffled, embedder_of());
    for (const auto& task : env.tasks) {
        const auto a = index_a.hybrid_search(task.question, 10);
        const auto b = index_b.hybrid_search(task.question, 10);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].url == b[i].url);
            CHECK(a[i].fused_score == b[i].fused_score);  // bit-identical
        }
    }
}

TEST_CASE("remove hides a url from all searches; re-add restores it") {
    auto pages = std::vector<WebPage>{
        page_of("https://a.example/1", "kraken report", "deep sea"),
        page_of("https://a.example/2", "other report", "land notes")};
    auto index = SearchIndex::build(pages, embedder_of());
    REQUIRE(index.sparse_search("kraken", 5).size() == 1);

    index.remove("https://a.example/1");
    CHECK(index.size() == 1);
    CHECK(index.sparse_search("kraken", 5).empty());
    for (const auto& hit : index.hybrid_search("kraken report", 5)) {
        CHECK(hit.url != "https://a.example/1");
    }
    index.remove("https://a.example/1");       // idempotent
    index.remove("https://unknown.example/");  // no-op
    CHECK(index.size() == 1);

    index.add_pages({pages[0]});
    CHECK(index.size() == 2);
    REQUIRE(index.sparse_search("kraken", 5).size() == 1);
}

TEST_CASE("page vectors are unit-norm with non-negative sparse weights") {
    ToyEnvParams params;
    params.n_tasks = 10;
    auto env = generate_env(params, 2);
    auto index = SearchIndex::build(env.pages, embedder_of());
    for (const auto& page : env.pages) {
        const auto pv = index.page_vector(page.url);
        double norm = 0.0;
        for (double x : pv.dense) norm += x * x;
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
        for (const auto& [term, weight] : pv.sparse) CHECK(weight >= 0.0);
    }
}

TEST_CASE("save/load round-trips bit-identical rankings") {
    namespace fs = std::filesystem;
    ToyEnvParams params;
    params.n_tasks = 15;
    auto env = generate_env(params, 8);
    auto embedder = embedder_of();
    auto index = SearchIndex::build(env.pages, embedder);
    const auto path =
        (fs::temp_directory_path() / "webgym-index-test.jsonl").string();
    index.save(path);
    auto loaded = SearchIndex::load(path, embedder);
    CHECK(loaded.size() == index.size());
    for (const auto& task : env.tasks) {
        const auto a = index.hybrid_search(task.question, 10);
        const auto b = loaded.hybrid_search(task.question, 10);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].url == b[i].url);
            CHECK(a[i].fused_score == b[i].fused_score);
        }
    }
    fs::remove(path);

    //

 Version guard: a wrong magic line refuses to load.
    {
        std::ofstream bad(path);
        bad << "{\"magic\":\"other\",\"version\":1,\"dim\":64}\n";
    }
    CHECK_THROWS(SearchIndex::load(path, embedder));
    fs::remove(path);
}

TEST_CASE("snippet is the first 200 characters of the summary") {
    std::string longsum(300, 's');
    auto pages = std::vector<WebPage>{page_of("https://a.example/1", "krakenx", longsum)};
    auto index = SearchIndex::build(pages, embedder_of());
    auto hits = index.hybrid_search("krakenx", 1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].snippet.size() == 200);
}

}  // TEST_SUITE
