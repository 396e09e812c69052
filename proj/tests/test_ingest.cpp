#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "ecorank/errors.hpp"
#include "ecorank/ingest.hpp"
#include "support/fixtures.hpp"
#include "support/stats.hpp"

using namespace ecorank;
using namespace ecorank::test;

TEST_CASE("load_catalog maps fields and preserves order") {
    TempDir dir("ingest");
    write_file(dir.path() / "catalog.jsonl",
               "{\"id\":\"a1\",\"title\":\"Bamboo Brush\",\"category\":\"Home\","
               "\"sustainable\":true}\n"
               "{\"id\":\"a2\",\"title\":\"Pad\",\"category\":\"Games\","
               "\"attributes\":{\"brand\":\"X\",\"age\":\"12\"}}\n");
    const Catalog catalog = load_catalog((dir.path() / "catalog.jsonl").string());
    REQUIRE(catalog.size() == 2);
    CHECK(catalog.at("a1").sustainable);
    CHECK(catalog.at("a1").title == "Bamboo Brush");
    CHECK_FALSE(catalog.at("a2").sustainable);
    REQUIRE(catalog.at("a2").attributes.size() == 2);
    CHECK(catalog.at("a2").attributes[0].first == "brand");  // file order, not sorted
    CHECK(catalog.at("a2").attributes[1].first == "age");
}

TEST_CASE("load_catalog rejects duplicates and malformed lines") {
    TempDir dir("ingest");
    write_file(dir.path() / "dup.jsonl",
               "{\"id\":\"a1\",\"title\":\"One\"}\n{\"id\":\"a1\",\"title\":\"Two\"}\n");
    CHECK_THROWS_AS(load_catalog((dir.path() / "dup.jsonl").string()), DuplicateId);

    write_file(dir.path() / "missing_title.jsonl",
               "{\"id\":\"a1\",\"title\":\"One\"}\n{\"id\":\"a2\"}\n");
    try {
        load_catalog((dir.path() / "missing_title.jsonl").string());
        FAIL("expected MalformedLine");
    } catch (const MalformedLine& e) {
        CHECK(e.line_no == 2);
    }

    write_file(dir.path() / "bad_json.jsonl", "{not json\n");
    CHECK_THROWS_AS(load_catalog((dir.path() / "bad_json.jsonl").string()), MalformedLine);
}

TEST_CASE("load_sessions resolves ids against the catalog") {
    TempDir dir("ingest");
    write_file(dir.path() / "catalog.jsonl",
               "{\"id\":\"a1\",\"title\":\"One\"}\n{\"id\":\"a2\",\"title\":\"Two\"}\n"
               "{\"id\":\"a3\",\"title\":\"Three\"}\n");
    const Catalog catalog = load_catalog((dir.path() / "catalog.jsonl").string());

    write_file(dir.path() / "ok.jsonl",
               "{\"session_id\":\"s1\",\"items\":[\"a1\",\"a2\"],\"target\":\"a3\"}\n");
    const auto sessions = load_sessions((dir.path() / "ok.jsonl").string(), catalog);
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0].session_id == "s1");
    CHECK(sessions[0].interactions == std::vector<std::string>{"a1", "a2"});
    CHECK(sessions[0].target == "a3");

    write_file(dir.path() / "unknown.jsonl",
               "{\"session_id\":\"s1\",\"items\":[\"a1\"],\"target\":\"a9\"}\n");
    try {
        load_sessions((dir.path() / "unknown.jsonl").string(), catalog);
        FAIL("expected UnknownItem");
    } catch (const UnknownItem& e) {
        CHECK(e.session_id == "s1");
        CHECK(e.item_id == "a9");
    }

    write_file(dir.path() / "empty.jsonl",
               "{\"session_id\":\"s1\",\"items\":[],\"target\":\"a1\"}\n");
    CHECK_THROWS_AS(load_sessions((dir.path() / "empty.jsonl").string(), catalog),
                    EmptySession);

    write_file(dir.path() / "dup.jsonl",
               "{\"session_id\":\"s1\",\"items\":[\"a1\"],\"target\":\"a2\"}\n"
               "{\"session_id\":\"s1\",\"items\":[\"a2\"],\"target\":\"a1\"}\n");
    CHECK_THROWS_AS(load_sessions((dir.path() / "dup.jsonl").string(), catalog),
                    DuplicateSession);
}

TEST_CASE("sample_candidates covers the whole catalog when sizes match") {
    const Catalog catalog = make_catalog(100);
    const Session session = make_session("s1", {"i3"}, "i7");
    const CandidateSet set = sample_candidates(session, catalog, 100, 42);
    CHECK(set.kind == CandidateKind::Initial);
    CHECK(set.candidates.size() == 100);
    std::set<std::string> unique(set.candidates.begin(), set.candidates.end());
    CHECK(unique.size() == 100);  // forced: the set is the whole catalog
    CHECK(unique.count("i7") == 1);
}

TEST_CASE("sample_candidates is deterministic per (seed, session)") {
    const Catalog catalog = make_catalog(300);
    const Session session = make_session("s9", {"i1"}, "i2");
    const CandidateSet a = sample_candidates(session, catalog, 100, 42);
    const CandidateSet b = sample_candidates(session, catalog, 100, 42);
    CHECK(a.candidates == b.candidates);
    const CandidateSet c = sample_candidates(session, catalog, 100, 43);
    CHECK(a.candidates != c.candidates);
}

TEST_CASE("sample_candidates rejects undersized catalogs") {
    const Catalog catalog = make_catalog(50);
    const Session session = make_session("s1", {"i0"}, "i1");
    CHECK_THROWS_AS(sample_candidates(session, catalog, 100, 1), CatalogTooSmall);
}

TEST_CASE("target is always included, sample is duplicate-free") {
    const Catalog catalog = make_catalog(400);
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const std::string target = "i" + std::to_string(rng.next_below(400));
        const Session session =
            make_session("s" + std::to_string(i),
                         {"i" + std::to_string(rng.next_below(400))}, target);
        const CandidateSet set = sample_candidates(session, catalog, 100, 11);
        std::set<std::string> unique(set.candidates.begin(), set.candidates.end());
        CHECK(unique.size() == set.candidates.size());
        CHECK(unique.count(target) == 1);
    }
}

TEST_CASE("target position is uniform across sessions (chi-square oracle)") {
    const Catalog catalog = make_catalog(5000);
    std::vector<std::size_t> position_counts(100, 0);
    for (int i = 0; i < 1000; ++i) {
        const std::string target = "i" + std::to_string(i % 5000);
        const Session session = make_session("s" + std::to_string(i), {"i0"}, target);
        const CandidateSet set = sample_candidates(session, catalog, 100, 2024);
        const auto it = std::find(set.candidates.begin(), set.candidates.end(), target);
        REQUIRE(it != set.candidates.end());
        ++position_counts[static_cast<std::size_t>(it - set.candidates.begin())];
    }
    CHECK(chi_square_uniform_pvalue(position_counts) > 0.01);
}

TEST_CASE("candidate files round-trip and are byte-stable") {
    const Catalog catalog = make_catalog(150);
    TempDir dir("ingest");
    std::string first, second;
    for (std::string* buffer : {&first, &second}) {
        for (int i = 0; i < 5; ++i) {
            const Session session =
                make_session("s" + std::to_string(i), {"i1"}, "i" + std::to_string(i));
            append_candidate_set(*buffer, sample_candidates(session, catalog, 100, 7));
        }
    }
    CHECK(first == second);

    write_file(dir.path() / "candidates.jsonl", first);
    const auto sets = load_candidate_sets((dir.path() / "candidates.jsonl").string());
    REQUIRE(sets.size() == 5);
    CHECK(sets[0].session_id == "s0");
    CHECK(sets[0].kind == CandidateKind::Initial);
    CHECK(sets[0].candidates.size() == 100);
}
