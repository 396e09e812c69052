// Benchmark for the stage-1 scoring kernel: serial per-pair reference vs
// the batched OpenMP path, plus the whole-split fan-out.
//
//   bench_reranker [--items N] [--sessions N] [--session-len N]
//                  [--candidates N] [--k N] [--repeat N]

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ecorank/ingest.hpp"
#include "ecorank/reranker.hpp"
#include "ecorank/rng.hpp"

using namespace ecorank;

namespace {

const char* kWords[] = {"bamboo", "steel",  "cotton", "solar", "charger", "lamp",
                        "chair",  "bottle", "jacket", "phone", "paper",   "cable",
                        "mug",    "desk",   "shoe",   "tent",  "watch",   "board"};

Catalog make_catalog(std::size_t n_items, Rng& rng) {
    const char* categories[] = {"Home", "Games", "Outdoors", "Office", "Clothing", "Tech"};
    Catalog catalog;
    for (std::size_t i = 0; i < n_items; ++i) {
        Item item;
        item.id = "i" + std::to_string(i);
        item.title = std::string(kWords[rng.next_below(18)]) + " " + kWords[rng.next_below(18)];
        item.category = categories[rng.next_below(6)];
        item.attributes.emplace_back("brand", std::string(1, 'A' + char(rng.next_below(26))));
        item.sustainable = rng.next_below(5) == 0;
        catalog.add(std::move(item));
    }
    return catalog;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t n_items = 5000, n_sessions = 200, session_len = 8, n_candidates = 100, k = 20;
    int repeat = 3;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        const long value = std::atol(argv[i + 1]);
        if (flag == "--items") n_items = value;
        else if (flag == "--sessions") n_sessions = value;
        else if (flag == "--session-len") session_len = value;
        else if (flag == "--candidates") n_candidates = value;
        else if (flag == "--k") k = value;
        else if (flag == "--repeat") repeat = static_cast<int>(value);
    }

    Rng rng(20260808);
    const Catalog catalog = make_catalog(n_items, rng);

    std::vector<Session> sessions;
    std::vector<CandidateSet> initial;
    for (std::size_t s = 0; s < n_sessions; ++s) {
        Session session;
        session.session_id = "s" + std::to_string(s);
        for (std::size_t j = 0; j < session_len; ++j)
            session.interactions.push_back("i" + std::to_string(rng.next_below(n_items)));
        session.target = "i" + std::to_string(rng.next_below(n_items));
        initial.push_back(sample_candidates(session, catalog, n_candidates, 7));
        sessions.push_back(std::move(session));
    }

    LexicalScorer scorer;
    const double pairs_per_split =
        static_cast<double>(n_sessions) * session_len * n_candidates;
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif
    std::printf("%zu sessions x %zu interactions x %zu candidates = %.0f pairs per pass\n\n",
                n_sessions, session_len, n_candidates, pairs_per_split);

    double serial_best = 1e300, parallel_best = 1e300;
    for (int r = 0; r < repeat; ++r) {
        auto start = std::chrono::steady_clock::now();
        for (std::size_t s = 0; s < n_sessions; ++s)
            filter_candidates_serial(scorer, sessions[s], initial[s], k, catalog);
        serial_best = std::min(serial_best, seconds_since(start));

        start = std::chrono::steady_clock::now();
        filter_sessions(scorer, sessions, initial, k, catalog);
        parallel_best = std::min(parallel_best, seconds_since(start));
    }

    std::printf("serial reference : %8.3f s  (%10.0f pairs/s)\n", serial_best,
                pairs_per_split / serial_best);
    std::printf("parallel kernel  : %8.3f s  (%10.0f pairs/s)\n", parallel_best,
                pairs_per_split / parallel_best);
    std::printf("speedup          : %8.2fx\n", serial_best / parallel_best);
    return 0;
}
