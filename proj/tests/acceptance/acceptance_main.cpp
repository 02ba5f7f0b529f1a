// Acceptance suite: one criterion per function, each printing a PASS/FAIL
// line. Run all with no arguments or a single one with --criterion N.

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "acceptance_criteria.hpp"

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);
    }

    struct Entry {
        int id;
        const char* name;
        bool (*fn)();
    };
    const std::vector<Entry> entries = {
        {1, "numerical core: finite-difference gradients + bit-exact checkpoints", acceptance::criterion1},
        {2, "simulator physics: IDM equilibria, platoon gaps, collision oracle", acceptance::criterion2},
        {3, "graph encoding: aggregation oracle, translation invariance, W1=0", acceptance::criterion3},
        {4, "MI estimator: Gaussian closed-form targets and ordering", acceptance::criterion4},
        {5, "metric arithmetic: APR / collision-rate / reward fixtures", acceptance::criterion5},
        {6, "sanity training: empty-road DQN reaches the analytic optimum", acceptance::criterion6},
        {7, "cross-region ordering: LM/GM/DLE comparison matrix", acceptance::criterion7},
        {8, "determinism: byte-identical curves, checkpoints and metrics", acceptance::criterion8},
        {9, "DLE fallback: store removal reverts to the common path", acceptance::criterion9},
    };

    int failures = 0;
    for (const auto& e : entries) {
        if (only && e.id != only) continue;
        bool ok = false;
        try {
            ok = e.fn();
        } catch (const std::exception& ex) {
            std::printf("criterion %d raised: %s\n", e.id, ex.what());
            ok = false;
        }
        std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", e.id, e.name);
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
