#include <cstdio>
#include <cstring>

#include "hypstab/acceptance.hpp"

int main(int argc, char** argv) {
    hypstab::Suite suite = hypstab::Suite::All;
    if (argc > 1) {
        if (std::strcmp(argv[1], "linear") == 0) suite = hypstab::Suite::Linear;
        if (std::strcmp(argv[1], "nonlinear") == 0) suite = hypstab::Suite::Nonlinear;
    }

    auto results = hypstab::run_acceptance(suite);
    int failed = 0;
    for (const auto& r : results) {
        std::printf("%s criterion %d: %s (%s)\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.detail.c_str());
        if (!r.pass) ++failed;
    }
    std::printf("%zu criteria, %d failed\n", results.size(), failed);
    return failed == 0 ? 0 : 1;
}
