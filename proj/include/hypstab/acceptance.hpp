#ifndef HYPSTAB_ACCEPTANCE_HPP
#define HYPSTAB_ACCEPTANCE_HPP

#include <string>
#include <vector>

namespace hypstab {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail; // measured values and thresholds
};

enum class Suite { Linear, Nonlinear, All };

/// Built-in verification suite; each entry checks one claim end to end on a
/// pinned scenario and tolerance.
std::vector<CriterionResult> run_acceptance(Suite suite);

} // namespace hypstab

#endif
