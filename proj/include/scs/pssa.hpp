#pragma once

// Proactive substation security algorithm: given per-PIED impact weights, the CIED
// enabling weight and the attack vector, decide which PIEDs to disable, whether the
// CIED is enabled and which flows to redirect, and evaluate the disruption objective
//
//     sum_i weight_i * disable_i  +  gamma * cied  +  sum_i attack_i * redirect_i
//
// The decision rules (disable_i = attack_i unless the PIED cannot be disabled,
// cied = min(1, sum attack_i), redirect_i = attack_i) leave a single feasible point,
// so `solve` is propagation plus evaluation. `enumerate_oracle` brute-forces every
// binary assignment against the same constraint set and exists to certify `solve`.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace scs::pssa {

struct Instance {
    std::vector<double> weights;     // impact of each PIED, > 0
    double gamma = 0.0;              // weight of enabling the CIED, > 0
    std::vector<bool> attacks;       // attack detection status per PIED
    std::vector<bool> disableable;   // false: operational constraints keep the PIED enabled

    std::size_t size() const { return weights.size(); }

    // Every PIED disableable.
    static Instance make(std::vector<double> weights, double gamma, std::vector<bool> attacks);
};

struct Solution {
    std::vector<bool> disabled;
    bool cied_enabled = false;
    std::vector<bool> redirected;
    double objective = 0.0;

    bool operator==(const Solution&) const = default;
};

class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

void validate(const Instance& instance);

bool cied_enable(const std::vector<bool>& attacks);

double objective(const Instance& instance, const std::vector<bool>& disabled, bool cied_enabled,
                 const std::vector<bool>& redirected);

Solution solve(const Instance& instance);

// Exhaustive search over {0,1}^(2n+1); limited to n <= 20.
Solution enumerate_oracle(const Instance& instance);

std::string format_table(const Instance& instance, const Solution& solution);

}  // namespace scs::pssa
