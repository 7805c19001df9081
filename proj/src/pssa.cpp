#include "scs/pssa.hpp"

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <sstream>

namespace scs::pssa {

Instance Instance::make(std::vector<double> weights, double gamma, std::vector<bool> attacks) {
    Instance inst;
    inst.disableable.assign(weights.size(), true);
    inst.weights = std::move(weights);
    inst.gamma = gamma;
    inst.attacks = std::move(attacks);
    return inst;
}

void validate(const Instance& instance) {
    const std::size_t n = instance.weights.size();
    if (n == 0) {
        throw ValidationError("at least one PIED is required");
    }
    if (instance.attacks.size() != n) {
        throw ValidationError("attack vector length " + std::to_string(instance.attacks.size()) +
                              " does not match " + std::to_string(n) + " weights");
    }
    if (instance.disableable.size() != n) {
        throw ValidationError("disableable flags length " + std::to_string(instance.disableable.size()) +
                              " does not match " + std::to_string(n) + " weights");
    }
    for (double w : instance.weights) {
        if (!(w > 0.0)) {
            throw ValidationError("PIED weights must be positive");
        }
    }
    if (!(instance.gamma > 0.0)) {
        throw ValidationError("gamma must be positive");
    }
}

bool cied_enable(const std::vector<bool>& attacks) {
    std::size_t attacked = 0;
    for (bool a : attacks) attacked += a ? 1 : 0;
    return std::min<std::size_t>(1, attacked) == 1;
}

double objective(const Instance& instance, const std::vector<bool>& disabled, bool cied_enabled,
                 const std::vector<bool>& redirected) {
    double total = 0.0;
    for (std::size_t i = 0; i < instance.size(); ++i) {
        total += disabled[i] ? instance.weights[i] : 0.0;
    }
    total += cied_enabled ? instance.gamma : 0.0;
    for (std::size_t i = 0; i < instance.size(); ++i) {
        total += (instance.attacks[i] && redirected[i]) ? 1.0 : 0.0;
    }
    return total;
}

Solution solve(const Instance& instance) {
    validate(instance);
    const std::size_t n = instance.size();
    Solution s;
    s.disabled.resize(n);
    s.redirected.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.disabled[i] = instance.disableable[i] && instance.attacks[i];
        s.redirected[i] = instance.attacks[i];
    }
    s.cied_enabled = cied_enable(instance.attacks);
    s.objective = objective(instance, s.disabled, s.cied_enabled, s.redirected);
    return s;
}

Solution enumerate_oracle(const Instance& instance) {
    validate(instance);
    const std::size_t n = instance.size();
    if (n > 20) {
        throw ValidationError("enumeration oracle supports at most 20 PIEDs");
    }
    // Constraint set expressed as bit masks over the assignment word
    // [disable bits 0..n-1 | cied bit n | redirect bits n+1..2n].
    std::uint64_t attack_mask = 0;
    std::uint64_t disableable_mask = 0;
    for (std::size_t i = 0; i < n; ++i) {
        attack_mask |= static_cast<std::uint64_t>(instance.attacks[i]) << i;
        disableable_mask |= static_cast<std::uint64_t>(instance.disableable[i]) << i;
    }
    const std::uint64_t low = (1ULL << n) - 1;
    const std::uint64_t cied_required = attack_mask != 0 ? 1 : 0;

    const std::uint64_t total = 1ULL << (2 * n + 1);
    double best = std::numeric_limits<double>::infinity();
    std::uint64_t best_word = 0;
    bool found = false;
    for (std::uint64_t word = 0; word < total; ++word) {
        const std::uint64_t d = word & low;
        const std::uint64_t e = (word >> n) & 1;
        const std::uint64_t f = (word >> (n + 1)) & low;
        if ((d & disableable_mask) != (attack_mask & disableable_mask)) continue;  // D_i = A_i where disableable
        if ((d & ~disableable_mask) != 0) continue;                               // D_i = 0 otherwise
        if (e != cied_required) continue;                                         // E = min(1, sum A)
        if (f != attack_mask) continue;                                           // F_i = A_i
        // Terms accumulate in formula order so equal assignments give bit-equal objectives.
        double value = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if ((d >> i) & 1) value += instance.weights[i];
        }
        if (e) value += instance.gamma;
        for (std::size_t i = 0; i < n; ++i) {
            if (((attack_mask >> i) & 1) && ((f >> i) & 1)) value += 1.0;
        }
        if (value < best) {
            best = value;
            best_word = word;
            found = true;
        }
    }
    if (!found) {
        throw ValidationError("no feasible assignment");
    }
    Solution s;
    s.disabled.resize(n);
    s.redirected.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.disabled[i] = (best_word >> i) & 1;
        s.redirected[i] = (best_word >> (n + 1 + i)) & 1;
    }
    s.cied_enabled = (best_word >> n) & 1;
    s.objective = best;
    return s;
}

std::string format_table(const Instance& instance, const Solution& solution) {
    std::ostringstream out;
    out << std::left << std::setw(6) << "PIED" << std::setw(8) << "weight" << std::setw(10) << "attacked"
        << std::setw(13) << "disableable" << std::setw(10) << "disabled" << "redirected\n";
    for (std::size_t i = 0; i < instance.size(); ++i) {
        out << std::setw(6) << ("P" + std::to_string(i + 1)) << std::setw(8) << instance.weights[i] << std::setw(10)
            << instance.attacks[i] << std::setw(13) << instance.disableable[i] << std::setw(10) << solution.disabled[i]
            << solution.redirected[i] << "\n";
    }
    out << "gamma " << instance.gamma << ", CIED enabled " << solution.cied_enabled << "\n";
    out << "objective " << solution.objective << "\n";
    return out.str();
}

}  // namespace scs::pssa
