#include "l2cl/eval.hpp"

namespace l2cl {

std::vector<std::vector<int32_t>> greedy_degree_groups(const InteractionSet& train,
                                                       std::span<const int32_t> users,
                                                       double target) {
    std::vector<int32_t> sorted(users.begin(), users.end());
    std::sort(sorted.begin(), sorted.end(), [&](int32_t a, int32_t b) {
        const int64_t da = train.degree(a), db = train.degree(b);
        if (da != db) return da < db;
        return a < b;
    });

    std::vector<std::vector<int32_t>> groups;
    groups.emplace_back();
    double cum = 0.0;
    for (size_t k = 0; k < sorted.size(); ++k) {
        groups.back().push_back(sorted[k]);
        cum += static_cast<double>(train.degree(sorted[k]));
        if (cum >= target && k + 1 < sorted.size()) {
            groups.emplace_back();
            cum = 0.0;
        }
    }
    return groups;
}

SparsityGroups sparsity_groups(const InteractionSet& train, std::span<const int32_t> users,
                               int num_groups) {
    if (num_groups < 1) throw std::invalid_argument("sparsity_groups: need at least one group");
    if (static_cast<int>(users.size()) < num_groups)
        throw std::invalid_argument("sparsity_groups: fewer users than groups; use fewer groups");

    int64_t total = 0;
    for (int32_t u : users) total += train.degree(u);
    const double target = static_cast<double>(total) / num_groups;

    auto groups = greedy_degree_groups(train, users, target);
    if (static_cast<int>(groups.size()) != num_groups) {
        throw std::invalid_argument("sparsity_groups: sweep produced " +
                                    std::to_string(groups.size()) + " groups instead of " +
                                    std::to_string(num_groups) +
                                    "; this data supports fewer groups");
    }
    SparsityGroups out;
    out.groups = std::move(groups);
    return out;
}

}  // namespace l2cl
