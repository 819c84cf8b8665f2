#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wavetraffic/error.hpp"

namespace wavetraffic {

enum class LearnerKind { xgb_like, lgb_like, gbr_like, cat_like, sgd_linear };

inline constexpr LearnerKind all_learner_kinds[] = {LearnerKind::xgb_like, LearnerKind::lgb_like,
                                                   LearnerKind::sgd_linear, LearnerKind::gbr_like,
                                                   LearnerKind::cat_like};

inline std::string_view to_string(LearnerKind kind) {
    switch (kind) {
    case LearnerKind::xgb_like: return "xgb_like";
    case LearnerKind::lgb_like: return "lgb_like";
    case LearnerKind::gbr_like: return "gbr_like";
    case LearnerKind::cat_like: return "cat_like";
    case LearnerKind::sgd_linear: return "sgd_linear";
    }
    return "xgb_like";
}

inline LearnerKind parse_learner_kind(std::string_view s) {
    for (auto k : all_learner_kinds)
        if (to_string(k) == s) return k;
    fail(ErrorCode::invalid_config,
         "unknown model kind '" + std::string(s) +
             "' (valid: xgb_like, lgb_like, sgd_linear, gbr_like, cat_like)");
}

inline bool is_boosting(LearnerKind kind) { return kind != LearnerKind::sgd_linear; }

struct HyperparameterRange {
    std::string name;
    double default_value;
    double min;
    double max;
    bool integer = false;
    bool min_exclusive = false;
};

/// Declared hyperparameters and their defaults for each kind.
inline std::vector<HyperparameterRange> hyperparameter_table(LearnerKind kind) {
    if (kind == LearnerKind::sgd_linear)
        return {{"learning_rate", 0.01, 0.0, 10.0, false, true},
                {"batch_size", 32, 1, 1e7, true},
                {"epochs", 50, 1, 1e6, true},
                {"l2", 0.0, 0.0, 1e6}};
    std::vector<HyperparameterRange> t{{"n_trees", 300, 1, 1e5, true},
                                       {"learning_rate", 0.1, 0.0, 1.0, false, true},
                                       {"min_samples_leaf", 5, 1, 1e9, true},
                                       {"subsample", 1.0, 0.0, 1.0, false, true}};
    switch (kind) {
    case LearnerKind::xgb_like:
        t.push_back({"max_depth", 6, 1, 30, true});
        t.push_back({"lambda", 1.0, 0.0, 1e9});
        break;
    case LearnerKind::lgb_like:
        // max_depth 0 means unlimited; growth is bounded by max_leaves
        t.push_back({"max_depth", 0, 0, 64, true});
        t.push_back({"max_leaves", 31, 2, 1e5, true});
        t.push_back({"n_bins", 256, 2, 256, true});
        t.push_back({"lambda", 0.0, 0.0, 1e9});
        break;
    case LearnerKind::gbr_like:
        t.push_back({"max_depth", 6, 1, 30, true});
        break;
    case LearnerKind::cat_like:
        t.push_back({"max_depth", 6, 1, 16, true});
        t.push_back({"n_bins", 254, 2, 256, true});
        t.push_back({"lambda", 3.0, 0.0, 1e9, false, true});
        break;
    case LearnerKind::sgd_linear: break;
    }
    return t;
}

/// A learner kind with its hyperparameters and seed. Unset hyperparameters take the
/// defaults from hyperparameter_table().
struct LearnerSpec {
    LearnerKind kind = LearnerKind::xgb_like;
    std::map<std::string, double> hyperparameters;
    std::uint64_t seed = 0;

    /// Throws InvalidHyperparameter for unknown keys or out-of-range values.
    void validate() const {
        const auto table = hyperparameter_table(kind);
        for (const auto& [key, value] : hyperparameters) {
            auto it = std::find_if(table.begin(), table.end(),
                                   [&](const auto& r) { return r.name == key; });
            if (it == table.end())
                fail(ErrorCode::invalid_hyperparameter,
                     key + " (not a hyperparameter of " + std::string(to_string(kind)) + ")");
            const bool below = it->min_exclusive ? !(value > it->min) : !(value >= it->min);
            if (below || !(value <= it->max) ||
                (it->integer && value != static_cast<double>(static_cast<long long>(value))))
                fail(ErrorCode::invalid_hyperparameter,
                     key + "=" + std::to_string(value) + " is outside its documented range");
        }
    }

    double get(const std::string& key) const {
        if (auto it = hyperparameters.find(key); it != hyperparameters.end()) return it->second;
        for (const auto& r : hyperparameter_table(kind))
            if (r.name == key) return r.default_value;
        fail(ErrorCode::invalid_hyperparameter, key);
    }

    /// All hyperparameters with defaults filled in.
    std::map<std::string, double> resolved() const {
        std::map<std::string, double> out;
        for (const auto& r : hyperparameter_table(kind)) out[r.name] = get(r.name);
        return out;
    }

    friend bool operator==(const LearnerSpec&, const LearnerSpec&) = default;
};

} // namespace wavetraffic
