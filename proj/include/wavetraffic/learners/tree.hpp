#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "wavetraffic/learners/spec.hpp"
#include "wavetraffic/matrix.hpp"
#include "wavetraffic/random.hpp"

namespace wavetraffic {

/// A node is a leaf when feature < 0. Samples with x[feature] < threshold go left.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const noexcept {
        int i = 0;
        while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }

    /// Depth of every node, root = 0.
    std::vector<int> depths() const {
        std::vector<int> d(nodes.size(), 0);
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (!nodes[i].is_leaf()) {
                d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
                d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
            }
        return d;
    }

    friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

/// Boosted ensemble: prediction = base_score + learning_rate * sum of tree outputs.
struct TreeEnsembleModel {
    LearnerSpec spec;
    std::size_t n_features = 0;
    double base_score = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;
    /// Training MSE after each tree.
    std::vector<double> training_loss_curve;

    double predict_row(std::span<const double> x) const noexcept {
        double sum = 0.0;
        for (const auto& t : trees) sum += t.predict(x);
        return base_score + learning_rate * sum;
    }

    friend bool operator==(const TreeEnsembleModel&, const TreeEnsembleModel&) = default;
};

namespace detail {

struct GradStats {
    double g = 0.0;
    double h = 0.0;
    std::size_t n = 0;

    void add(double gi) noexcept {
        g += gi;
        h += 1.0;
        ++n;
    }
    GradStats operator-(const GradStats& o) const noexcept { return {g - o.g, h - o.h, n - o.n}; }
};

inline double leaf_score(const GradStats& s, double lambda) noexcept {
    const double denom = s.h + lambda;
    return denom > 0.0 ? s.g * s.g / denom : 0.0;
}

/// Second-order split gain; with lambda = 0 this is half the squared-error reduction.
inline double split_gain(const GradStats& left, const GradStats& right, const GradStats& total,
                         double lambda) noexcept {
    return 0.5 * (leaf_score(left, lambda) + leaf_score(right, lambda) - leaf_score(total, lambda));
}

inline double leaf_weight(const GradStats& s, double lambda) noexcept {
    const double denom = s.h + lambda;
    return denom > 0.0 ? -s.g / denom : 0.0;
}

inline double split_threshold(double below, double above) noexcept {
    const double mid = below + (above - below) / 2.0;
    return mid > below ? mid : above;
}

struct BoostParams {
    std::size_t n_trees;
    double learning_rate;
    std::size_t min_samples_leaf;
    double subsample;
    int max_depth;
    double lambda;
    std::size_t max_leaves;
    std::size_t n_bins;
};

inline BoostParams boost_params(const LearnerSpec& spec) {
    auto opt = [&](const char* key, double fallback) {
        for (const auto& r : hyperparameter_table(spec.kind))
            if (r.name == key) return spec.get(key);
        return fallback;
    };
    return {static_cast<std::size_t>(spec.get("n_trees")),
            spec.get("learning_rate"),
            static_cast<std::size_t>(spec.get("min_samples_leaf")),
            spec.get("subsample"),
            static_cast<int>(spec.get("max_depth")),
            opt("lambda", 0.0),
            static_cast<std::size_t>(opt("max_leaves", 0)),
            static_cast<std::size_t>(opt("n_bins", 256))};
}

/// Column-major copy of the features plus each column's sort order, built once per fit.
struct SortedColumns {
    std::vector<std::vector<double>> values;        // [feature][row]
    std::vector<std::vector<std::uint32_t>> order;  // [feature][rank] -> row
    std::vector<std::vector<double>> sorted;        // [feature][rank] -> value

    explicit SortedColumns(const Matrix& X) {
        const std::size_t n = X.rows(), d = X.cols();
        values.assign(d, std::vector<double>(n));
        order.assign(d, std::vector<std::uint32_t>(n));
        sorted.assign(d, std::vector<double>(n));
        for (std::size_t f = 0; f < d; ++f) {
            for (std::size_t i = 0; i < n; ++i) values[f][i] = X(i, f);
            std::iota(order[f].begin(), order[f].end(), 0u);
            std::stable_sort(order[f].begin(), order[f].end(), [&](auto a, auto b) {
                return values[f][a] < values[f][b];
            });
            for (std::size_t k = 0; k < n; ++k) sorted[f][k] = values[f][order[f][k]];
        }
    }
};

/// Exact greedy, level-wise growth (xgb_like and gbr_like).
inline RegressionTree grow_level_wise(const SortedColumns& cols, std::span<const double> grad,
                                      std::span<const std::uint8_t> active, const BoostParams& p) {
    const std::size_t n = grad.size();
    const std::size_t d = cols.values.size();
    RegressionTree tree;
    tree.nodes.push_back({});
    std::vector<int> node_of(n, -1);
    GradStats root;
    for (std::size_t i = 0; i < n; ++i)
        if (active[i]) {
            node_of[i] = 0;
            root.add(grad[i]);
        }
    std::vector<int> frontier{0};
    std::vector<GradStats> totals{root};

    for (int depth = 0; depth < p.max_depth && !frontier.empty(); ++depth) {
        const std::size_t m = frontier.size();
        std::vector<int> local(tree.nodes.size(), -1);
        for (std::size_t k = 0; k < m; ++k) local[static_cast<std::size_t>(frontier[k])] = static_cast<int>(k);

        std::vector<double> best_gain(m, 0.0), best_thr(m, 0.0);
        std::vector<int> best_feat(m, -1);
        std::vector<GradStats> best_left(m);
        std::vector<GradStats> acc(m);
        std::vector<double> last(m);
        for (std::size_t f = 0; f < d; ++f) {
            std::fill(acc.begin(), acc.end(), GradStats{});
            const auto& ord = cols.order[f];
            const auto& sv = cols.sorted[f];
            for (std::size_t r = 0; r < n; ++r) {
                const auto i = ord[r];
                const int node = node_of[i];
                if (node < 0) continue;
                const int k = local[static_cast<std::size_t>(node)];
                if (k < 0) continue;
                auto& a = acc[static_cast<std::size_t>(k)];
                const double v = sv[r];
                if (a.n > 0 && v > last[static_cast<std::size_t>(k)]) {
                    const auto& tot = totals[static_cast<std::size_t>(k)];
                    if (a.n >= p.min_samples_leaf && tot.n - a.n >= p.min_samples_leaf) {
                        const double gain = split_gain(a, tot - a, tot, p.lambda);
                        if (gain > best_gain[static_cast<std::size_t>(k)]) {
                            best_gain[static_cast<std::size_t>(k)] = gain;
                            best_feat[static_cast<std::size_t>(k)] = static_cast<int>(f);
                            best_thr[static_cast<std::size_t>(k)] =
                                split_threshold(last[static_cast<std::size_t>(k)], v);
                            best_left[static_cast<std::size_t>(k)] = a;
                        }
                    }
                }
                a.add(grad[i]);
                last[static_cast<std::size_t>(k)] = v;
            }
        }

        std::vector<int> next;
        std::vector<GradStats> next_totals;
        for (std::size_t k = 0; k < m; ++k) {
            if (best_feat[k] < 0) continue;
            const int id = frontier[k];
            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back({});
            tree.nodes.push_back({});
            auto& node = tree.nodes[static_cast<std::size_t>(id)];
            node.feature = best_feat[k];
            node.threshold = best_thr[k];
            node.left = left;
            node.right = left + 1;
            next.push_back(left);
            next.push_back(left + 1);
            next_totals.push_back(best_left[k]);
            next_totals.push_back(totals[k] - best_left[k]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const int node = node_of[i];
            if (node < 0) continue;
            const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
            if (nd.is_leaf()) continue;
            node_of[i] = cols.values[static_cast<std::size_t>(nd.feature)][i] < nd.threshold ? nd.left
                                                                                          : nd.right;
        }
        frontier = std::move(next);
        totals = std::move(next_totals);
    }

    std::vector<GradStats> leaf_stats(tree.nodes.size());
    for (std::size_t i = 0; i < n; ++i)
        if (node_of[i] >= 0) leaf_stats[static_cast<std::size_t>(node_of[i])].add(grad[i]);
    for (std::size_t id = 0; id < tree.nodes.size(); ++id)
        if (tree.nodes[id].is_leaf()) tree.nodes[id].value = leaf_weight(leaf_stats[id], p.lambda);
    return tree;
}

/// Quantile-binned features for the histogram learners. A sample falls in bin b when
/// cuts[b-1] <= x < cuts[b]; splitting after bin b tests x < cuts[b].
struct BinnedColumns {
    std::vector<std::vector<double>> cuts;        // [feature] -> ascending thresholds
    std::vector<std::vector<std::uint8_t>> bins;  // [feature][row]

    BinnedColumns(const Matrix& X, std::size_t max_bins) {
        const std::size_t n = X.rows(), d = X.cols();
        cuts.resize(d);
        bins.assign(d, std::vector<std::uint8_t>(n));
        std::vector<double> s(n);
        for (std::size_t f = 0; f < d; ++f) {
            for (std::size_t i = 0; i < n; ++i) s[i] = X(i, f);
            std::sort(s.begin(), s.end());
            std::vector<double> distinct;
            std::unique_copy(s.begin(), s.end(), std::back_inserter(distinct));
            auto& c = cuts[f];
            if (distinct.size() <= max_bins) {
                for (std::size_t k = 1; k < distinct.size(); ++k)
                    c.push_back(split_threshold(distinct[k - 1], distinct[k]));
            } else {
                for (std::size_t q = 1; q < max_bins; ++q) {
                    const std::size_t r = q * n / max_bins;
                    if (r == 0 || !(s[r - 1] < s[r])) continue;
                    const double t = split_threshold(s[r - 1], s[r]);
                    if (c.empty() || t > c.back()) c.push_back(t);
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                const double v = X(i, f);
                bins[f][i] = static_cast<std::uint8_t>(
                    std::upper_bound(c.begin(), c.end(), v) - c.begin());
            }
        }
    }

    std::size_t n_bins(std::size_t f) const noexcept { return cuts[f].size() + 1; }
};

using Histogram = std::vector<std::vector<GradStats>>;  // [feature][bin]

inline Histogram build_histogram(const BinnedColumns& cols, std::span<const double> grad,
                                 std::span<const std::uint32_t> rows) {
    Histogram h(cols.bins.size());
    for (std::size_t f = 0; f < cols.bins.size(); ++f) {
        h[f].assign(cols.n_bins(f), GradStats{});
        const auto& b = cols.bins[f];
        for (auto i : rows) h[f][b[i]].add(grad[i]);
    }
    return h;
}

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    std::size_t bin = 0;  // left side holds bins [0, bin]
    GradStats left;
};

inline SplitChoice best_histogram_split(const Histogram& h, const GradStats& total,
                                        const BoostParams& p) {
    SplitChoice best;
    for (std::size_t f = 0; f < h.size(); ++f) {
        GradStats left;
        for (std::size_t b = 0; b + 1 < h[f].size(); ++b) {
            left.g += h[f][b].g;
            left.h += h[f][b].h;
            left.n += h[f][b].n;
            if (left.n < p.min_samples_leaf || total.n - left.n < p.min_samples_leaf) continue;
            const double gain = split_gain(left, total - left, total, p.lambda);
            if (gain > best.gain) best = {gain, static_cast<int>(f), b, left};
        }
    }
    return best;
}

/// Best-first growth on histograms, capped at max_leaves (lgb_like).
inline RegressionTree grow_leaf_wise(const BinnedColumns& cols, std::span<const double> grad,
                                     std::span<const std::uint8_t> active, const BoostParams& p) {
    struct Leaf {
        int node;
        int depth;
        std::vector<std::uint32_t> rows;
        GradStats total;
        Histogram hist;
        SplitChoice split;
    };
    auto evaluate = [&](Leaf& leaf) {
        leaf.split = {};
        if (p.max_depth > 0 && leaf.depth >= p.max_depth) return;
        if (leaf.total.n < 2 * p.min_samples_leaf) return;
        leaf.split = best_histogram_split(leaf.hist, leaf.total, p);
    };

    RegressionTree tree;
    tree.nodes.push_back({});
    std::vector<Leaf> leaves;
    {
        Leaf root{0, 0, {}, {}, {}, {}};
        for (std::uint32_t i = 0; i < grad.size(); ++i)
            if (active[i]) {
                root.rows.push_back(i);
                root.total.add(grad[i]);
            }
        root.hist = build_histogram(cols, grad, root.rows);
        evaluate(root);
        leaves.push_back(std::move(root));
    }
    while (leaves.size() < p.max_leaves) {
        std::size_t pick = leaves.size();
        for (std::size_t k = 0; k < leaves.size(); ++k)
            if (leaves[k].split.feature >= 0 &&
                (pick == leaves.size() || leaves[k].split.gain > leaves[pick].split.gain))
                pick = k;
        if (pick == leaves.size()) break;

        Leaf parent = std::move(leaves[pick]);
        leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(pick));
        const auto f = static_cast<std::size_t>(parent.split.feature);
        const int left_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.push_back({});
        auto& node = tree.nodes[static_cast<std::size_t>(parent.node)];
        node.feature = parent.split.feature;
        node.threshold = cols.cuts[f][parent.split.bin];
        node.left = left_id;
        node.right = left_id + 1;

        Leaf left{left_id, parent.depth + 1, {}, parent.split.left, {}, {}};
        Leaf right{left_id + 1, parent.depth + 1, {}, parent.total - parent.split.left, {}, {}};
        for (auto i : parent.rows)
            (cols.bins[f][i] <= parent.split.bin ? left.rows : right.rows).push_back(i);
        Leaf& small = left.rows.size() <= right.rows.size() ? left : right;
        Leaf& large = left.rows.size() <= right.rows.size() ? right : left;
        small.hist = build_histogram(cols, grad, small.rows);
        large.hist = std::move(parent.hist);
        for (std::size_t ff = 0; ff < large.hist.size(); ++ff)
            for (std::size_t b = 0; b < large.hist[ff].size(); ++b)
                large.hist[ff][b] = large.hist[ff][b] - small.hist[ff][b];
        evaluate(left);
        evaluate(right);
        leaves.push_back(std::move(left));
        leaves.push_back(std::move(right));
    }
    for (const auto& leaf : leaves) {
        GradStats s;  // recomputed from rows so leaf values carry no subtraction error
        for (auto i : leaf.rows) s.add(grad[i]);
        tree.nodes[static_cast<std::size_t>(leaf.node)].value = leaf_weight(s, p.lambda);
    }
    return tree;
}

/// Oblivious (symmetric) growth: one (feature, threshold) per depth shared by every node
/// at that depth, chosen to maximise the summed gain over all current leaves (cat_like).
/// Leaves left empty by a shared split get weight 0.
inline RegressionTree grow_oblivious(const BinnedColumns& cols, std::span<const double> grad,
                                     std::span<const std::uint8_t> active, const BoostParams& p) {
    const std::size_t n = grad.size();
    const std::size_t d = cols.bins.size();
    std::vector<std::uint32_t> code(n, 0);
    std::vector<std::pair<int, std::size_t>> levels;  // (feature, bin)

    for (int depth = 0; depth < p.max_depth; ++depth) {
        const std::size_t n_leaves = std::size_t{1} << depth;
        // hist[leaf][feature][bin]
        std::vector<Histogram> hist(n_leaves, Histogram(d));
        for (auto& h : hist)
            for (std::size_t f = 0; f < d; ++f) h[f].assign(cols.n_bins(f), GradStats{});
        std::vector<GradStats> totals(n_leaves);
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            totals[code[i]].add(grad[i]);
            for (std::size_t f = 0; f < d; ++f) hist[code[i]][f][cols.bins[f][i]].add(grad[i]);
        }
        double best_gain = 0.0;
        int best_f = -1;
        std::size_t best_b = 0;
        for (std::size_t f = 0; f < d; ++f) {
            std::vector<GradStats> left(n_leaves);
            for (std::size_t b = 0; b + 1 < cols.n_bins(f); ++b) {
                double gain = 0.0;
                for (std::size_t l = 0; l < n_leaves; ++l) {
                    const auto& hb = hist[l][f][b];
                    left[l].g += hb.g;
                    left[l].h += hb.h;
                    left[l].n += hb.n;
                    gain += split_gain(left[l], totals[l] - left[l], totals[l], p.lambda);
                }
                if (gain > best_gain) {
                    best_gain = gain;
                    best_f = static_cast<int>(f);
                    best_b = b;
                }
            }
        }
        if (best_f < 0) break;
        levels.emplace_back(best_f, best_b);
        const auto& b = cols.bins[static_cast<std::size_t>(best_f)];
        for (std::size_t i = 0; i < n; ++i) code[i] = (code[i] << 1) | (b[i] > best_b ? 1u : 0u);
    }

    const std::size_t n_leaves = std::size_t{1} << levels.size();
    std::vector<GradStats> leaf_stats(n_leaves);
    for (std::size_t i = 0; i < n; ++i)
        if (active[i]) leaf_stats[code[i]].add(grad[i]);

    RegressionTree tree;
    // Breadth-first full binary tree: node ids at depth k start at 2^k - 1.
    const std::size_t total_nodes = 2 * n_leaves - 1;
    tree.nodes.resize(total_nodes);
    for (std::size_t id = 0; id < total_nodes; ++id) {
        std::size_t depth = 0;
        while ((std::size_t{2} << depth) - 1 <= id) ++depth;
        auto& node = tree.nodes[id];
        if (depth < levels.size()) {
            const auto [f, bin] = levels[depth];
            node.feature = f;
            node.threshold = cols.cuts[static_cast<std::size_t>(f)][bin];
            node.left = static_cast<int>(2 * id + 1);
            node.right = static_cast<int>(2 * id + 2);
        } else {
            const std::size_t leaf_code = id - (n_leaves - 1);
            node.value = leaf_weight(leaf_stats[leaf_code], p.lambda);
        }
    }
    return tree;
}

} // namespace detail

/// Fits one of the boosting variants with squared loss.
inline TreeEnsembleModel fit_boosting(const LearnerSpec& spec, const Matrix& X,
                                      std::span<const double> y) {
    const auto p = detail::boost_params(spec);
    const std::size_t n = X.rows();
    TreeEnsembleModel model;
    model.spec = spec;
    model.n_features = X.cols();
    model.learning_rate = p.learning_rate;
    model.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

    std::optional<detail::SortedColumns> sorted;
    std::optional<detail::BinnedColumns> binned;
    if (spec.kind == LearnerKind::xgb_like || spec.kind == LearnerKind::gbr_like)
        sorted.emplace(X);
    else
        binned.emplace(X, p.n_bins);

    detail::BoostParams params = p;
    if (spec.kind == LearnerKind::gbr_like) params.lambda = 0.0;

    Rng rng(derive_seed(spec.seed, 1));
    std::vector<double> pred(n, model.base_score), grad(n);
    std::vector<std::uint8_t> active(n, 1);
    model.trees.reserve(p.n_trees);
    model.training_loss_curve.reserve(p.n_trees);
    for (std::size_t t = 0; t < p.n_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - y[i];
        if (p.subsample < 1.0) {
            std::size_t kept = 0;
            for (std::size_t i = 0; i < n; ++i) {
                active[i] = uniform01(rng) < p.subsample;
                kept += active[i];
            }
            if (kept == 0) active[uniform_index(rng, n)] = 1;
        }
        RegressionTree tree;
        switch (spec.kind) {
        case LearnerKind::xgb_like:
        case LearnerKind::gbr_like: tree = detail::grow_level_wise(*sorted, grad, active, params); break;
        case LearnerKind::lgb_like: tree = detail::grow_leaf_wise(*binned, grad, active, params); break;
        case LearnerKind::cat_like: tree = detail::grow_oblivious(*binned, grad, active, params); break;
        case LearnerKind::sgd_linear: fail(ErrorCode::invalid_hyperparameter, "not a boosting kind");
        }
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] += p.learning_rate * tree.predict(X.row(i));
            const double e = pred[i] - y[i];
            sse += e * e;
        }
        model.training_loss_curve.push_back(sse / static_cast<double>(n));
        model.trees.push_back(std::move(tree));
    }
    return model;
}

} // namespace wavetraffic
