// Random-forest classification, recursive feature elimination and
// stratified cross-validation over per-subject descriptor tables.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "grrail/common.hpp"
#include "grrail/stats.hpp"

namespace grrail {

struct CohortRow {
    std::string id;
    std::vector<double> x;
    int label = 0;
    bool test = false;
};

struct CohortTable {
    std::vector<std::string> features;
    std::vector<CohortRow> rows;

    std::vector<std::size_t> rows_where(bool test) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].test == test) out.push_back(i);
        return out;
    }

    void validate() const {
        bool seen[2] = {false, false};
        for (const auto& r : rows) {
            if (r.x.size() != features.size()) throw Error("ragged table", "row " + r.id + " has the wrong length");
            if (r.label != 0 && r.label != 1) throw Error("invalid label", "row " + r.id);
            for (double v : r.x)
                if (!std::isfinite(v)) throw Error("non-finite value", "row " + r.id);
            if (!r.test) seen[r.label] = true;
        }
        if (!seen[0] || !seen[1]) throw Error("single class", "training split needs both classes");
    }
};

/// Row-major design matrix restricted to some rows and columns.
using Matrix = std::vector<std::vector<double>>;

inline Matrix design(const CohortTable& t, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
    Matrix m(rows.size(), std::vector<double>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) m[r][c] = t.rows[rows[r]].x[cols[c]];
    return m;
}

inline std::vector<int> labels_of(const CohortTable& t, std::span<const std::size_t> rows) {
    std::vector<int> y(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) y[r] = t.rows[rows[r]].label;
    return y;
}

struct ForestParams {
    int trees = 500;
    int max_depth = 0;  // 0 = unlimited
    int min_leaf = 2;
    int features_per_split = 0;  // 0 = floor(sqrt(d))
    bool bootstrap = true;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double prob = 0.0;  // P(label = 1) of the training samples reaching the node
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const {
        int k = 0;
        while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
            const auto& n = nodes[static_cast<std::size_t>(k)];
            k = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(k)].prob;
    }
};

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, const std::vector<int>& y, const ForestParams& p, std::uint64_t seed)
        : X_(X), y_(y), p_(p), rng_(seed), d_(X.empty() ? 0 : X[0].size()), importance_(d_, 0.0) {
        mtry_ = p.features_per_split > 0 ? static_cast<std::size_t>(p.features_per_split)
                                         : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d_))));
        mtry_ = std::min(mtry_, d_);
    }

    DecisionTree build(std::vector<std::size_t> samples) {
        total_ = static_cast<double>(samples.size());
        grow(samples, 0);
        double s = std::accumulate(importance_.begin(), importance_.end(), 0.0);
        if (s > 0.0)
            for (double& v : importance_) v /= s;
        return std::move(tree_);
    }

    const std::vector<double>& importance() const { return importance_; }

private:
    static double gini(double pos, double n) {
        if (n <= 0.0) return 0.0;
        const double p = pos / n;
        return 2.0 * p * (1.0 - p);
    }

    int grow(std::vector<std::size_t>& samples, int depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const double n = static_cast<double>(samples.size());
        double pos = 0;
        for (auto s : samples) pos += y_[s];
        tree_.nodes[static_cast<std::size_t>(id)].prob = pos / n;
        const double parent = gini(pos, n);
        const bool depth_ok = p_.max_depth <= 0 || depth < p_.max_depth;
        if (parent <= 0.0 || !depth_ok || samples.size() < 2 * static_cast<std::size_t>(std::max(1, p_.min_leaf))) return id;

        std::vector<std::size_t> order(d_);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng_);

        double best_gain = 0.0, best_thr = 0.0;
        int best_feature = -1;
        bool any_valid = false;
        std::vector<std::pair<double, int>> vals(samples.size());
        const auto min_leaf = static_cast<std::size_t>(std::max(1, p_.min_leaf));
        for (std::size_t visited = 0; visited < d_; ++visited) {
            if (visited >= mtry_ && any_valid) break;
            const std::size_t f = order[visited];
            for (std::size_t k = 0; k < samples.size(); ++k) vals[k] = {X_[samples[k]][f], y_[samples[k]]};
            std::sort(vals.begin(), vals.end());
            double left_pos = 0;
            for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
                left_pos += vals[k].second;
                if (vals[k].first == vals[k + 1].first) continue;
                const std::size_t nl = k + 1, nr = vals.size() - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                any_valid = true;
                const double gl = gini(left_pos, static_cast<double>(nl));
                const double gr = gini(pos - left_pos, static_cast<double>(nr));
                const double gain = parent - (static_cast<double>(nl) * gl + static_cast<double>(nr) * gr) / n;
                if (gain > best_gain + 1e-15) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_thr = 0.5 * (vals[k].first + vals[k + 1].first);
                    if (!(best_thr > vals[k].first && best_thr < vals[k + 1].first)) best_thr = vals[k].first;
                }
            }
        }
        if (best_feature < 0) return id;

        importance_[static_cast<std::size_t>(best_feature)] += n / total_ * best_gain;
        std::vector<std::size_t> left, right;
        for (auto s : samples) (X_[s][static_cast<std::size_t>(best_feature)] <= best_thr ? left : right).push_back(s);
        samples.clear();
        samples.shrink_to_fit();
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_thr;
        node.left = l;
        node.right = r;
        return id;
    }

    const Matrix& X_;
    const std::vector<int>& y_;
    const ForestParams& p_;
    std::mt19937_64 rng_;
    std::size_t d_ = 0, mtry_ = 1;
    double total_ = 0.0;
    std::vector<double> importance_;
    DecisionTree tree_;
};

}  // namespace detail

struct Forest {
    ForestParams params;
    std::vector<DecisionTree> trees;
    std::vector<double> importance;  // mean normalised impurity decrease

    double predict_proba(std::span<const double> x) const {
        double s = 0.0;
        for (const auto& t : trees) s += t.predict(x);
        return s / static_cast<double>(trees.size());
    }
    int predict(std::span<const double> x) const { return predict_proba(x) > 0.5 ? 1 : 0; }
};

/// CART trees (Gini) on bootstrap resamples; tree t is seeded from
/// (seed, t) so the forest is independent of the thread count.
inline Forest train_forest(const Matrix& X, const std::vector<int>& y, const ForestParams& params) {
    if (X.empty() || X.size() != y.size()) throw Error("invalid training data");
    if (params.trees < 1) throw Error("invalid forest size");
    const bool has0 = std::find(y.begin(), y.end(), 0) != y.end();
    const bool has1 = std::find(y.begin(), y.end(), 1) != y.end();
    if (!has0 || !has1) throw Error("single class", "training data contains one class");
    const std::size_t d = X[0].size();
    Forest f;
    f.params = params;
    f.trees.resize(static_cast<std::size_t>(params.trees));
    std::vector<std::vector<double>> imp(f.trees.size());
    parallel_for(f.trees.size(), params.threads, [&](std::size_t t) {
        const std::uint64_t seed = derive_seed(params.seed, static_cast<std::uint64_t>(t));
        std::mt19937_64 rng(derive_seed(seed, "bootstrap"));
        std::vector<std::size_t> samples(X.size());
        if (params.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, X.size() - 1);
            for (auto& s : samples) s = pick(rng);
        } else {
            std::iota(samples.begin(), samples.end(), 0);
        }
        detail::TreeBuilder b(X, y, params, seed);
        f.trees[t] = b.build(std::move(samples));
        imp[t] = b.importance();
    });
    f.importance.assign(d, 0.0);
    for (const auto& v : imp)
        for (std::size_t k = 0; k < d; ++k) f.importance[k] += v[k];
    for (double& v : f.importance) v /= static_cast<double>(f.trees.size());
    return f;
}

inline double accuracy(const Forest& f, const Matrix& X, const std::vector<int>& y) {
    if (X.empty()) return 0.0;
    double hit = 0;
    for (std::size_t i = 0; i < X.size(); ++i) hit += f.predict(X[i]) == y[i];
    return hit / static_cast<double>(X.size());
}

/// Mean accuracy drop over `repeats` seeded shuffles of each column.
inline std::vector<double> permutation_importance(const Forest& f, const Matrix& X, const std::vector<int>& y,
                                                  std::uint64_t seed, int repeats = 20) {
    const std::size_t d = X.empty() ? 0 : X[0].size();
    std::vector<double> out(d, 0.0);
    if (X.empty()) return out;
    const double base = accuracy(f, X, y);
    for (std::size_t c = 0; c < d; ++c) {
        double drop = 0.0;
        for (int r = 0; r < repeats; ++r) {
            std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c) * 1000003ULL + static_cast<std::uint64_t>(r)));
            Matrix P = X;
            std::vector<double> col(X.size());
            for (std::size_t i = 0; i < X.size(); ++i) col[i] = X[i][c];
            std::shuffle(col.begin(), col.end(), rng);
            for (std::size_t i = 0; i < X.size(); ++i) P[i][c] = col[i];
            drop += base - accuracy(f, P, y);
        }
        out[c] = drop / repeats;
    }
    return out;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

struct SelectionParams {
    std::size_t target_k = 20;
    double correlation_threshold = 0.95;
    double drop_fraction = 0.10;
    std::size_t min_rows = 10;
    ForestParams forest{};
};

struct Selection {
    std::vector<std::size_t> columns;  // ascending indices into the table's features
    std::vector<std::string> warnings;
};

/// Constant-column removal, correlation filter (keep the lower index of any
/// pair with |r| above the threshold), then recursive elimination of the
/// least important `drop_fraction` until at most target_k remain.
/// Only `rows` are consulted.
inline Selection select_features(const CohortTable& t, std::span<const std::size_t> rows, const SelectionParams& p) {
    if (rows.size() < p.min_rows) throw Error("too few rows", "feature selection needs at least " + std::to_string(p.min_rows));
    const std::size_t d = t.features.size();
    std::vector<std::vector<double>> cols(d, std::vector<double>(rows.size()));
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t r = 0; r < rows.size(); ++r) cols[c][r] = t.rows[rows[r]].x[c];

    Selection sel;
    std::vector<std::size_t> kept;
    for (std::size_t c = 0; c < d; ++c) {
        const auto [mn, mx] = std::minmax_element(cols[c].begin(), cols[c].end());
        if (*mn == *mx) {
            sel.warnings.push_back("dropped constant feature " + t.features[c]);
            continue;
        }
        bool redundant = false;
        for (std::size_t k : kept)
            if (std::abs(pearson(cols[k], cols[c])) > p.correlation_threshold) {
                redundant = true;
                break;
            }
        if (!redundant) kept.push_back(c);
    }

    const auto y = labels_of(t, rows);
    for (int round = 0; kept.size() > p.target_k; ++round) {
        Matrix X(rows.size(), std::vector<double>(kept.size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < kept.size(); ++c) X[r][c] = cols[kept[c]][r];
        ForestParams fp = p.forest;
        fp.seed = derive_seed(p.forest.seed, static_cast<std::uint64_t>(round));
        const Forest f = train_forest(X, y, fp);
        std::vector<std::size_t> order(kept.size());
        std::iota(order.begin(), order.end(), 0);
        // least important first; among equals the higher column goes first
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (f.importance[a] != f.importance[b]) return f.importance[a] < f.importance[b];
            return a > b;
        });
        std::size_t drop = static_cast<std::size_t>(std::ceil(p.drop_fraction * static_cast<double>(kept.size())));
        drop = std::clamp<std::size_t>(drop, 1, kept.size() - p.target_k);
        std::vector<std::uint8_t> gone(kept.size(), 0);
        for (std::size_t k = 0; k < drop; ++k) gone[order[k]] = 1;
        std::vector<std::size_t> next;
        for (std::size_t c = 0; c < kept.size(); ++c)
            if (!gone[c]) next.push_back(kept[c]);
        kept = std::move(next);
    }
    sel.columns = std::move(kept);
    return sel;
}

struct CvParams {
    int folds = 5;
    SelectionParams selection{};
    ForestParams forest{};
    int permutation_repeats = 20;
    std::uint64_t seed = 0;
};

struct SubjectDecision {
    std::string id;
    int label = 0;
    double probability = 0.0;
    int predicted = 0;
};

struct EvalReport {
    double auc = 0.0;      // held-out AUC when the test split has both classes, else cv_auc
    double cv_auc = 0.0;   // pooled over out-of-fold predictions
    double test_auc = -1.0;
    double cv_accuracy_mean = 0.0;
    double cv_accuracy_std = 0.0;  // population std across folds
    std::vector<double> fold_accuracies;
    double test_accuracy = 0.0;
    std::size_t test_count = 0;
    std::vector<std::string> selected;
    std::vector<double> importances;  // permutation importance, aligned with `selected`
    std::vector<std::vector<std::string>> fold_selections;
    std::vector<std::size_t> fold_of_row;  // fold per table row; -1 for test rows
    std::vector<double> oof_probability;   // out-of-fold P(label = 1) per table row; -1 for test rows
    std::vector<SubjectDecision> decisions;
    std::vector<std::string> warnings;
};

/// Stratified fold index for each of `rows` (classes shuffled separately,
/// then dealt round-robin; the deal continues across classes so fold sizes
/// differ by at most one).
inline std::vector<int> stratified_folds(const CohortTable& t, std::span<const std::size_t> rows, int folds,
                                         std::uint64_t seed) {
    std::vector<int> fold(rows.size(), -1);
    std::size_t dealt = 0;
    for (int cls = 0; cls < 2; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t k = 0; k < rows.size(); ++k)
            if (t.rows[rows[k]].label == cls) members.push_back(k);
        if (members.size() < static_cast<std::size_t>(folds))
            throw Error("too few subjects", "class " + std::to_string(cls) + " has fewer rows than folds");
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t k : members) fold[k] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
    }
    return fold;
}

inline EvalReport cross_validate(const CohortTable& t, const CvParams& p) {
    t.validate();
    if (p.folds < 2) throw Error("invalid fold count");
    const auto train = t.rows_where(false);
    const auto test = t.rows_where(true);
    const auto fold = stratified_folds(t, train, p.folds, derive_seed(p.seed, "folds"));

    auto fit = [&](std::span<const std::size_t> rows, std::uint64_t seed, Selection& sel) {
        SelectionParams sp = p.selection;
        sp.forest = p.forest;
        sp.forest.seed = derive_seed(seed, "selection");
        sel = select_features(t, rows, sp);
        ForestParams fp = p.forest;
        fp.seed = derive_seed(seed, "forest");
        return train_forest(design(t, rows, sel.columns), labels_of(t, rows), fp);
    };

    EvalReport rep;
    rep.fold_of_row.assign(t.rows.size(), static_cast<std::size_t>(-1));
    for (std::size_t k = 0; k < train.size(); ++k) rep.fold_of_row[train[k]] = static_cast<std::size_t>(fold[k]);
    std::vector<double> oof(train.size(), 0.0);
    for (int f = 0; f < p.folds; ++f) {
        std::vector<std::size_t> fit_rows, val_rows, val_pos;
        for (std::size_t k = 0; k < train.size(); ++k) {
            if (fold[k] == f) {
                val_rows.push_back(train[k]);
                val_pos.push_back(k);
            } else {
                fit_rows.push_back(train[k]);
            }
        }
        Selection sel;
        const Forest forest = fit(fit_rows, derive_seed(p.seed, static_cast<std::uint64_t>(f)), sel);
        const Matrix Xv = design(t, val_rows, sel.columns);
        double hit = 0;
        for (std::size_t k = 0; k < val_rows.size(); ++k) {
            const double prob = forest.predict_proba(Xv[k]);
            oof[val_pos[k]] = prob;
            hit += (prob > 0.5 ? 1 : 0) == t.rows[val_rows[k]].label;
        }
        rep.fold_accuracies.push_back(hit / static_cast<double>(val_rows.size()));
        std::vector<std::string> names;
        for (auto c : sel.columns) names.push_back(t.features[c]);
        rep.fold_selections.push_back(std::move(names));
    }
    const double nf = static_cast<double>(p.folds);
    for (double a : rep.fold_accuracies) rep.cv_accuracy_mean += a / nf;
    for (double a : rep.fold_accuracies) rep.cv_accuracy_std += (a - rep.cv_accuracy_mean) * (a - rep.cv_accuracy_mean) / nf;
    rep.cv_accuracy_std = std::sqrt(rep.cv_accuracy_std);
    rep.oof_probability.assign(t.rows.size(), -1.0);
    for (std::size_t k = 0; k < train.size(); ++k) rep.oof_probability[train[k]] = oof[k];
    rep.cv_auc = auc(oof, labels_of(t, train));
    rep.auc = rep.cv_auc;

    Selection sel;
    const Forest final_forest = fit(train, derive_seed(p.seed, "final"), sel);
    rep.warnings = sel.warnings;
    for (auto c : sel.columns) rep.selected.push_back(t.features[c]);
    const auto& held = test.empty() ? train : test;
    const Matrix Xh = design(t, held, sel.columns);
    const auto yh = labels_of(t, held);
    if (!test.empty()) {
        std::vector<double> probs;
        double hit = 0;
        for (std::size_t k = 0; k < test.size(); ++k) {
            const double prob = final_forest.predict_proba(Xh[k]);
            probs.push_back(prob);
            const int pred = prob > 0.5 ? 1 : 0;
            hit += pred == yh[k];
            rep.decisions.push_back({t.rows[test[k]].id, yh[k], prob, pred});
        }
        rep.test_count = test.size();
        rep.test_accuracy = hit / static_cast<double>(test.size());
        const bool both = std::find(yh.begin(), yh.end(), 0) != yh.end() && std::find(yh.begin(), yh.end(), 1) != yh.end();
        if (both) {
            rep.test_auc = auc(probs, yh);
            rep.auc = rep.test_auc;
        }
    }
    rep.importances = permutation_importance(final_forest, Xh, yh, derive_seed(p.seed, "permutation"), p.permutation_repeats);
    return rep;
}

}  // namespace grrail
