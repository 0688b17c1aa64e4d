#include "rotmap/learn/forest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "rotmap/error.hpp"
#include "rotmap/parallel.hpp"

namespace rotmap::learn {

std::size_t default_mtry(std::size_t p) noexcept { return std::max<std::size_t>(1, (p + 2) / 3); }

namespace {

bool goes_left(const Node& node, double v) {
    if (node.left_categories.empty() && node.right_categories.empty()) return v <= node.threshold;
    if (std::binary_search(node.left_categories.begin(), node.left_categories.end(), v)) return true;
    if (std::binary_search(node.right_categories.begin(), node.right_categories.end(), v)) return false;
    return node.unseen_left;
}

struct Split {
    int var = -1;
    double gain = 0.0;  // sum_L^2 / n_L + sum_R^2 / n_R
    double threshold = 0.0;
    std::vector<double> left_categories;
    std::vector<double> right_categories;
    bool unseen_left = false;
};

class Grower {
public:
    Grower(const Table& table, std::size_t nodesize, std::size_t mtry, Rng& rng, RegressionTree& tree)
        : table_(table), nodesize_(nodesize), mtry_(mtry), rng_(rng), tree_(tree) {
        vars_.resize(table.cols());
        std::iota(vars_.begin(), vars_.end(), 0);
    }

    void grow(std::vector<std::size_t> sample) {
        sample_ = std::move(sample);
        build(0, sample_.size());
    }

private:
    int build(std::size_t begin, std::size_t end) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const auto& y = table_.response;
        const double n = static_cast<double>(end - begin);
        double sum = 0.0;
        bool constant = true;
        for (std::size_t k = begin; k < end; ++k) {
            sum += y[sample_[k]];
            constant = constant && y[sample_[k]] == y[sample_[begin]];
        }
        tree_.nodes[id].value = sum / n;
        if (end - begin < 2 * nodesize_ || constant) return id;

        // Fresh draw of mtry variables without replacement.
        for (std::size_t k = 0; k < mtry_; ++k) {
            const auto pick = k + static_cast<std::size_t>(rng_.index(vars_.size() - k));
            std::swap(vars_[k], vars_[pick]);
        }
        const std::vector<std::size_t> drawn(vars_.begin(), vars_.begin() + static_cast<std::ptrdiff_t>(mtry_));

        double sum_sq = 0.0;
        for (std::size_t k = begin; k < end; ++k) sum_sq += y[sample_[k]] * y[sample_[k]];
        const double parent = sum * sum / n;
        const double sse = sum_sq - parent;
        Split best;
        best.gain = parent;
        for (auto j : drawn) {
            if (table_.categorical[j]) categorical_split(j, begin, end, best);
            else continuous_split(j, begin, end, best);
        }
        if (best.var < 0 || !(best.gain - parent > 1e-10 * std::max(sse, 1e-300))) return id;

        Node split;
        split.var = best.var;
        split.threshold = best.threshold;
        split.left_categories = std::move(best.left_categories);
        split.right_categories = std::move(best.right_categories);
        split.unseen_left = best.unseen_left;
        split.value = tree_.nodes[id].value;
        const auto& col = table_.columns[static_cast<std::size_t>(split.var)];
        const auto mid = std::stable_partition(sample_.begin() + static_cast<std::ptrdiff_t>(begin),
                                               sample_.begin() + static_cast<std::ptrdiff_t>(end),
                                               [&](std::size_t r) { return goes_left(split, col[r]); });
        const auto cut = static_cast<std::size_t>(mid - sample_.begin());
        tree_.nodes[id] = std::move(split);
        const int l = build(begin, cut);
        const int r = build(cut, end);
        tree_.nodes[id].left = l;
        tree_.nodes[id].right = r;
        return id;
    }

    void continuous_split(std::size_t j, std::size_t begin, std::size_t end, Split& best) {
        const auto& col = table_.columns[j];
        const auto& y = table_.response;
        pairs_.clear();
        for (std::size_t k = begin; k < end; ++k) pairs_.emplace_back(col[sample_[k]], y[sample_[k]]);
        std::sort(pairs_.begin(), pairs_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        double total = 0.0;
        for (const auto& p : pairs_) total += p.second;
        double left = 0.0;
        const std::size_t m = pairs_.size();
        for (std::size_t k = 0; k + 1 < m; ++k) {
            left += pairs_[k].second;
            if (!(pairs_[k].first < pairs_[k + 1].first)) continue;
            const double nl = static_cast<double>(k + 1);
            const double nr = static_cast<double>(m - k - 1);
            const double gain = left * left / nl + (total - left) * (total - left) / nr;
            if (gain > best.gain) {
                double t = 0.5 * (pairs_[k].first + pairs_[k + 1].first);
                if (!(t < pairs_[k + 1].first)) t = pairs_[k].first;
                best = Split{static_cast<int>(j), gain, t, {}, {}, false};
            }
        }
    }

    void categorical_split(std::size_t j, std::size_t begin, std::size_t end, Split& best) {
        const auto& col = table_.columns[j];
        const auto& y = table_.response;
        std::map<double, std::pair<double, std::size_t>> stats;  // code -> (sum, count)
        for (std::size_t k = begin; k < end; ++k) {
            auto& s = stats[col[sample_[k]]];
            s.first += y[sample_[k]];
            ++s.second;
        }
        if (stats.size() < 2) return;
        struct Level {
            double code, sum;
            std::size_t count;
        };
        std::vector<Level> levels;
        for (const auto& [code, s] : stats) levels.push_back({code, s.first, s.second});
        std::stable_sort(levels.begin(), levels.end(), [](const Level& a, const Level& b) {
            return a.sum / static_cast<double>(a.count) < b.sum / static_cast<double>(b.count);
        });
        double total = 0.0;
        std::size_t count = 0;
        for (const auto& l : levels) {
            total += l.sum;
            count += l.count;
        }
        double left = 0.0;
        std::size_t nl = 0;
        for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
            left += levels[k].sum;
            nl += levels[k].count;
            const auto nr = count - nl;
            const double gain = left * left / static_cast<double>(nl) +
                                (total - left) * (total - left) / static_cast<double>(nr);
            if (gain > best.gain) {
                Split s{static_cast<int>(j), gain, 0.0, {}, {}, nl >= nr};
                for (std::size_t q = 0; q < levels.size(); ++q) {
                    (q <= k ? s.left_categories : s.right_categories).push_back(levels[q].code);
                }
                std::sort(s.left_categories.begin(), s.left_categories.end());
                std::sort(s.right_categories.begin(), s.right_categories.end());
                best = std::move(s);
            }
        }
    }

    const Table& table_;
    std::size_t nodesize_;
    std::size_t mtry_;
    Rng& rng_;
    RegressionTree& tree_;
    std::vector<std::size_t> vars_;
    std::vector<std::size_t> sample_;
    std::vector<std::pair<double, double>> pairs_;
};

std::vector<std::vector<double>> all_rows(const Table& table) {
    std::vector<std::vector<double>> rows(table.rows());
    for (std::size_t i = 0; i < table.rows(); ++i) rows[i] = table.row(i);
    return rows;
}

void check_schema(const Forest& forest, const Table& table) {
    if (forest.names != table.names) throw DataError("table columns differ from the forest's variables");
}

}  // namespace

std::size_t RegressionTree::leaf(const std::vector<double>& row) const {
    std::size_t id = 0;
    while (!nodes[id].is_leaf()) {
        const auto& n = nodes[id];
        id = static_cast<std::size_t>(goes_left(n, row[static_cast<std::size_t>(n.var)]) ? n.left : n.right);
    }
    return id;
}

double RegressionTree::predict(const std::vector<double>& row) const { return nodes[leaf(row)].value; }

double Forest::predict(const std::vector<double>& row) const {
    if (row.size() != names.size()) throw DataError("row has the wrong number of predictors");
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict(row);
    return sum / static_cast<double>(trees.size());
}

bool Forest::has_bags() const noexcept {
    return std::all_of(trees.begin(), trees.end(), [](const RegressionTree& t) { return !t.in_bag.empty(); });
}

Forest fit_random_forest(const Table& table, const ForestParams& params) {
    table.validate();
    const std::size_t n = table.rows();
    const std::size_t p = table.cols();
    if (n < 2) throw DataError("random forest needs at least 2 rows");
    if (params.ntree < 1) throw DataError("ntree must be at least 1");
    if (params.nodesize < 1) throw DataError("nodesize must be at least 1");
    const std::size_t mtry = params.mtry.value_or(default_mtry(p));
    if (mtry < 1 || mtry > p) throw DataError("mtry must lie in [1, p]");

    Forest forest;
    forest.ntree = params.ntree;
    forest.nodesize = params.nodesize;
    forest.mtry = mtry;
    forest.seed = params.seed;
    forest.names = table.names;
    forest.categorical = table.categorical;
    forest.trees.resize(params.ntree);
    parallel_for(params.ntree, params.threads, [&](std::size_t t) {
        Rng rng(seeds::derive(params.seed, "tree", {t}));
        auto& tree = forest.trees[t];
        tree.in_bag.assign(n, 0);
        for (std::size_t k = 0; k < n; ++k) ++tree.in_bag[rng.index(n)];
        std::vector<std::size_t> sample;
        sample.reserve(n);
        for (std::size_t i = 0; i < n; ++i) sample.insert(sample.end(), tree.in_bag[i], i);
        Grower(table, params.nodesize, mtry, rng, tree).grow(std::move(sample));
    });
    return forest;
}

OobPrediction oob_predict(const Forest& forest, const Table& table, int threads) {
    check_schema(forest, table);
    if (!forest.has_bags()) throw ModelError("forest has no bootstrap records (loaded models cannot give OOB predictions)");
    const std::size_t n = table.rows();
    for (const auto& t : forest.trees) {
        if (t.in_bag.size() != n) throw DataError("table is not the forest's training table");
    }
    OobPrediction out;
    out.prediction.resize(n);
    out.covered.resize(n);
    out.trees.resize(n);
    std::vector<char> covered(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const auto row = table.row(i);
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& t : forest.trees) {
            if (t.in_bag[i] == 0) {
                sum += t.predict(row);
                ++count;
            }
        }
        out.trees[i] = count;
        covered[i] = count > 0;
        out.prediction[i] = count > 0 ? sum / static_cast<double>(count) : forest.predict(row);
    });
    for (std::size_t i = 0; i < n; ++i) out.covered[i] = covered[i] != 0;
    return out;
}

std::vector<double> permutation_importance(const Forest& forest, const Table& table, std::uint64_t seed,
                                           int threads, const Permuter& permuter) {
    check_schema(forest, table);
    if (!forest.has_bags()) throw ModelError("forest has no bootstrap records");
    const std::size_t p = table.cols();
    const auto rows = all_rows(table);
    const auto& y = table.response;
    std::vector<std::vector<double>> per_tree(forest.trees.size());
    parallel_for(forest.trees.size(), threads, [&](std::size_t t) {
        const auto& tree = forest.trees[t];
        std::vector<std::size_t> oob;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (tree.in_bag[i] == 0) oob.push_back(i);
        }
        if (oob.empty()) return;
        const double m = static_cast<double>(oob.size());
        double base = 0.0;
        for (auto i : oob) {
            const double e = y[i] - tree.predict(rows[i]);
            base += e * e;
        }
        base /= m;
        auto& scores = per_tree[t];
        scores.resize(p);
        std::vector<double> buffer;
        for (std::size_t j = 0; j < p; ++j) {
            std::vector<std::size_t> perm(oob.size());
            std::iota(perm.begin(), perm.end(), 0);
            Rng rng(seeds::derive(seed, "importance", {t, j}));
            if (permuter) {
                permuter(perm, rng);
            } else {
                for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[rng.index(k)]);
            }
            double mse = 0.0;
            for (std::size_t k = 0; k < oob.size(); ++k) {
                buffer = rows[oob[k]];
                buffer[j] = rows[oob[perm[k]]][j];
                const double e = y[oob[k]] - tree.predict(buffer);
                mse += e * e;
            }
            scores[j] = mse / m - base;
        }
    });
    std::vector<double> importance(p, 0.0);
    std::size_t used = 0;
    for (const auto& scores : per_tree) {
        if (scores.empty()) continue;
        ++used;
        for (std::size_t j = 0; j < p; ++j) importance[j] += scores[j];
    }
    if (used > 0) {
        for (auto& v : importance) v /= static_cast<double>(used);
    }
    return importance;
}

nlohmann::json forest_to_json(const Forest& forest) {
    auto variables = nlohmann::json::array();
    for (std::size_t j = 0; j < forest.names.size(); ++j) {
        variables.push_back({{"name", forest.names[j]}, {"categorical", static_cast<bool>(forest.categorical[j])}});
    }
    auto trees = nlohmann::json::array();
    for (const auto& tree : forest.trees) {
        nlohmann::json var = nlohmann::json::array(), thr = nlohmann::json::array(), left = nlohmann::json::array(),
                       right = nlohmann::json::array(), value = nlohmann::json::array(),
                       cats = nlohmann::json::array();
        for (const auto& n : tree.nodes) {
            var.push_back(n.var);
            thr.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            value.push_back(n.value);
            if (!n.left_categories.empty() || !n.right_categories.empty()) {
                cats.push_back({{"node", &n - tree.nodes.data()},
                                {"left", n.left_categories},
                                {"right", n.right_categories},
                                {"unseen_left", n.unseen_left}});
            }
        }
        trees.push_back({{"var", var}, {"threshold", thr}, {"left", left}, {"right", right}, {"value", value},
                         {"categories", cats}});
    }
    return {{"format", "rotmap-forest"}, {"version", kModelFormatVersion},
            {"ntree", forest.ntree},    {"nodesize", forest.nodesize},
            {"mtry", forest.mtry},      {"seed", forest.seed},
            {"variables", variables},   {"trees", trees}};
}

Forest forest_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "rotmap-forest") throw ModelError("not a forest model");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw ModelError("unsupported model version " + std::to_string(version));
        }
        Forest f;
        f.ntree = j.at("ntree").get<std::size_t>();
        f.nodesize = j.at("nodesize").get<std::size_t>();
        f.mtry = j.at("mtry").get<std::size_t>();
        f.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& v : j.at("variables")) {
            f.names.push_back(v.at("name").get<std::string>());
            f.categorical.push_back(v.at("categorical").get<bool>());
        }
        for (const auto& t : j.at("trees")) {
            RegressionTree tree;
            const auto var = t.at("var").get<std::vector<int>>();
            const auto thr = t.at("threshold").get<std::vector<double>>();
            const auto left = t.at("left").get<std::vector<int>>();
            const auto right = t.at("right").get<std::vector<int>>();
            const auto value = t.at("value").get<std::vector<double>>();
            const auto size = var.size();
            if (size == 0 || thr.size() != size || left.size() != size || right.size() != size ||
                value.size() != size) {
                throw ModelError("tree node arrays have inconsistent lengths");
            }
            tree.nodes.resize(size);
            for (std::size_t k = 0; k < size; ++k) {
                auto& n = tree.nodes[k];
                n.var = var[k];
                n.threshold = thr[k];
                n.left = left[k];
                n.right = right[k];
                n.value = value[k];
                if (n.var >= static_cast<int>(f.names.size())) throw ModelError("node variable out of range");
                if (n.var >= 0 && (n.left <= static_cast<int>(k) || n.right <= static_cast<int>(k) ||
                                   n.left >= static_cast<int>(size) || n.right >= static_cast<int>(size))) {
                    throw ModelError("node children out of range");
                }
            }
            for (const auto& c : t.at("categories")) {
                const auto k = c.at("node").get<std::size_t>();
                if (k >= size) throw ModelError("category record for a missing node");
                tree.nodes[k].left_categories = c.at("left").get<std::vector<double>>();
                tree.nodes[k].right_categories = c.at("right").get<std::vector<double>>();
                tree.nodes[k].unseen_left = c.at("unseen_left").get<bool>();
            }
            f.trees.push_back(std::move(tree));
        }
        if (f.trees.size() != f.ntree || f.trees.empty()) throw ModelError("tree count differs from ntree");
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed forest model: ") + e.what());
    }
}

}  // namespace rotmap::learn
