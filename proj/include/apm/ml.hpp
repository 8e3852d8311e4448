/**
 * @file ml.hpp
 * @brief Windowed bar datasets, uniform-width target discretization and a
 *        seeded random-forest classifier.
 *
 * The forest follows the usual CART recipe: every tree is grown on a
 * bootstrap resample, splits minimize weighted Gini impurity over
 * ceil(sqrt(n_features)) randomly drawn candidate features, and growth stops
 * when a node is pure or holds fewer than two samples. Tree i draws from a
 * PRNG seeded with (master_seed XOR i), so training on several threads gives
 * exactly the same model as training on one.
 */

#pragma once

#include "apm/error.hpp"
#include "apm/market_data.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace apm::ml
{

    using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    inline constexpr const char *bar_fields[] = {"open", "high", "low", "close", "volume"};
    inline constexpr std::size_t fields_per_bar = 5;

    inline double bar_field(const Bar &b, std::size_t field)
    {
        switch (field)
        {
        case 0: return b.open;
        case 1: return b.high;
        case 2: return b.low;
        case 3: return b.close;
        case 4: return b.volume;
        }
        fail(Errc::InvalidArgument, "bar field index out of range");
    }

    inline std::size_t bar_field_index(const std::string &name)
    {
        for (std::size_t i = 0; i < fields_per_bar; ++i)
            if (name == bar_fields[i])
                return i;
        fail(Errc::InvalidArgument, "unknown bar field '" + name + "'");
    }

    struct Dataset
    {
        Matrix X;
        std::vector<double> y;
        std::vector<std::string> feature_names;
        // Last bar used by each example's features, and the bar its target comes from.
        std::vector<Timestamp> feature_end;
        std::vector<Timestamp> target_time;

        std::size_t rows() const noexcept { return y.size(); }
        std::span<const double> row(std::size_t i) const
        {
            return {X.data() + i * static_cast<std::size_t>(X.cols()), static_cast<std::size_t>(X.cols())};
        }
    };

    /// Flattens `time_frame` consecutive bars (open, high, low, close, volume
    /// each, bar-major, timestamp excluded) into one feature row.
    inline std::vector<double> window_features(std::span<const Bar> bars)
    {
        std::vector<double> out;
        out.reserve(bars.size() * fields_per_bar);
        for (const auto &b : bars)
            for (std::size_t f = 0; f < fields_per_bar; ++f)
                out.push_back(bar_field(b, f));
        return out;
    }

    /// Example i: features from bars [i, i+time_frame-1], target from bar
    /// i+time_frame+horizon-1.
    inline Dataset bars_to_dataset(std::span<const Bar> bars, const std::string &target_field, std::size_t time_frame,
                                   std::size_t horizon)
    {
        if (time_frame < 1 || horizon < 1)
            fail(Errc::InvalidArgument, "time_frame and horizon must be >= 1");
        if (bars.size() < time_frame + horizon)
            fail(Errc::SeriesTooShort, "need " + std::to_string(time_frame + horizon) + " bars, got " +
                                           std::to_string(bars.size()));
        const std::size_t target = bar_field_index(target_field);
        const std::size_t n = bars.size() - time_frame - horizon + 1;
        const std::size_t cols = time_frame * fields_per_bar;

        Dataset ds;
        ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
        ds.y.reserve(n);
        for (std::size_t t = 0; t < time_frame; ++t)
            for (std::size_t f = 0; f < fields_per_bar; ++f)
                ds.feature_names.push_back(std::string(bar_fields[f]) + "_" + std::to_string(t));
        for (std::size_t i = 0; i < n; ++i)
        {
            for (std::size_t t = 0; t < time_frame; ++t)
                for (std::size_t f = 0; f < fields_per_bar; ++f)
                    ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t * fields_per_bar + f)) =
                        bar_field(bars[i + t], f);
            const Bar &tb = bars[i + time_frame + horizon - 1];
            ds.y.push_back(bar_field(tb, target));
            ds.feature_end.push_back(bars[i + time_frame - 1].timestamp);
            ds.target_time.push_back(tb.timestamp);
        }
        return ds;
    }

    inline Dataset bars_to_dataset(const BarSeries &series, const std::string &target_field, std::size_t time_frame,
                                   std::size_t horizon)
    {
        return bars_to_dataset(series.view(), target_field, time_frame, horizon);
    }

    /// Uniform-width bins between the min and max of the fitted values.
    class Discretizer
    {
    public:
        Discretizer() = default;

        static Discretizer fit(std::span<const double> values, std::size_t n_bins)
        {
            if (n_bins < 2)
                fail(Errc::InvalidArgument, "n_bins must be >= 2");
            if (values.empty())
                fail(Errc::EmptyDataset, "cannot fit a discretizer on no values");
            const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
            if (!(*hi > *lo))
                fail(Errc::DegenerateRange, "all values are equal");
            Discretizer d;
            d.edges_.resize(n_bins + 1);
            const double width = (*hi - *lo) / static_cast<double>(n_bins);
            for (std::size_t i = 0; i <= n_bins; ++i)
                d.edges_[i] = *lo + width * static_cast<double>(i);
            d.edges_.back() = *hi;
            return d;
        }

        std::size_t n_bins() const noexcept { return edges_.empty() ? 0 : edges_.size() - 1; }
        const std::vector<double> &edges() const noexcept { return edges_; }

        /// Bin index; a value sitting on an inner edge goes to the upper bin,
        /// values outside the fitted range are clipped to the end bins.
        int transform(double value) const
        {
            const auto inner_begin = edges_.begin() + 1;
            const auto inner_end = edges_.end() - 1;
            const auto pos = std::upper_bound(inner_begin, inner_end, value) - inner_begin;
            return static_cast<int>(pos);
        }

        std::vector<int> transform(std::span<const double> values) const
        {
            std::vector<int> out;
            out.reserve(values.size());
            for (double v : values)
                out.push_back(transform(v));
            return out;
        }

    private:
        std::vector<double> edges_;
    };

    inline Discretizer fit_discretizer(std::span<const double> values, std::size_t n_bins)
    {
        return Discretizer::fit(values, n_bins);
    }

    /// Binary tree in flat arrays. Internal nodes route x[feature] <= threshold left.
    struct DecisionTree
    {
        std::vector<int> feature;      ///< -1 for leaves
        std::vector<double> threshold; ///< unused on leaves
        std::vector<int> left;
        std::vector<int> right;
        std::vector<int> leaf_class; ///< majority class of the node's samples

        std::size_t node_count() const noexcept { return feature.size(); }

        int predict(std::span<const double> x) const
        {
            int node = 0;
            while (feature[node] >= 0)
                node = x[static_cast<std::size_t>(feature[node])] <= threshold[node] ? left[node] : right[node];
            return leaf_class[node];
        }

        friend bool operator==(const DecisionTree &, const DecisionTree &) = default;
    };

    struct ForestModel
    {
        std::vector<DecisionTree> trees;
        int n_classes = 0;
        std::size_t n_features = 0;
        std::uint64_t seed = 0;

        std::size_t n_estimators() const noexcept { return trees.size(); }

        friend bool operator==(const ForestModel &, const ForestModel &) = default;
    };

    struct ForestOptions
    {
        std::size_t n_estimators = 10;
        std::uint64_t seed = 0;
        int n_classes = 0;       ///< 0: infer as max(y) + 1
        unsigned threads = 1;    ///< trees are grown on up to this many threads
    };

    namespace detail
    {
        class TreeBuilder
        {
        public:
            TreeBuilder(const Matrix &X, std::span<const int> y, int n_classes, std::uint64_t seed)
                : X_(X), y_(y), n_classes_(n_classes), rng_(seed)
            {
                const auto n_features = static_cast<std::size_t>(X.cols());
                max_features_ = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features))));
                max_features_ = std::clamp<std::size_t>(max_features_, 1, n_features);
                features_.resize(n_features);
                std::iota(features_.begin(), features_.end(), 0);
            }

            DecisionTree build()
            {
                const std::size_t n = y_.size();
                std::uniform_int_distribution<std::size_t> pick(0, n - 1);
                std::vector<std::size_t> sample(n);
                for (auto &s : sample)
                    s = pick(rng_);
                grow(sample);
                return std::move(tree_);
            }

        private:
            struct Split
            {
                int feature = -1;
                double threshold = 0.0;
                double impurity = 0.0;
            };

            int add_node()
            {
                tree_.feature.push_back(-1);
                tree_.threshold.push_back(0.0);
                tree_.left.push_back(-1);
                tree_.right.push_back(-1);
                tree_.leaf_class.push_back(0);
                return static_cast<int>(tree_.feature.size() - 1);
            }

            double x(std::size_t row, std::size_t feature) const
            {
                return X_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(feature));
            }

            static double gini(const std::vector<std::size_t> &counts, std::size_t total)
            {
                if (total == 0)
                    return 0.0;
                double sum_sq = 0.0;
                for (auto c : counts)
                {
                    const double p = static_cast<double>(c) / static_cast<double>(total);
                    sum_sq += p * p;
                }
                return 1.0 - sum_sq;
            }

            // Best threshold on one feature, or feature == -1 if the feature is constant here.
            Split best_on_feature(std::vector<std::size_t> &rows, std::size_t feature) const
            {
                std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
                    const double xa = x(a, feature), xb = x(b, feature);
                    return xa < xb || (xa == xb && a < b);
                });
                const std::size_t n = rows.size();
                std::vector<std::size_t> left(static_cast<std::size_t>(n_classes_), 0);
                std::vector<std::size_t> right(static_cast<std::size_t>(n_classes_), 0);
                for (auto r : rows)
                    ++right[static_cast<std::size_t>(y_[r])];

                Split best;
                for (std::size_t i = 0; i + 1 < n; ++i)
                {
                    const auto cls = static_cast<std::size_t>(y_[rows[i]]);
                    ++left[cls];
                    --right[cls];
                    const double lo = x(rows[i], feature);
                    const double hi = x(rows[i + 1], feature);
                    if (!(lo < hi))
                        continue;
                    const std::size_t n_left = i + 1;
                    const std::size_t n_right = n - n_left;
                    const double impurity =
                        (static_cast<double>(n_left) * gini(left, n_left) +
                         static_cast<double>(n_right) * gini(right, n_right)) /
                        static_cast<double>(n);
                    if (best.feature < 0 || impurity < best.impurity)
                    {
                        double mid = lo + (hi - lo) / 2.0;
                        if (!(mid < hi))
                            mid = lo;
                        best = Split{static_cast<int>(feature), mid, impurity};
                    }
                }
                return best;
            }

            int grow(std::vector<std::size_t> rows)
            {
                const int node = add_node();
                std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes_), 0);
                for (auto r : rows)
                    ++counts[static_cast<std::size_t>(y_[r])];
                // Lowest class index wins ties.
                const auto majority = std::max_element(counts.begin(), counts.end()) - counts.begin();
                tree_.leaf_class[node] = static_cast<int>(majority);
                const bool pure = counts[static_cast<std::size_t>(majority)] == rows.size();
                if (pure || rows.size() < 2)
                    return node;

                // Draw candidate features in random order; keep drawing past
                // max_features only while every drawn feature was constant.
                std::shuffle(features_.begin(), features_.end(), rng_);
                const auto order = features_;
                Split best;
                for (std::size_t k = 0; k < order.size(); ++k)
                {
                    if (k >= max_features_ && best.feature >= 0)
                        break;
                    const Split s = best_on_feature(rows, order[k]);
                    if (s.feature >= 0 && (best.feature < 0 || s.impurity < best.impurity))
                        best = s;
                }
                if (best.feature < 0)
                    return node;

                std::vector<std::size_t> left_rows, right_rows;
                for (auto r : rows)
                    (x(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left_rows : right_rows)
                        .push_back(r);
                rows.clear();
                rows.shrink_to_fit();

                tree_.feature[node] = best.feature;
                tree_.threshold[node] = best.threshold;
                const int l = grow(std::move(left_rows));
                tree_.left[node] = l;
                const int r = grow(std::move(right_rows));
                tree_.right[node] = r;
                return node;
            }

            const Matrix &X_;
            std::span<const int> y_;
            int n_classes_;
            std::mt19937_64 rng_;
            std::size_t max_features_ = 1;
            std::vector<std::size_t> features_;
            DecisionTree tree_;
        };
    } // namespace detail

    inline ForestModel rf_train(const Matrix &X, std::span<const int> y, const ForestOptions &options = {})
    {
        if (y.empty() || X.rows() == 0)
            fail(Errc::EmptyDataset, "random forest needs training examples");
        if (static_cast<std::size_t>(X.rows()) != y.size())
            fail(Errc::DimensionMismatch, "X rows and y length differ");
        if (y.size() < 2)
            fail(Errc::EmptyDataset, "random forest needs at least 2 examples");
        if (X.cols() == 0)
            fail(Errc::DimensionMismatch, "X has no feature columns");
        if (options.n_estimators < 1)
            fail(Errc::InvalidArgument, "n_estimators must be >= 1");
        const int max_label = *std::max_element(y.begin(), y.end());
        if (*std::min_element(y.begin(), y.end()) < 0)
            fail(Errc::InvalidArgument, "class labels must be non-negative");
        const int n_classes = options.n_classes > 0 ? options.n_classes : max_label + 1;
        if (max_label >= n_classes)
            fail(Errc::InvalidArgument, "class label outside 0..n_classes-1");

        ForestModel model;
        model.n_classes = n_classes;
        model.n_features = static_cast<std::size_t>(X.cols());
        model.seed = options.seed;
        model.trees.resize(options.n_estimators);

        const auto grow_range = [&](std::size_t begin, std::size_t step) {
            for (std::size_t i = begin; i < model.trees.size(); i += step)
                model.trees[i] = detail::TreeBuilder(X, y, n_classes, options.seed ^ static_cast<std::uint64_t>(i)).build();
        };
        const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, options.n_estimators);
        if (workers == 1)
        {
            grow_range(0, 1);
        }
        else
        {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w)
                pool.emplace_back(grow_range, w, workers);
        }
        return model;
    }

    /// Majority vote over trees; ties go to the lowest class index.
    inline int rf_predict(const ForestModel &model, std::span<const double> x)
    {
        if (model.trees.empty())
            fail(Errc::ModelMissing, "forest has no trees");
        if (x.size() != model.n_features)
            fail(Errc::DimensionMismatch, "feature row has " + std::to_string(x.size()) + " values, model expects " +
                                              std::to_string(model.n_features));
        std::vector<std::size_t> votes(static_cast<std::size_t>(model.n_classes), 0);
        for (const auto &tree : model.trees)
            ++votes[static_cast<std::size_t>(tree.predict(x))];
        return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }

    inline void to_json(nlohmann::json &j, const DecisionTree &t)
    {
        j = nlohmann::json{{"feature", t.feature},
                           {"threshold", t.threshold},
                           {"left", t.left},
                           {"right", t.right},
                           {"leaf_class", t.leaf_class}};
    }

    inline void from_json(const nlohmann::json &j, DecisionTree &t)
    {
        j.at("feature").get_to(t.feature);
        j.at("threshold").get_to(t.threshold);
        j.at("left").get_to(t.left);
        j.at("right").get_to(t.right);
        j.at("leaf_class").get_to(t.leaf_class);
    }

    inline void to_json(nlohmann::json &j, const ForestModel &m)
    {
        j = nlohmann::json{{"n_classes", m.n_classes},
                           {"n_features", m.n_features},
                           {"seed", m.seed},
                           {"n_estimators", m.trees.size()},
                           {"trees", m.trees}};
    }

    inline void from_json(const nlohmann::json &j, ForestModel &m)
    {
        j.at("n_classes").get_to(m.n_classes);
        j.at("n_features").get_to(m.n_features);
        j.at("seed").get_to(m.seed);
        j.at("trees").get_to(m.trees);
    }

    /// Windowed close-price classifier trained on one asset's history:
    /// the target close `horizon` bars ahead, binned into `n_bins` uniform
    /// classes over the training range.
    struct PricePredictor
    {
        ForestModel model;
        Discretizer discretizer;
        std::size_t time_frame = 10;

        static PricePredictor train(std::span<const Bar> history, std::size_t time_frame, std::size_t horizon,
                                    std::size_t n_bins, const ForestOptions &options)
        {
            const Dataset ds = bars_to_dataset(history, "close", time_frame, horizon);
            PricePredictor p;
            p.time_frame = time_frame;
            p.discretizer = fit_discretizer(ds.y, n_bins);
            const auto labels = p.discretizer.transform(ds.y);
            ForestOptions opts = options;
            opts.n_classes = static_cast<int>(n_bins);
            p.model = rf_train(ds.X, labels, opts);
            return p;
        }

        /// Class predicted from the most recent `time_frame` bars of the window.
        int predict(std::span<const Bar> window) const
        {
            if (window.size() < time_frame)
                fail(Errc::WindowTooShort, "prediction needs " + std::to_string(time_frame) + " bars, got " +
                                               std::to_string(window.size()));
            return rf_predict(model, window_features(window.last(time_frame)));
        }
    };

} // namespace apm::ml
