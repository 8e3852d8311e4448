/**
 * @file portfolio.hpp
 * @brief Return/covariance estimation, long-only max-Sharpe allocation and
 *        lot-constrained translation of weights into share volumes.
 *
 * The optimizer solves the convex reformulation of the max-Sharpe problem
 *
 *     minimize   y' Sigma y
 *     subject to (mu - rf)' y = 1,  y >= 0
 *
 * with a primal active-set method and returns w = y / sum(y). Every
 * iterate is feasible, and each subproblem is an equality-constrained QP on the
 * free assets solved through an LDLT factorization.
 */

#pragma once

#include "apm/error.hpp"
#include "apm/market_data.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace apm
{
    using Shares = std::int64_t;
    using ExpectedReturns = std::map<std::string, double>;
    using WeightVector = std::map<std::string, double>;
    using LotSpec = std::map<std::string, Shares>; ///< absent asset: step 1
    using VolumeMap = std::map<std::string, Shares>;
    using PriceMap = std::map<std::string, double>;

    inline constexpr double trading_days_per_year = 252.0;

    inline Shares lot_step(const LotSpec &lots, const std::string &asset)
    {
        const auto it = lots.find(asset);
        return it == lots.end() ? 1 : it->second;
    }
} // namespace apm

namespace apm::portfolio
{

    /// Close prices, one column per asset, rows in time order.
    struct PriceTable
    {
        std::vector<std::string> assets;
        Eigen::MatrixXd closes;
    };

    inline PriceTable price_table(const MarketSnapshot &history, const std::vector<std::string> &assets)
    {
        PriceTable t;
        t.assets = assets;
        if (assets.empty())
            return t;
        const std::size_t rows = history.window(assets.front()).size();
        t.closes.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(assets.size()));
        for (std::size_t c = 0; c < assets.size(); ++c)
        {
            const auto w = history.window(assets[c]);
            if (w.size() != rows)
                fail(Errc::DataGap, "history windows differ in length");
            for (std::size_t r = 0; r < rows; ++r)
                t.closes(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[r].close;
        }
        return t;
    }

    /// Daily simple returns r_t = p_t / p_{t-1} - 1.
    inline Eigen::MatrixXd simple_returns(const PriceTable &prices)
    {
        const auto rows = prices.closes.rows();
        if (rows < 2)
            fail(Errc::TooFewObservations, "need at least 2 price rows, got " + std::to_string(rows));
        const auto top = prices.closes.topRows(rows - 1).array();
        const auto bottom = prices.closes.bottomRows(rows - 1).array();
        return (bottom / top - 1.0).matrix();
    }

    /// Geometric annualized mean: (prod(1 + r_t))^(252 / T) - 1.
    inline Eigen::VectorXd mean_historical_return(const PriceTable &prices,
                                                  double periods_per_year = trading_days_per_year)
    {
        const Eigen::MatrixXd r = simple_returns(prices);
        const auto T = static_cast<double>(r.rows());
        Eigen::VectorXd mu(r.cols());
        for (Eigen::Index c = 0; c < r.cols(); ++c)
        {
            double growth = 1.0;
            for (Eigen::Index t = 0; t < r.rows(); ++t)
                growth *= 1.0 + r(t, c);
            mu(c) = std::pow(growth, periods_per_year / T) - 1.0;
        }
        return mu;
    }

    /// Unbiased sample covariance of daily simple returns, times 252.
    inline Eigen::MatrixXd sample_cov(const PriceTable &prices, double periods_per_year = trading_days_per_year)
    {
        const Eigen::MatrixXd r = simple_returns(prices);
        if (r.rows() < 2)
            fail(Errc::TooFewObservations, "sample covariance needs at least 2 returns");
        const Eigen::MatrixXd centered = r.rowwise() - r.colwise().mean();
        Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(r.rows() - 1);
        cov = 0.5 * (cov + cov.transpose());
        return cov * periods_per_year;
    }

    struct ReturnEstimates
    {
        std::vector<std::string> assets;
        Eigen::VectorXd mu;
        Eigen::MatrixXd sigma;
        double risk_free = 0.0;
    };

    inline ExpectedReturns to_map(const std::vector<std::string> &assets, const Eigen::VectorXd &v)
    {
        ExpectedReturns out;
        for (std::size_t i = 0; i < assets.size(); ++i)
            out[assets[i]] = v(static_cast<Eigen::Index>(i));
        return out;
    }

    inline Eigen::VectorXd to_vector(const std::vector<std::string> &assets, const ExpectedReturns &m)
    {
        Eigen::VectorXd v(static_cast<Eigen::Index>(assets.size()));
        for (std::size_t i = 0; i < assets.size(); ++i)
        {
            const auto it = m.find(assets[i]);
            if (it == m.end())
                fail(Errc::MissingAsset, "no expected return for '" + assets[i] + "'");
            v(static_cast<Eigen::Index>(i)) = it->second;
        }
        return v;
    }

    struct MaxSharpeOptions
    {
        std::size_t max_iterations = 10000;
        double step_tolerance = 1e-10;
    };

    /// Adds 1e-8 * trace / n to the diagonal when the smallest eigenvalue is
    /// not clearly positive. A zero matrix gets an absolute 1e-12 ridge.
    inline Eigen::MatrixXd regularized(const Eigen::MatrixXd &sigma)
    {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
        const double n = static_cast<double>(sigma.rows());
        const double scale = sigma.trace() / n;
        const double smallest = eig.eigenvalues().minCoeff();
        if (smallest < -1e-10 * std::max(1.0, std::abs(scale)))
            fail(Errc::SingularCovariance, "covariance is not positive semi-definite");
        if (smallest > 1e-12 * std::max(scale, 0.0) && smallest > 0.0)
            return sigma;
        const double ridge = scale > 0.0 ? 1e-8 * scale : 1e-12;
        Eigen::MatrixXd out = sigma;
        out.diagonal().array() += ridge;
        return out;
    }

    /// Long-only weights summing to one that maximize (w'mu - rf) / sqrt(w'Sigma w).
    inline WeightVector max_sharpe(const ReturnEstimates &est, const MaxSharpeOptions &opts = {})
    {
        const auto n = static_cast<Eigen::Index>(est.assets.size());
        if (n == 0)
            fail(Errc::InvalidArgument, "max_sharpe needs at least one asset");
        if (est.mu.size() != n || est.sigma.rows() != n || est.sigma.cols() != n)
            fail(Errc::DimensionMismatch, "mu / Sigma dimensions do not match the asset list");
        const Eigen::VectorXd excess = est.mu.array() - est.risk_free;
        Eigen::Index best = 0;
        if (excess.maxCoeff(&best) <= 0.0)
            fail(Errc::NoExcessReturn, "no asset has expected return above the risk-free rate");
        const Eigen::MatrixXd sigma = regularized(est.sigma);

        // Start at the single-asset portfolio with the largest excess return.
        Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
        y(best) = 1.0 / excess(best);
        std::vector<bool> free(static_cast<std::size_t>(n), false);
        free[static_cast<std::size_t>(best)] = true;

        for (std::size_t iter = 0; iter < opts.max_iterations; ++iter)
        {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index i = 0; i < n; ++i)
                if (free[static_cast<std::size_t>(i)])
                    idx.push_back(i);
            const auto k = static_cast<Eigen::Index>(idx.size());
            Eigen::MatrixXd sub(k, k);
            Eigen::VectorXd a(k);
            for (Eigen::Index r = 0; r < k; ++r)
            {
                a(r) = excess(idx[r]);
                for (Eigen::Index c = 0; c < k; ++c)
                    sub(r, c) = sigma(idx[r], idx[c]);
            }
            // Minimizer of y'Sy on {a'y = 1} is S^-1 a / (a' S^-1 a).
            const Eigen::VectorXd s_inv_a = sub.ldlt().solve(a);
            const double denom = a.dot(s_inv_a);
            Eigen::VectorXd target = Eigen::VectorXd::Zero(n);
            for (Eigen::Index r = 0; r < k; ++r)
                target(idx[r]) = s_inv_a(r) / denom;
            const Eigen::VectorXd step = target - y;

            if (step.lpNorm<Eigen::Infinity>() < opts.step_tolerance * std::max(1.0, y.lpNorm<Eigen::Infinity>()))
            {
                // Optimal on this face; check the multipliers of the bounds held at zero.
                const Eigen::VectorXd grad = 2.0 * sigma * y;
                double lambda_num = 0.0, lambda_den = 0.0;
                for (auto i : idx)
                {
                    lambda_num += excess(i) * grad(i);
                    lambda_den += excess(i) * excess(i);
                }
                const double lambda = lambda_num / lambda_den;
                Eigen::Index release = -1;
                double most_negative = -1e-14 * std::max(1.0, grad.lpNorm<Eigen::Infinity>());
                for (Eigen::Index i = 0; i < n; ++i)
                {
                    if (free[static_cast<std::size_t>(i)])
                        continue;
                    const double nu = grad(i) - lambda * excess(i);
                    if (nu < most_negative)
                    {
                        most_negative = nu;
                        release = i;
                    }
                }
                if (release < 0)
                    break;
                free[static_cast<std::size_t>(release)] = true;
                continue;
            }

            // Move toward the face minimizer until a free weight hits zero.
            double t = 1.0;
            Eigen::Index blocking = -1;
            for (auto i : idx)
            {
                if (step(i) < 0.0)
                {
                    const double ratio = -y(i) / step(i);
                    if (ratio < t)
                    {
                        t = ratio;
                        blocking = i;
                    }
                }
            }
            y += t * step;
            if (blocking >= 0)
            {
                y(blocking) = 0.0;
                free[static_cast<std::size_t>(blocking)] = false;
            }
        }

        y = y.cwiseMax(0.0);
        const double total = y.sum();
        WeightVector w;
        for (Eigen::Index i = 0; i < n; ++i)
            w[est.assets[static_cast<std::size_t>(i)]] = y(i) / total;
        return w;
    }

    inline double portfolio_sharpe(const Eigen::VectorXd &w, const Eigen::VectorXd &mu, const Eigen::MatrixXd &sigma,
                                   double risk_free = 0.0)
    {
        return (w.dot(mu) - risk_free) / std::sqrt(w.dot(sigma * w));
    }

    /// Zeroes weights below `cutoff` and rounds the rest to `digits` decimals
    /// (half to even). The result is not renormalized.
    inline WeightVector clean_weights(const WeightVector &w, double cutoff = 1e-4, int digits = 5)
    {
        const double scale = std::pow(10.0, digits);
        WeightVector out;
        for (const auto &[asset, value] : w)
        {
            double v = std::abs(value) < cutoff ? 0.0 : value;
            if (digits >= 0)
                v = std::nearbyint(v * scale) / scale;
            out[asset] = v;
        }
        return out;
    }

    /// Largest multiple of `step` shares that `money` buys at `price`.
    inline Shares get_affor_shares(double money, double price, Shares step)
    {
        if (!(price > 0.0) || step < 1)
            fail(Errc::InvalidArgument, "price must be > 0 and step >= 1");
        if (!(money > 0.0))
            return 0;
        const double lots = std::floor(money / (price * static_cast<double>(step)));
        return static_cast<Shares>(lots) * step;
    }

    /// Converts target weights into share volumes that respect lot steps and
    /// the capital limit, in two rounds:
    ///
    ///  1. each asset (input order) buys the whole lots that fit inside
    ///     weight * capital;
    ///  2. while capital remains, assets in descending weight order (ties in
    ///     input order) grow a lot count from one step while its cost stays
    ///     below both the remaining capital and the asset's missing capital,
    ///     step back once if the cost went past the remaining capital, and
    ///     commit whatever is left.
    ///
    /// Round 2 may push an asset past its target weight; the allocation can
    /// go to assets that already reached their target.
    inline VolumeMap volumes_from_weights(const std::vector<std::string> &assets, const WeightVector &weights,
                                          const PriceMap &last_prices, double capital, const LotSpec &lots = {})
    {
        const auto weight_of = [&](const std::string &a) {
            const auto it = weights.find(a);
            return it == weights.end() ? 0.0 : it->second;
        };
        const auto price_of = [&](const std::string &a) {
            const auto it = last_prices.find(a);
            if (it == last_prices.end() || !(it->second > 0.0))
                fail(Errc::MissingPrice, "no positive price for '" + a + "'");
            return it->second;
        };

        VolumeMap volumes;
        std::map<std::string, double> current; // allocated fraction of capital
        double allocated = 0.0;
        for (const auto &asset : assets)
        {
            const double price = price_of(asset);
            const Shares shares = capital > 0.0 ? get_affor_shares(weight_of(asset) * capital, price, lot_step(lots, asset)) : 0;
            current[asset] = shares > 0 ? static_cast<double>(shares) * price / capital : 0.0;
            volumes[asset] = shares > 0 ? shares : 0;
            allocated += current[asset];
        }

        double remaining = capital - allocated * capital;
        if (remaining <= 0.0)
            return volumes;

        std::vector<std::string> by_weight = assets;
        std::stable_sort(by_weight.begin(), by_weight.end(),
                         [&](const std::string &a, const std::string &b) { return weight_of(a) > weight_of(b); });
        for (const auto &asset : by_weight)
        {
            const Shares step = lot_step(lots, asset);
            const double price = price_of(asset);
            const double missing = (weight_of(asset) - current[asset]) * capital;
            Shares s = step;
            while (static_cast<double>(s) * price < remaining && static_cast<double>(s) * price < missing)
                s += step;
            if (static_cast<double>(s) * price > remaining)
                s -= step;
            current[asset] += static_cast<double>(s) * price / capital;
            volumes[asset] += s;
            remaining -= static_cast<double>(s) * price;
            if (remaining <= 0.0)
                break;
        }
        return volumes;
    }

    /// Signed share deltas (target - current); positive buys, negative sells.
    inline std::map<std::string, Shares> orders_from_curr_shares(const VolumeMap &target, const VolumeMap &current)
    {
        std::map<std::string, Shares> delta;
        for (const auto &[asset, volume] : target)
        {
            const auto it = current.find(asset);
            delta[asset] = volume - (it == current.end() ? 0 : it->second);
        }
        for (const auto &[asset, volume] : current)
            if (!target.count(asset))
                delta[asset] = -volume;
        return delta;
    }

} // namespace apm::portfolio
