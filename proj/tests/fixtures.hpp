#pragma once

#include "apm/ml.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace fixtures
{
    /// Two clusters split by the hyperplane x0 + x1 = 0, with a margin of at
    /// least 1 on each side. Features beyond the first two are noise.
    struct Separable
    {
        apm::ml::Matrix X;
        std::vector<int> y;
    };

    inline Separable separable(std::size_t n = 40, std::size_t n_features = 4, std::uint64_t seed = 17)
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        Separable s;
        s.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n_features));
        for (std::size_t i = 0; i < n; ++i)
        {
            const int cls = static_cast<int>(i % 2);
            double a, b;
            do
            {
                a = u(rng);
                b = u(rng);
            } while ((cls == 1 ? a + b : -(a + b)) < 1.0);
            s.X(i, 0) = a;
            s.X(i, 1) = b;
            for (std::size_t f = 2; f < n_features; ++f)
                s.X(i, f) = u(rng);
            s.y.push_back(cls);
        }
        return s;
    }

    /// Line-by-line transliteration of the reference weights-to-volumes
    /// routine, kept deliberately close to its original Python shape.
    /// `weights` is in input (dict insertion) order.
    inline std::map<std::string, long long>
    listing8(const std::vector<std::string> &assets, const std::vector<std::pair<std::string, double>> &weights_in,
             std::map<std::string, double> last_prices, double capital, std::map<std::string, long long> steps)
    {
        const auto getAfforShares = [](const std::string &, double money, double price, long long step) -> long long {
            if (money <= 0)
                return 0;
            return static_cast<long long>(std::floor(money / (price * static_cast<double>(step)))) * step;
        };
        // weights=dict(sorted(weights.items(), key=lambda item:item[1],reverse=True))
        std::vector<std::pair<std::string, double>> weights = weights_in;
        std::stable_sort(weights.begin(), weights.end(),
                         [](const auto &a, const auto &b) { return a.second > b.second; });
        std::map<std::string, double> wmap(weights.begin(), weights.end());
        // round 1
        double sum = 0;
        std::map<std::string, double> curr;
        std::map<std::string, long long> volumes;
        for (const auto &asset : assets)
        {
            double aval_capital = wmap[asset] * capital;
            long long shares = getAfforShares(asset, aval_capital, last_prices[asset], steps[asset]);
            if (shares <= 0)
            {
                curr[asset] = 0;
                volumes[asset] = 0;
            }
            else
            {
                curr[asset] = (shares * last_prices[asset]) / capital;
                volumes[asset] = shares;
            }
            sum = sum + curr[asset];
        }
        // round 2
        double remain_capital = capital - sum * capital;
        if (remain_capital <= 0)
            return volumes;
        for (const auto &[asset, w] : weights)
        {
            long long s = steps[asset];
            double p = last_prices[asset];
            double missing = (wmap[asset] - curr[asset]) * capital;
            while (s * p < remain_capital && s * p < missing)
                s = s + steps[asset];
            if (s * p > remain_capital)
                s = s - steps[asset];
            curr[asset] = curr[asset] + (s * p) / capital;
            volumes[asset] = volumes[asset] + s;
            remain_capital = remain_capital - s * p;
            if (remain_capital <= 0)
                break;
        }
        return volumes;
    }

    struct GridBest
    {
        double sharpe = -INFINITY;
        Eigen::VectorXd weights;
    };

    /// Exhaustive search over the simplex grid with `resolution` = 1/steps,
    /// for 2 to 4 assets. The innermost coordinate pair is updated
    /// incrementally and candidates are compared without square roots.
    inline GridBest grid_max_sharpe(const Eigen::VectorXd &excess, const Eigen::MatrixXd &sigma, int steps = 1000)
    {
        const int n = static_cast<int>(excess.size());
        const double h = 1.0 / steps;
        double best_num = 0.0, best_var = 1.0;
        bool found = false;
        Eigen::VectorXd best_w = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
        // Outer loops cover coordinates 0..n-3; the last two share the rest.
        std::vector<int> c(static_cast<std::size_t>(std::max(0, n - 2)), 0);
        const auto scan_pair = [&](int used) {
            const int rest = steps - used;
            // Start with coordinate n-2 at 0, n-1 at rest; move one grid unit at a time.
            w(n - 2) = 0.0;
            w(n - 1) = rest * h;
            double num = w.dot(excess);
            const Eigen::VectorXd sw = sigma * w;
            double var = w.dot(sw);
            // d = h (e_{n-2} - e_{n-1})
            const double dnum = h * (excess(n - 2) - excess(n - 1));
            const double dsw_dot_w_coef = 2.0 * h; // d'Sw = h (sw(n-2) - sw(n-1)) at the current w
            double g = sw(n - 2) - sw(n - 1);      // tracked as w moves
            const double dd = h * h * (sigma(n - 2, n - 2) - 2 * sigma(n - 2, n - 1) + sigma(n - 1, n - 1));
            const double dg = h * (sigma(n - 2, n - 2) - 2 * sigma(n - 2, n - 1) + sigma(n - 1, n - 1));
            for (int k = 0; k <= rest; ++k)
            {
                if (num > 0 && (!found || num * num * best_var > best_num * best_num * var))
                {
                    found = true;
                    best_num = num;
                    best_var = var;
                    best_w = w;
                    best_w(n - 2) = k * h;
                    best_w(n - 1) = (rest - k) * h;
                }
                // var(w + d) = var + 2 d'Sw + d'Sd
                var += dsw_dot_w_coef * g + dd;
                g += dg;
                num += dnum;
            }
        };
        if (n == 2)
            scan_pair(0);
        else if (n == 3)
            for (int i = 0; i <= steps; ++i)
            {
                w(0) = i * h;
                scan_pair(i);
            }
        else if (n == 4)
            for (int i = 0; i <= steps; ++i)
                for (int j = 0; i + j <= steps; ++j)
                {
                    w(0) = i * h;
                    w(1) = j * h;
                    scan_pair(i + j);
                }
        GridBest out;
        if (found)
        {
            out.weights = best_w;
            out.sharpe = excess.dot(best_w) / std::sqrt(best_w.dot(sigma * best_w));
        }
        return out;
    }

    struct SharpeFixture
    {
        Eigen::VectorXd mu;
        Eigen::MatrixXd sigma;
    };

    /// Random PSD covariance (factor model plus diagonal noise) and returns
    /// with at least one asset above zero.
    inline SharpeFixture random_sharpe_fixture(int n, std::mt19937_64 &rng)
    {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::uniform_real_distribution<double> r(-0.10, 0.40);
        SharpeFixture f;
        Eigen::MatrixXd A(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                A(i, j) = 0.3 * u(rng);
        f.sigma = A * A.transpose();
        for (int i = 0; i < n; ++i)
            f.sigma(i, i) += 0.01 + 0.05 * (u(rng) + 1.0);
        f.mu.resize(n);
        do
        {
            for (int i = 0; i < n; ++i)
                f.mu(i) = r(rng);
        } while (f.mu.maxCoeff() <= 0.0);
        return f;
    }
} // namespace fixtures
