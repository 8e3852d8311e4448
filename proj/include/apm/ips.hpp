/**
 * @file ips.hpp
 * @brief Investment policy statement: allowed assets and per-class weight
 *        bounds, with a portfolio check and an order vetting pass.
 *
 * Class weight = value of the class's holdings / (cash + value of all holdings).
 * An empty allowed-asset set means every asset is allowed.
 */

#pragma once

#include "apm/error.hpp"
#include "apm/order.hpp"
#include "apm/portfolio.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace apm::ips
{

    struct ClassBounds
    {
        double min_weight = 0.0;
        double max_weight = 1.0;
    };

    struct PolicyStatement
    {
        std::set<std::string> allowed_assets;
        std::map<std::string, std::string> asset_class;
        std::map<std::string, ClassBounds> class_bounds;

        bool allows(const std::string &asset) const
        {
            return allowed_assets.empty() || allowed_assets.count(asset) != 0;
        }

        void validate() const
        {
            for (const auto &[cls, b] : class_bounds)
                if (!(0.0 <= b.min_weight && b.min_weight <= b.max_weight && b.max_weight <= 1.0))
                    fail(Errc::ConfigError, "class '" + cls + "' needs 0 <= min <= max <= 1");
            for (const auto &asset : allowed_assets)
                if (!class_bounds.empty() && !asset_class.count(asset))
                    fail(Errc::ConfigError, "allowed asset '" + asset + "' has no class");
        }
    };

    enum class ViolationKind
    {
        DisallowedAsset,
        ClassUnderMin,
        ClassOverMax,
    };

    struct Violation
    {
        ViolationKind kind;
        std::string subject;
        double observed = 0.0;
        double bound = 0.0;

        /// Distance outside the allowed region.
        double excess() const
        {
            switch (kind)
            {
            case ViolationKind::ClassUnderMin: return bound - observed;
            case ViolationKind::ClassOverMax:
            case ViolationKind::DisallowedAsset: return observed - bound;
            }
            return 0.0;
        }
    };

    inline constexpr double weight_tolerance = 1e-12;

    inline std::vector<Violation> check_portfolio(const PolicyStatement &policy, const VolumeMap &positions,
                                                  const PriceMap &prices, double cash)
    {
        std::map<std::string, double> value;
        double total = cash;
        for (const auto &[asset, shares] : positions)
        {
            if (shares == 0)
                continue;
            const auto it = prices.find(asset);
            if (it == prices.end())
                fail(Errc::MissingPrice, "no price for held asset '" + asset + "'");
            value[asset] = static_cast<double>(shares) * it->second;
            total += value[asset];
        }
        const auto weight = [&](double v) { return total > 0.0 ? v / total : 0.0; };

        std::vector<Violation> out;
        for (const auto &[asset, v] : value)
            if (!policy.allows(asset))
                out.push_back({ViolationKind::DisallowedAsset, asset, weight(v), 0.0});

        for (const auto &[cls, bounds] : policy.class_bounds)
        {
            double class_value = 0.0;
            for (const auto &[asset, v] : value)
            {
                const auto it = policy.asset_class.find(asset);
                if (it != policy.asset_class.end() && it->second == cls)
                    class_value += v;
            }
            const double w = weight(class_value);
            if (w < bounds.min_weight - weight_tolerance)
                out.push_back({ViolationKind::ClassUnderMin, cls, w, bounds.min_weight});
            else if (w > bounds.max_weight + weight_tolerance)
                out.push_back({ViolationKind::ClassOverMax, cls, w, bounds.max_weight});
        }
        return out;
    }

    namespace detail
    {
        inline void apply(const Order &order, VolumeMap &positions, double &cash, double price)
        {
            Shares &held = positions[order.asset];
            if (order.side == Side::Buy)
            {
                held += order.volume;
                cash -= static_cast<double>(order.volume) * price;
            }
            else
            {
                const Shares sold = std::min(order.volume, held);
                held -= sold;
                cash += static_cast<double>(sold) * price;
            }
        }

        // True when every violation in `after` already existed in `before`
        // with at least as much excess, and the total excess went down.
        inline bool strictly_reduces(const std::vector<Violation> &before, const std::vector<Violation> &after)
        {
            double sum_before = 0.0, sum_after = 0.0;
            for (const auto &v : before)
                sum_before += v.excess();
            for (const auto &v : after)
            {
                const auto it = std::find_if(before.begin(), before.end(), [&](const Violation &b) {
                    return b.kind == v.kind && b.subject == v.subject;
                });
                if (it == before.end() || v.excess() > it->excess() + weight_tolerance)
                    return false;
                sum_after += v.excess();
            }
            return sum_after < sum_before - weight_tolerance;
        }
    } // namespace detail

    /// Simulates the orders in sequence at `prices` and drops every order
    /// whose post-fill portfolio breaks the policy, unless it strictly
    /// reduces violations that were already there. Accepted orders keep
    /// their input order.
    inline std::vector<Order> vet_orders(const PolicyStatement &policy, const std::vector<Order> &orders,
                                         VolumeMap positions, const PriceMap &prices, double cash)
    {
        std::vector<Order> accepted;
        auto current = check_portfolio(policy, positions, prices, cash);
        for (const auto &order : orders)
        {
            const auto it = prices.find(order.asset);
            if (it == prices.end())
                fail(Errc::MissingPrice, "no price for order asset '" + order.asset + "'");
            VolumeMap next_positions = positions;
            double next_cash = cash;
            detail::apply(order, next_positions, next_cash, it->second);
            auto next = check_portfolio(policy, next_positions, prices, next_cash);
            if (next.empty() || detail::strictly_reduces(current, next))
            {
                accepted.push_back(order);
                positions = std::move(next_positions);
                cash = next_cash;
                current = std::move(next);
            }
        }
        return accepted;
    }

    inline std::string_view kind_name(ViolationKind k)
    {
        switch (k)
        {
        case ViolationKind::DisallowedAsset: return "DisallowedAsset";
        case ViolationKind::ClassUnderMin: return "ClassUnderMin";
        case ViolationKind::ClassOverMax: return "ClassOverMax";
        }
        return "?";
    }

} // namespace apm::ips
