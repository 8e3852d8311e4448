#pragma once

#include "apm/portfolio.hpp"

#include <optional>
#include <string>
#include <utility>

namespace apm
{
    enum class Side
    {
        Buy,
        Sell,
    };

    struct Order
    {
        std::string asset;
        Side side = Side::Buy;
        Shares volume = 0;
        std::optional<double> limit; ///< market order when absent

        friend bool operator==(const Order &, const Order &) = default;
    };

    inline Order buy_order(std::string asset, Shares volume, std::optional<double> limit = std::nullopt)
    {
        return Order{std::move(asset), Side::Buy, volume, limit};
    }

    inline Order sell_order(std::string asset, Shares volume, std::optional<double> limit = std::nullopt)
    {
        return Order{std::move(asset), Side::Sell, volume, limit};
    }
} // namespace apm
