#pragma once

#include "apm/error.hpp"

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace apm
{

    /// UTC instant with one-second resolution. Remembers whether it was written
    /// as a bare date so that formatting reproduces the original text.
    class Timestamp
    {
    public:
        constexpr Timestamp() = default;

        static Timestamp from_date(int year, unsigned month, unsigned day)
        {
            using namespace std::chrono;
            const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
            if (!ymd.ok())
                fail(Errc::InvalidArgument, "invalid calendar date");
            const auto days = sys_days{ymd}.time_since_epoch().count();
            return Timestamp(static_cast<std::int64_t>(days) * 86400, true);
        }

        static Timestamp from_datetime(int year, unsigned month, unsigned day, int hh, int mm, int ss)
        {
            if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 60)
                fail(Errc::InvalidArgument, "invalid time of day");
            Timestamp t = from_date(year, month, day);
            return Timestamp(t.seconds_ + hh * 3600 + mm * 60 + ss, false);
        }

        static constexpr Timestamp from_epoch_seconds(std::int64_t seconds, bool date_only = false)
        {
            return Timestamp(seconds, date_only);
        }

        /// Accepts `YYYY-MM-DD` or `YYYY-MM-DDTHH:MM:SS` (optional trailing `Z`).
        static Timestamp parse(std::string_view text)
        {
            const std::string s(text);
            int y = 0, hh = 0, mm = 0, ss = 0;
            unsigned mo = 0, d = 0;
            int consumed = 0;
            if (s.size() == 10 && std::sscanf(s.c_str(), "%4d-%2u-%2u%n", &y, &mo, &d, &consumed) == 3 && consumed == 10)
                return from_date(y, mo, d);
            std::string body = s;
            if (!body.empty() && body.back() == 'Z')
                body.pop_back();
            if (body.size() == 19 &&
                std::sscanf(body.c_str(), "%4d-%2u-%2uT%2d:%2d:%2d%n", &y, &mo, &d, &hh, &mm, &ss, &consumed) == 6 &&
                consumed == 19)
                return from_datetime(y, mo, d, hh, mm, ss);
            fail(Errc::InvalidArgument, "unparseable timestamp '" + s + "'");
        }

        std::string to_string() const
        {
            using namespace std::chrono;
            const std::int64_t day_count = floor_div(seconds_, 86400);
            const std::int64_t rem = seconds_ - day_count * 86400;
            const year_month_day ymd{sys_days{days{day_count}}};
            char buf[32];
            if (date_only_)
                std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                              static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
            else
                std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                              static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                              static_cast<int>(rem / 3600), static_cast<int>((rem / 60) % 60),
                              static_cast<int>(rem % 60));
            return buf;
        }

        constexpr std::int64_t epoch_seconds() const noexcept { return seconds_; }
        constexpr bool date_only() const noexcept { return date_only_; }

        // Ordering and equality look at the instant only.
        friend constexpr bool operator==(const Timestamp &a, const Timestamp &b) noexcept
        {
            return a.seconds_ == b.seconds_;
        }
        friend constexpr auto operator<=>(const Timestamp &a, const Timestamp &b) noexcept
        {
            return a.seconds_ <=> b.seconds_;
        }

    private:
        constexpr Timestamp(std::int64_t seconds, bool date_only) : seconds_(seconds), date_only_(date_only) {}

        static constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b)
        {
            return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
        }

        std::int64_t seconds_ = 0;
        bool date_only_ = true;
    };

} // namespace apm
