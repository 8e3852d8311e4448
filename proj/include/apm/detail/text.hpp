#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace apm::detail
{

    /// Shortest decimal text that parses back to the identical double.
    inline std::string format_double(double value)
    {
        char buf[64];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
        if (ec != std::errc{})
            return "nan";
        return std::string(buf, ptr);
    }

    inline std::string_view trim(std::string_view s)
    {
        const auto first = s.find_first_not_of(" \t\r\n");
        if (first == std::string_view::npos)
            return {};
        const auto last = s.find_last_not_of(" \t\r\n");
        return s.substr(first, last - first + 1);
    }

    inline std::optional<double> parse_double(std::string_view s)
    {
        s = trim(s);
        if (!s.empty() && s.front() == '+')
            s.remove_prefix(1);
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
            return std::nullopt;
        return value;
    }

    inline std::optional<std::int64_t> parse_int(std::string_view s)
    {
        s = trim(s);
        std::int64_t value = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
            return std::nullopt;
        return value;
    }

    inline std::vector<std::string_view> split(std::string_view line, char sep)
    {
        std::vector<std::string_view> out;
        std::size_t begin = 0;
        while (true)
        {
            const auto pos = line.find(sep, begin);
            if (pos == std::string_view::npos)
            {
                out.push_back(line.substr(begin));
                break;
            }
            out.push_back(line.substr(begin, pos - begin));
            begin = pos + 1;
        }
        return out;
    }

    /// Comma separated list with surrounding whitespace removed; empty items dropped.
    inline std::vector<std::string> split_list(std::string_view text)
    {
        std::vector<std::string> out;
        for (auto item : split(text, ','))
        {
            item = trim(item);
            if (!item.empty())
                out.emplace_back(item);
        }
        return out;
    }

} // namespace apm::detail
