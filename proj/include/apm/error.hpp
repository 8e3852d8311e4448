#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace apm
{

    /// Every failure the library reports carries one of these codes.
    enum class Errc
    {
        // data / input
        FileNotFound,
        MalformedRow,
        InvariantViolation,
        DuplicateTimestamp,
        EmptyIntersection,
        IndexOutOfRange,
        DataGap,
        InsufficientHistory,
        TooFewRecords,
        // numerics
        WindowTooShort,
        SeriesTooShort,
        DegenerateRange,
        EmptyDataset,
        DimensionMismatch,
        TooFewObservations,
        NoExcessReturn,
        SingularCovariance,
        // agents
        MissingAsset,
        ModelMissing,
        MissingPrice,
        // configuration
        ConfigError,
        InvalidArgument,
    };

    inline std::string_view errc_name(Errc code) noexcept
    {
        switch (code)
        {
        case Errc::FileNotFound: return "FileNotFound";
        case Errc::MalformedRow: return "MalformedRow";
        case Errc::InvariantViolation: return "InvariantViolation";
        case Errc::DuplicateTimestamp: return "DuplicateTimestamp";
        case Errc::EmptyIntersection: return "EmptyIntersection";
        case Errc::IndexOutOfRange: return "IndexOutOfRange";
        case Errc::DataGap: return "DataGap";
        case Errc::InsufficientHistory: return "InsufficientHistory";
        case Errc::TooFewRecords: return "TooFewRecords";
        case Errc::WindowTooShort: return "WindowTooShort";
        case Errc::SeriesTooShort: return "SeriesTooShort";
        case Errc::DegenerateRange: return "DegenerateRange";
        case Errc::EmptyDataset: return "EmptyDataset";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::TooFewObservations: return "TooFewObservations";
        case Errc::NoExcessReturn: return "NoExcessReturn";
        case Errc::SingularCovariance: return "SingularCovariance";
        case Errc::MissingAsset: return "MissingAsset";
        case Errc::ModelMissing: return "ModelMissing";
        case Errc::MissingPrice: return "MissingPrice";
        case Errc::ConfigError: return "ConfigError";
        case Errc::InvalidArgument: return "InvalidArgument";
        }
        return "Unknown";
    }

    /// Failures caused by input data (files, series contents) as opposed to
    /// configuration or programming errors. The CLI maps these to exit code 3.
    inline bool is_data_error(Errc code) noexcept
    {
        switch (code)
        {
        case Errc::FileNotFound:
        case Errc::MalformedRow:
        case Errc::InvariantViolation:
        case Errc::DuplicateTimestamp:
        case Errc::EmptyIntersection:
        case Errc::IndexOutOfRange:
        case Errc::DataGap:
        case Errc::InsufficientHistory:
        case Errc::TooFewRecords:
        case Errc::SeriesTooShort:
        case Errc::TooFewObservations:
            return true;
        default:
            return false;
        }
    }

    class Error : public std::runtime_error
    {
    public:
        Error(Errc code, const std::string &what)
            : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code)
        {
        }

        Errc code() const noexcept { return code_; }

    private:
        Errc code_;
    };

    [[noreturn]] inline void fail(Errc code, const std::string &what)
    {
        throw Error(code, what);
    }

} // namespace apm
