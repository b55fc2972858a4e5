#pragma once

#include <stdexcept>
#include <string>

namespace pumpwatch {

// Base class for everything this library throws on bad input or bad state.
// The CLI maps these to exit code 2; programming errors (assert-level) are
// left to std::logic_error and friends.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct MalformedRow : Error {
    MalformedRow(std::size_t row, const std::string& what)
        : Error("row " + std::to_string(row) + ": " + what), row_number(row) {}
    std::size_t row_number;
};

struct DuplicateTimestamp : Error {
    using Error::Error;
};

struct EventOffGrid : Error {
    using Error::Error;
};

struct PanelTooShort : Error {
    using Error::Error;
};

struct WindowTooLarge : Error {
    using Error::Error;
};

struct InsufficientHistory : Error {
    using Error::Error;
};

struct TooFewSamples : Error {
    using Error::Error;
};

struct ShapeMismatch : Error {
    using Error::Error;
};

struct NonScalarLoss : Error {
    using Error::Error;
};

struct MissingGrad : Error {
    using Error::Error;
};

struct BadEdgeIndex : Error {
    using Error::Error;
};

struct EmptyBatch : Error {
    using Error::Error;
};

struct NoPositivesInTrain : Error {
    using Error::Error;
};

struct NoPositives : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct ConfigInfeasible : Error {
    using Error::Error;
};

struct HttpError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct CheckpointError : Error {
    using Error::Error;
};

}  // namespace pumpwatch
