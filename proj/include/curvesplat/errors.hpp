#pragma once

#include <stdexcept>
#include <string>

namespace curvesplat {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateTangent : Error {
    using Error::Error;
};
struct DegenerateCurve : Error {
    using Error::Error;
};
struct InvalidSplitParameter : Error {
    using Error::Error;
};
struct InsufficientPoints : Error {
    using Error::Error;
};
struct ShapeMismatch : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct NonFiniteInput : Error {
    using Error::Error;
};
struct StaleState : Error {
    using Error::Error;
};
struct EmptyCloud : Error {
    using Error::Error;
};
struct EmptyDataset : Error {
    using Error::Error;
};
struct DegenerateBounds : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace curvesplat
