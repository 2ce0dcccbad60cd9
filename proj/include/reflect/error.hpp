#pragma once

#include <stdexcept>
#include <string>

namespace reflect {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument values (non-positive β, inverted β range, unknown policy, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Shape disagreement between operands, or an image too small for the stencils.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Unreadable, undecodable or unwritable image data.
class IoError : public Error {
public:
    using Error::Error;
};

/// A solve produced a non-finite objective.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace reflect
