#pragma once

#include <stdexcept>
#include <string>

namespace bvae {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes disagree. The message names the offending dimension.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Filesystem or decode failure; the message carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

/// Caller violated an operation's precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Operation invoked out of order (backward before forward, infer before statistics).
class StateError : public Error {
public:
    using Error::Error;
};

}  // namespace bvae
