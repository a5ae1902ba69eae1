#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ocdgr
{

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Vector or matrix shapes that do not fit together.
class DimensionError : public Error
{
public:
    using Error::Error;
};

/// A value outside the domain of the operation (probability > 1, pixel > 255, ...).
class DomainError : public Error
{
public:
    using Error::Error;
};

class EmptyBatchError : public Error
{
public:
    using Error::Error;
};

class ScheduleError : public Error
{
public:
    using Error::Error;
};

/// Exact enumeration requested for a model whose smaller layer is too wide.
class InfeasibleSizeError : public Error
{
public:
    using Error::Error;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

class IoError : public Error
{
public:
    using Error::Error;
};

/// Malformed input file. Carries the byte offset (binary formats) or the
/// 1-based line number (text formats) where parsing failed.
class FormatError : public Error
{
public:
    FormatError(const std::string& what, std::size_t position)
        : Error(what), position_(position)
    {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

}  // namespace ocdgr
