#pragma once

#include <stdexcept>
#include <string>

namespace wavewalk {

//! A point handed to a query lies outside (or on the boundary of) the domain
class DomainError : public std::domain_error
{
  public:
    using std::domain_error::domain_error;
};

//! Point and domain dimensions disagree
class DimensionMismatch : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

//! A sampler hit its step or jump budget before reaching the boundary
class TruncationError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//! Boundary data returned a value larger in magnitude than its declared bound
class BoundViolation : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//! Rejected configuration or query (checked before any sampling starts)
class ConfigError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace wavewalk
