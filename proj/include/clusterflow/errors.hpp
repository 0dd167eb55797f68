#pragma once

#include <stdexcept>
#include <string>

namespace clusterflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// A complete vector was required but an entry was missing.
class MissingDataError : public Error {
public:
    using Error::Error;
};

/// Two vectors (or a vector and a box) have no dimension in which both are present.
class NoSharedSubspaceError : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

class EmptyDatasetError : public Error {
public:
    using Error::Error;
};

/// Fewer distinct points than requested centroids.
class DegenerateSeedError : public Error {
public:
    using Error::Error;
};

class ArityError : public Error {
public:
    using Error::Error;
};

class UndefinedPreferenceError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class LabelError : public Error {
public:
    using Error::Error;
};

class VersionError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

/// An internal invariant failed. Indicates a bug, not bad input.
class InvariantError : public Error {
public:
    using Error::Error;
};

} // namespace clusterflow
