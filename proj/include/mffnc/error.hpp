#pragma once

#include <stdexcept>
#include <string>

namespace mffnc {

// Every error raised by the library derives from Error. The CLI maps the
// concrete type onto a process exit code (see exit_code_for).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration values or contradictory options.
class ConfigError : public Error {
public:
    using Error::Error;
};

// API misuse: wrong argument ranges, repeated backward, missing gradients.
class UsageError : public Error {
public:
    using Error::Error;
};

// Shape mismatch between tensor operands.
class DimensionError : public UsageError {
public:
    using UsageError::UsageError;
};

// Malformed input data (corpus, embeddings, checkpoint contents).
class FormatError : public Error {
public:
    using Error::Error;
};

// Missing, unreadable or unwritable files.
class IoError : public Error {
public:
    using Error::Error;
};

// NaN or Inf produced by a forward computation.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Sentiment scoring failed for one tweet during feature extraction.
class FeatureError : public Error {
public:
    using Error::Error;
};

}  // namespace mffnc
