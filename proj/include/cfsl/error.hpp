#pragma once

#include <stdexcept>
#include <string>

namespace cfsl {

// Root of every error the library raises. Subclasses name the failing stage
// so callers (and the CLI) can report where a run broke.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CFSL_DECLARE_ERROR(Name)                   \
    class Name : public Error {                    \
    public:                                        \
        using Error::Error;                        \
    }

CFSL_DECLARE_ERROR(LoadError);
CFSL_DECLARE_ERROR(IngestionError);
CFSL_DECLARE_ERROR(DecodeError);
CFSL_DECLARE_ERROR(SplitError);
CFSL_DECLARE_ERROR(BatchError);
CFSL_DECLARE_ERROR(ConfigError);
CFSL_DECLARE_ERROR(SamplingError);
CFSL_DECLARE_ERROR(LookupError);
CFSL_DECLARE_ERROR(LifecycleError);
CFSL_DECLARE_ERROR(DivergenceError);
CFSL_DECLARE_ERROR(InferenceError);
CFSL_DECLARE_ERROR(ReplayError);
CFSL_DECLARE_ERROR(EnsembleError);
CFSL_DECLARE_ERROR(CheckpointError);
CFSL_DECLARE_ERROR(VersionError);

#undef CFSL_DECLARE_ERROR

// Raised when a serialized document cannot be parsed; carries the byte
// offset reported by the parser.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace cfsl
