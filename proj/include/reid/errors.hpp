#pragma once

#include <stdexcept>
#include <string>

namespace reid {

// Error taxonomy shared by the library and the CLI. The CLI maps kinds to
// distinct process exit codes, so new kinds need a mapping there too.
class Error : public std::runtime_error {
public:
    enum class Kind {
        Config,     // invalid configuration value or unknown key
        Io,         // missing/unreadable/unwritable file
        Parse,      // malformed file content
        Shape,      // dimensionality mismatch
        Split,      // dataset split preconditions violated
        Fitting,    // insufficient data for a metric fit
        Numerical,  // singular/ill-conditioned linear algebra
        Protocol,   // evaluation protocol violated (e.g. empty gallery)
        Train,      // training preconditions violated
        Usage       // API misuse (stale cache, misaligned inputs)
    };

    Error(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const { return kind_; }

    const char* kind_name() const {
        switch (kind_) {
            case Kind::Config: return "config";
            case Kind::Io: return "io";
            case Kind::Parse: return "parse";
            case Kind::Shape: return "shape";
            case Kind::Split: return "split";
            case Kind::Fitting: return "fitting";
            case Kind::Numerical: return "numerical";
            case Kind::Protocol: return "protocol";
            case Kind::Train: return "train";
            case Kind::Usage: return "usage";
        }
        return "unknown";
    }

private:
    Kind kind_;
};

#define REID_DEFINE_ERROR(NAME, KIND)                       \
    class NAME : public Error {                             \
    public:                                                 \
        explicit NAME(const std::string& message)           \
            : Error(Error::Kind::KIND, message) {}          \
    }

REID_DEFINE_ERROR(ConfigError, Config);
REID_DEFINE_ERROR(IoError, Io);
REID_DEFINE_ERROR(ParseError, Parse);
REID_DEFINE_ERROR(ShapeError, Shape);
REID_DEFINE_ERROR(SplitError, Split);
REID_DEFINE_ERROR(FittingError, Fitting);
REID_DEFINE_ERROR(NumericalError, Numerical);
REID_DEFINE_ERROR(ProtocolError, Protocol);
REID_DEFINE_ERROR(TrainError, Train);
REID_DEFINE_ERROR(UsageError, Usage);

#undef REID_DEFINE_ERROR

}  // namespace reid
