#pragma once

#include <stdexcept>
#include <string>

namespace emokin {

/// Base of every error thrown by the library. what() always starts with the
/// concrete error name so CLI output and logs can be grepped by kind.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define EMOKIN_DEFINE_ERROR(Name)                                     \
    struct Name : Error {                                             \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
    }

// telemetry
EMOKIN_DEFINE_ERROR(EmptyInput);
EMOKIN_DEFINE_ERROR(NonMonotonicTime);
EMOKIN_DEFINE_ERROR(MalformedRow);
EMOKIN_DEFINE_ERROR(IoFailure);
EMOKIN_DEFINE_ERROR(SchemaViolation);

// preprocess
EMOKIN_DEFINE_ERROR(DegenerateSegment);
EMOKIN_DEFINE_ERROR(TooShort);

// dtw
EMOKIN_DEFINE_ERROR(EmptySequence);
EMOKIN_DEFINE_ERROR(ChannelMismatch);
EMOKIN_DEFINE_ERROR(InsufficientClassData);

// features
EMOKIN_DEFINE_ERROR(DegenerateData);

// cnn
EMOKIN_DEFINE_ERROR(ShapeMismatch);
EMOKIN_DEFINE_ERROR(EmptyDataset);
EMOKIN_DEFINE_ERROR(LabelOutsideClassSet);
EMOKIN_DEFINE_ERROR(VersionMismatch);
EMOKIN_DEFINE_ERROR(ChecksumMismatch);

// synth
EMOKIN_DEFINE_ERROR(OutOfWorkspace);
EMOKIN_DEFINE_ERROR(IkDivergence);

// eval (evaluate() reuses EmptyInput for an empty prediction list)
EMOKIN_DEFINE_ERROR(InsufficientData);

#undef EMOKIN_DEFINE_ERROR

}  // namespace emokin
