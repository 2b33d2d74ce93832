#pragma once

#include <stdexcept>
#include <string>

namespace sidequest {

// Base for every error the library throws. Callers that only care about
// "something in sidequest failed" can catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SIDEQUEST_DEFINE_ERROR(Name)              \
    class Name : public ::sidequest::Error {      \
    public:                                       \
        using ::sidequest::Error::Error;          \
    }

SIDEQUEST_DEFINE_ERROR(CursorIdGap);
SIDEQUEST_DEFINE_ERROR(EmptyCorpus);
SIDEQUEST_DEFINE_ERROR(UnknownDocument);
SIDEQUEST_DEFINE_ERROR(ChunkOutOfRange);
SIDEQUEST_DEFINE_ERROR(PolicyUnavailable);
SIDEQUEST_DEFINE_ERROR(PolicyTimeout);
SIDEQUEST_DEFINE_ERROR(InvalidMaskTarget);
SIDEQUEST_DEFINE_ERROR(SampleRejected);
SIDEQUEST_DEFINE_ERROR(ReplayUnsupported);
SIDEQUEST_DEFINE_ERROR(FormatError);
SIDEQUEST_DEFINE_ERROR(ConfigError);

#undef SIDEQUEST_DEFINE_ERROR

} // namespace sidequest
