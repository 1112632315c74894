#pragma once

#include <stdexcept>
#include <string>

namespace ocrpost {

// Base class for everything this library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Utf8Error : Error {
    using Error::Error;
};

// Corpus / data-format errors.
struct MalformedRecord : Error {
    size_t line = 0;
    MalformedRecord(const std::string& msg, size_t line_no)
        : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

struct EmptyReference : Error {
    using Error::Error;
};

struct LengthMismatch : Error {
    using Error::Error;
};

struct NotAnError : Error {
    using Error::Error;
};

struct EmptyMatrix : Error {
    using Error::Error;
};

struct InvalidRule : Error {
    using Error::Error;
};

struct DegenerateData : Error {
    using Error::Error;
};

struct GapInGroups : Error {
    using Error::Error;
};

// Tensor / model errors.
struct ShapeMismatch : Error {
    using Error::Error;
};

struct NonFiniteValue : Error {
    using Error::Error;
};

struct NotScalar : Error {
    using Error::Error;
};

struct EmptyInput : Error {
    using Error::Error;
};

struct CheckpointError : Error {
    using Error::Error;
};

}  // namespace ocrpost
