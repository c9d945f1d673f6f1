#pragma once

#include <stdexcept>
#include <string>

namespace rtsr {

// Error categories map onto the CLI exit codes (1 usage, 2 data, 3 codec).
enum class ErrorKind { usage, data, codec_unavailable };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class CodecUnavailable : public Error {
public:
    explicit CodecUnavailable(const std::string& what) : Error(ErrorKind::codec_unavailable, what) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage: return 1;
        case ErrorKind::data: return 2;
        case ErrorKind::codec_unavailable: return 3;
    }
    return 2;
}

}  // namespace rtsr
