#pragma once

#include <stdexcept>
#include <string>

namespace nidsllm {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dataset or model columns do not match what an operation expects.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Malformed input data (unreadable CSV rows, empty tables).
class DataError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class HttpStatusError : public TransportError {
public:
    HttpStatusError(int status, std::string body_excerpt)
        : TransportError("HTTP status " + std::to_string(status) + ": " + body_excerpt),
          status_(status),
          body_excerpt_(std::move(body_excerpt)) {}

    int status() const noexcept { return status_; }
    const std::string& body_excerpt() const noexcept { return body_excerpt_; }

private:
    int status_;
    std::string body_excerpt_;
};

class ReplayMissError : public Error {
public:
    explicit ReplayMissError(std::string digest)
        : Error("no recorded response for request digest " + digest), digest_(std::move(digest)) {}

    const std::string& digest() const noexcept { return digest_; }

private:
    std::string digest_;
};

}  // namespace nidsllm
