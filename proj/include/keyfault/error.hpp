#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace keyfault {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingKey : public Error {
public:
    explicit MissingKey(char key)
        : Error(std::string("layout has no key for '") + key + "'"), key_(key) {}
    char key() const noexcept { return key_; }

private:
    char key_;
};

/// Malformed input; `line()` is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyCandidateSet : public Error {
public:
    EmptyCandidateSet() : Error("candidate set is empty") {}
};

/// Invalid event in an input stream; `offset()` is the 0-based event index.
class StreamError : public Error {
public:
    StreamError(std::size_t offset, const std::string& what)
        : Error("event " + std::to_string(offset) + ": " + what), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class NoInput : public Error {
public:
    NoInput() : Error("no input keystrokes") {}
};

class NoDuration : public Error {
public:
    NoDuration() : Error("session has zero duration") {}
};

class NotSubmitted : public Error {
public:
    NotSubmitted() : Error("log contains no submit event") {}
};

class NoDictionary : public Error {
public:
    NoDictionary() : Error("dictionary is empty") {}
};

class InsufficientPhrases : public Error {
public:
    InsufficientPhrases(std::size_t have, std::size_t need)
        : Error("phrase pool has " + std::to_string(have) + " phrases, need " +
                std::to_string(need)) {}
};

class PartitionFailed : public Error {
public:
    PartitionFailed() : Error("could not balance phrase-set lengths") {}
};

}  // namespace keyfault
