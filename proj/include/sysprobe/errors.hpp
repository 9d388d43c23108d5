#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sysprobe {

// Base class for all toolkit errors. Subcommands map these onto exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input data could not be parsed (bad record, bad field count, bad JSON).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Label string outside {entailment, neutral, contradiction}.
class LabelError : public ParseError {
public:
    LabelError(const std::string& what, std::size_t line = 0) : ParseError(what, line) {}
};

class IoError : public Error {
public:
    using Error::Error;
};

class EmptySentence : public Error {
public:
    using Error::Error;
};

class EmptyCorpus : public Error {
public:
    using Error::Error;
};

// Word lists too small for the requested generation.
class InsufficientLexicon : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class MissingLabel : public Error {
public:
    using Error::Error;
};

// Non-finite loss during training; carries the position where it blew up.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::size_t epoch, std::size_t batch)
        : Error(what + " (epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ")"),
          epoch_(epoch),
          batch_(batch) {}
    std::size_t epoch() const { return epoch_; }
    std::size_t batch() const { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

class VersionError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

// Zero-shot test vocabulary found in the training vocabulary.
class LeakageError : public Error {
public:
    using Error::Error;
};

// Requested key (e.g. a test cell) absent from a result.
class KeyError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace sysprobe
