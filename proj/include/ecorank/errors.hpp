#pragma once

#include <stdexcept>
#include <string>

namespace ecorank {

// Base class for every error this library raises on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- ingest ---

class MalformedLine : public Error {
public:
    MalformedLine(std::size_t line_no, const std::string& detail)
        : Error("malformed line " + std::to_string(line_no) + ": " + detail),
          line_no(line_no) {}
    std::size_t line_no;
};

class DuplicateId : public Error {
public:
    explicit DuplicateId(const std::string& id)
        : Error("duplicate item id: " + id), id(id) {}
    std::string id;
};

class DuplicateSession : public Error {
public:
    explicit DuplicateSession(const std::string& session_id)
        : Error("duplicate session id: " + session_id), session_id(session_id) {}
    std::string session_id;
};

class UnknownItem : public Error {
public:
    UnknownItem(const std::string& session_id, const std::string& item_id)
        : Error("session " + session_id + " references unknown item: " + item_id),
          session_id(session_id), item_id(item_id) {}
    std::string session_id;
    std::string item_id;
};

class EmptySession : public Error {
public:
    explicit EmptySession(const std::string& session_id)
        : Error("session " + session_id + " has no interactions"),
          session_id(session_id) {}
    std::string session_id;
};

class CatalogTooSmall : public Error {
public:
    CatalogTooSmall(std::size_t have, std::size_t need)
        : Error("catalog has " + std::to_string(have) + " items, need at least " +
                std::to_string(need)) {}
};

// --- scoring ---

class ScorerFailure : public Error {
public:
    explicit ScorerFailure(const std::string& detail)
        : Error("scorer failure: " + detail) {}
};

// --- llm backend ---

class Timeout : public Error {
public:
    explicit Timeout(const std::string& detail) : Error("timeout: " + detail) {}
};

class TransportError : public Error {
public:
    explicit TransportError(const std::string& detail)
        : Error("transport error: " + detail) {}
};

class BadStatus : public Error {
public:
    explicit BadStatus(int code)
        : Error("bad http status: " + std::to_string(code)), code(code) {}
    int code;
};

class EmptyCompletion : public Error {
public:
    EmptyCompletion() : Error("backend returned an empty completion") {}
};

// --- parsing ---

class Unparseable : public Error {
public:
    explicit Unparseable(const std::string& detail)
        : Error("unparseable completion: " + detail) {}
};

class TagNotFound : public Error {
public:
    TagNotFound(const std::string& start_tag, const std::string& end_tag)
        : Error("missing or misordered tags " + start_tag + " / " + end_tag) {}
};

class NoVariants : public Error {
public:
    NoVariants() : Error("no usable prompt variants in completion") {}
};

class NoReasons : public Error {
public:
    NoReasons() : Error("no failure hypotheses in completion") {}
};

class MissingPlaceholders : public Error {
public:
    explicit MissingPlaceholders(const std::string& text)
        : Error("prompt lost its {session}/{candidates} placeholders: " + text) {}
};

// --- optimizer / cli ---

class Aborted : public Error {
public:
    explicit Aborted(int trial)
        : Error("optimization aborted at trial " + std::to_string(trial) +
                ": backend failed every session for 3 consecutive trials"),
          trial(trial) {}
    int trial;
};

class MissingArtifact : public Error {
public:
    explicit MissingArtifact(const std::string& path)
        : Error("missing run artifact: " + path), path(path) {}
    std::string path;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& detail)
        : Error("config error: " + detail) {}
};

}  // namespace ecorank
