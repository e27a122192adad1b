#pragma once

#include <stdexcept>
#include <string>

namespace intra {

enum class Errc {
    config,       // bad or missing configuration
    data,         // malformed or inconsistent input data
    io,           // file could not be opened / written
    bad_magic,    // binary file has the wrong magic
    bad_version,  // binary file has an unsupported version
    truncated,    // binary file ends early
    non_finite,   // NaN or Inf where finite values are required
    internal      // invariant violation
};

const char* errc_name(Errc c) noexcept;

// Process exit code for the CLI: 2 config, 3 data, 4 internal.
int exit_code(Errc c) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

inline void require(bool ok, Errc code, const std::string& what) {
    if (!ok) fail(code, what);
}

}  // namespace intra
