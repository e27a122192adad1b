#include "intra/error.hpp"

namespace intra {

const char* errc_name(Errc c) noexcept {
    switch (c) {
        case Errc::config: return "config";
        case Errc::data: return "data";
        case Errc::io: return "io";
        case Errc::bad_magic: return "bad_magic";
        case Errc::bad_version: return "bad_version";
        case Errc::truncated: return "truncated";
        case Errc::non_finite: return "non_finite";
        case Errc::internal: return "internal";
    }
    return "unknown";
}

int exit_code(Errc c) noexcept {
    switch (c) {
        case Errc::config: return 2;
        case Errc::internal:
        case Errc::non_finite: return 4;
        default: return 3;
    }
}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace intra
