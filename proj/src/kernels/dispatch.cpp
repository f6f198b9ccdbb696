#include "capspoe/kernels.hpp"

#include <cstdlib>
#include <string>

#include "capspoe/error.hpp"

namespace capspoe::kernels {

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif

namespace {

Backend parse_backend(const std::string& name) {
    if (name == "scalar") return Backend::Scalar;
    if (name == "avx2") return Backend::Avx2;
    if (name == "auto") return backend_available(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar;
    throw ConfigError("unknown kernel backend '" + name + "' (expected scalar|avx2|auto)");
}

Backend initial_backend() {
    if (const char* env = std::getenv("CAPSPOE_KERNELS")) {
        Backend b = parse_backend(env);
        if (!backend_available(b))
            throw ConfigError(std::string("CAPSPOE_KERNELS requests unavailable backend ") +
                              backend_name(b));
        return b;
    }
    return backend_available(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar;
}

Backend& current() {
    static Backend b = initial_backend();
    return b;
}

} // namespace

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
    }
    return "?";
}

bool backend_available(Backend b) {
    switch (b) {
        case Backend::Scalar: return true;
        case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") != 0;
#else
            return false;
#endif
    }
    return false;
}

Backend active_backend() { return current(); }

void set_backend(Backend b) {
    if (!backend_available(b))
        throw ConfigError(std::string("kernel backend unavailable on this CPU: ") +
                          backend_name(b));
    current() = b;
}

void set_backend_by_name(const char* name) { set_backend(parse_backend(name)); }

BackendScope::BackendScope(Backend b) : saved(active_backend()) { set_backend(b); }
BackendScope::~BackendScope() { current() = saved; }

const KernelTable& table_for(Backend b) {
    switch (b) {
        case Backend::Scalar: return scalar_table();
        case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return avx2_table();
#else
            break;
#endif
    }
    throw ConfigError("kernel backend not compiled in");
}

const KernelTable& table() { return table_for(current()); }

} // namespace capspoe::kernels
