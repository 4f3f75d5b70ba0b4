#include <cstdlib>
#include <cstring>
#include <string>

#include "dcnet/errors.hpp"
#include "kernels_internal.hpp"

namespace dcnet::kernels {

const char* level_name(Level lvl) {
    switch (lvl) {
        case Level::scalar: return "scalar";
        case Level::avx2: return "avx2";
        case Level::neon: return "neon";
    }
    return "?";
}

bool available(Level lvl) {
    switch (lvl) {
        case Level::scalar:
            return true;
        case Level::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Level::neon:
#if defined(__aarch64__)
            return true;  // mandatory on AArch64
#elif defined(__ARM_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

Level best_available() {
    if (available(Level::avx2)) return Level::avx2;
    if (available(Level::neon)) return Level::neon;
    return Level::scalar;
}

namespace {

Level initial_level() {
    const char* env = std::getenv("DCNET_SIMD");
    if (env == nullptr || std::strcmp(env, "") == 0 || std::strcmp(env, "auto") == 0)
        return best_available();
    for (Level lvl : {Level::scalar, Level::avx2, Level::neon}) {
        if (std::strcmp(env, level_name(lvl)) == 0) {
            if (!available(lvl))
                throw ConfigError(std::string("DCNET_SIMD requests unavailable level: ") + env);
            return lvl;
        }
    }
    throw ConfigError(std::string("unknown DCNET_SIMD value: ") + env);
}

Level& active_slot() {
    static Level lvl = initial_level();  // lazy so a bad env var throws catchably
    return lvl;
}

}  // namespace

Level active() { return active_slot(); }

void set_active(Level lvl) {
    if (!available(lvl))
        throw ConfigError(std::string("kernel level not available on this machine: ") +
                          level_name(lvl));
    active_slot() = lvl;
}

template <typename T>
static const Ops<T>& table_for(Level lvl);

template <>
const Ops<float>& table_for<float>(Level lvl) {
    switch (lvl) {
        case Level::scalar:
            return detail::scalar_ops_f32();
        case Level::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return detail::avx2_ops_f32();
#else
            break;
#endif
        case Level::neon:
#if defined(__aarch64__) || defined(__ARM_NEON)
            return detail::neon_ops_f32();
#else
            break;
#endif
    }
    throw ConfigError(std::string("kernel level not compiled in: ") + level_name(lvl));
}

template <>
const Ops<double>& table_for<double>(Level lvl) {
    switch (lvl) {
        case Level::scalar:
            return detail::scalar_ops_f64();
        case Level::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return detail::avx2_ops_f64();
#else
            break;
#endif
        case Level::neon:
#if defined(__aarch64__) || defined(__ARM_NEON)
            return detail::neon_ops_f64();
#else
            break;
#endif
    }
    throw ConfigError(std::string("kernel level not compiled in: ") + level_name(lvl));
}

template <typename T>
const Ops<T>& ops(Level lvl) {
    if (!available(lvl))
        throw ConfigError(std::string("kernel level not available on this machine: ") +
                          level_name(lvl));
    return table_for<T>(lvl);
}

template const Ops<float>& ops<float>(Level);
template const Ops<double>& ops<double>(Level);

}  // namespace dcnet::kernels
