#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace gridloop::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

/// Level comes from GRIDLOOP_LOG (error|info|debug); default info.
inline Level threshold() {
    static Level lvl = [] {
        const char* env = std::getenv("GRIDLOOP_LOG");
        if (!env) return Level::Info;
        if (std::strcmp(env, "error") == 0) return Level::Error;
        if (std::strcmp(env, "debug") == 0) return Level::Debug;
        return Level::Info;
    }();
    return lvl;
}

inline void write(Level lvl, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(threshold())) return;
    const char* tag = lvl == Level::Error ? "error" : lvl == Level::Info ? "info" : "debug";
    std::fprintf(stderr, "[gridloop %s] %s\n", tag, msg.c_str());
}

inline void error(const std::string& msg) { write(Level::Error, msg); }
inline void info(const std::string& msg) { write(Level::Info, msg); }
inline void debug(const std::string& msg) { write(Level::Debug, msg); }

} // namespace gridloop::log
