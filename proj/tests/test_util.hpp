#pragma once

#include <string>
#include <utility>

// true when f() throws E and the message contains `needle`
template <typename E, typename F>
bool throws_with(F&& f, const std::string& needle) {
    try {
        std::forward<F>(f)();
    } catch (const E& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    } catch (...) {
        return false;
    }
    return false;
}
