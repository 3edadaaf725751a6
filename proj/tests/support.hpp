#pragma once

#include "mnemo/mnemo.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace mnemo::testing {

// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = fs::temp_directory_path() /
                ("mnemo-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline Widget widget(std::string id, std::string role, std::string label, BoundingBox box) {
    return Widget{std::move(id), std::move(role), std::move(label), box};
}

inline Observation screen(std::string id) { return Observation{std::move(id), {}, std::nullopt}; }

inline Action click(std::string value, double x = 0.5, double y = 0.5) {
    Action a;
    a.kind = ActionKind::click;
    a.value = std::move(value);
    a.position = Point{x, y};
    return a;
}

// A contiguous chain of screens s0 -> s1 -> ... with one click per step.
inline Trajectory chain(std::string id, std::string goal, std::size_t steps, bool success = false,
                        const std::string& prefix = "s") {
    Trajectory t;
    t.id = std::move(id);
    t.goal.text = std::move(goal);
    t.success = success;
    for (std::size_t k = 0; k < steps; ++k) {
        t.transitions.push_back(Transition{screen(prefix + std::to_string(k)), click("b" + std::to_string(k)),
                                           screen(prefix + std::to_string(k + 1)), k + 1});
    }
    return t;
}

inline std::string random_word(std::mt19937_64& rng) {
    static const char* words[] = {"open", "settings", "battery", "saver", "gmail", "download", "upload",
                                  "login", "order", "history", "flight", "book", "search", "cart",
                                  "reminder", "message", "calendar", "photo", "share", "wifi", "map"};
    return words[rng() % (sizeof(words) / sizeof(words[0]))];
}

inline std::string random_sentence(std::mt19937_64& rng, std::size_t min_words = 3, std::size_t max_words = 8) {
    const std::size_t n = min_words + rng() % (max_words - min_words + 1);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s.push_back(' ');
        s += random_word(rng);
    }
    return s;
}

} // namespace mnemo::testing
