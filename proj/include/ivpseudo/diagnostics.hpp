#pragma once

#include <string>
#include <vector>

namespace ivpseudo {

struct Warning {
    std::string stage;
    std::string message;
};

// Non-fatal conditions (floored variances, non-converged fits, empty sets).
// Functions that can warn take an optional `Diagnostics*`; nullptr discards.
class Diagnostics {
public:
    void warn(std::string stage, std::string message) {
        items_.push_back({std::move(stage), std::move(message)});
    }
    const std::vector<Warning>& items() const noexcept { return items_; }
    bool empty() const noexcept { return items_.empty(); }
    bool contains(const std::string& needle) const {
        for (const auto& w : items_) {
            if (w.message.find(needle) != std::string::npos) return true;
        }
        return false;
    }
    void append(const Diagnostics& other) {
        items_.insert(items_.end(), other.items_.begin(), other.items_.end());
    }

private:
    std::vector<Warning> items_;
};

inline void warn_to(Diagnostics* diag, std::string stage, std::string message) {
    if (diag != nullptr) diag->warn(std::move(stage), std::move(message));
}

}  // namespace ivpseudo
