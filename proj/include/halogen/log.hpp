#pragma once

#include <iostream>
#include <mutex>
#include <string_view>

#include <json.hpp>

namespace halogen {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

inline std::string_view level_name(LogLevel level) {
    switch (level) {
        case LogLevel::Debug: return "debug";
        case LogLevel::Info: return "info";
        case LogLevel::Warn: return "warn";
        case LogLevel::Error: return "error";
    }
    return "info";
}

/// Structured logger: one JSON object per line, tagged with the pipeline
/// stage that emitted it. Defaults to stderr so stage artifacts on stdout
/// and disk stay clean.
class Logger {
public:
    static Logger& global() {
        static Logger instance;
        return instance;
    }

    void set_level(LogLevel level) {
        std::lock_guard lock(mu_);
        level_ = level;
    }

    /// Sink is not owned; pass nullptr to silence logging entirely.
    void set_sink(std::ostream* sink) {
        std::lock_guard lock(mu_);
        sink_ = sink;
    }

    void log(LogLevel level, std::string_view stage, std::string_view event,
             nlohmann::json fields = nlohmann::json::object()) {
        std::lock_guard lock(mu_);
        if (sink_ == nullptr || level < level_) return;
        fields["level"] = level_name(level);
        fields["stage"] = stage;
        fields["event"] = event;
        (*sink_) << fields.dump() << '\n';
        sink_->flush();
    }

private:
    Logger() = default;
    std::mutex mu_;
    std::ostream* sink_ = &std::cerr;
    LogLevel level_ = LogLevel::Info;
};

inline void log_debug(std::string_view stage, std::string_view event,
                      nlohmann::json fields = nlohmann::json::object()) {
    Logger::global().log(LogLevel::Debug, stage, event, std::move(fields));
}

inline void log_info(std::string_view stage, std::string_view event,
                     nlohmann::json fields = nlohmann::json::object()) {
    Logger::global().log(LogLevel::Info, stage, event, std::move(fields));
}

inline void log_warn(std::string_view stage, std::string_view event,
                     nlohmann::json fields = nlohmann::json::object()) {
    Logger::global().log(LogLevel::Warn, stage, event, std::move(fields));
}

inline void log_error(std::string_view stage, std::string_view event,
                      nlohmann::json fields = nlohmann::json::object()) {
    Logger::global().log(LogLevel::Error, stage, event, std::move(fields));
}

} // namespace halogen
