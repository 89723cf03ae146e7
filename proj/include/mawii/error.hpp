#pragma once

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>

namespace mawii {

// Bad or inconsistent input data (CLI exit code 2).
class input_error : public std::runtime_error
{
public:
    explicit input_error(const std::string& what, nlohmann::json detail = nlohmann::json::object())
        : std::runtime_error(what), detail_(std::move(detail))
    {}

    const nlohmann::json& detail() const noexcept { return detail_; }

private:
    nlohmann::json detail_;
};

// Numerical failure while estimating (CLI exit code 1).
class estimation_error : public std::runtime_error
{
public:
    explicit estimation_error(const std::string& what, nlohmann::json detail = nlohmann::json::object())
        : std::runtime_error(what), detail_(std::move(detail))
    {}

    const nlohmann::json& detail() const noexcept { return detail_; }

private:
    nlohmann::json detail_;
};

} // namespace mawii
