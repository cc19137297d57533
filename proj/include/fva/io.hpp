#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "fva/errors.hpp"
#include "fva/market.hpp"

namespace fva {

[[nodiscard]] inline OptionKind parse_kind(std::string_view s) {
    if (s == "call") return OptionKind::Call;
    if (s == "put") return OptionKind::Put;
    throw FvaError(ErrorCode::InvalidInput, "option kind must be 'call' or 'put'");
}

[[nodiscard]] inline ExerciseStyle parse_style(std::string_view s) {
    if (s == "european") return ExerciseStyle::European;
    if (s == "american") return ExerciseStyle::American;
    throw FvaError(ErrorCode::InvalidInput, "style must be 'european' or 'american'");
}

[[nodiscard]] constexpr std::string_view to_string(OptionKind k) noexcept { return k == OptionKind::Call ? "call" : "put"; }

[[nodiscard]] constexpr std::string_view to_string(ExerciseStyle s) noexcept {
    return s == ExerciseStyle::European ? "european" : "american";
}

/// {"expiry": 2.0, "style": "european", "legs": [{"kind": "call", "strike": 95.0, "qty": 1.0}, ...]}
[[nodiscard]] inline Portfolio portfolio_from_json(const nlohmann::json& j) {
    try {
        const auto style = parse_style(j.value("style", std::string("european")));
        std::vector<OptionLeg> legs;
        for (const auto& leg : j.at("legs")) {
            legs.push_back(OptionLeg{parse_kind(leg.at("kind").get<std::string>()), leg.at("strike").get<double>(),
                                     leg.value("qty", 1.0), style});
        }
        return Portfolio(std::move(legs), j.at("expiry").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw FvaError(ErrorCode::InvalidInput, std::string("portfolio json: ") + e.what());
    }
}

[[nodiscard]] inline Portfolio portfolio_from_json(std::string_view text) {
    try {
        return portfolio_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        throw FvaError(ErrorCode::InvalidInput, std::string("portfolio json: ") + e.what());
    }
}

[[nodiscard]] inline nlohmann::json to_json(const Portfolio& p) {
    nlohmann::json legs = nlohmann::json::array();
    for (const auto& leg : p.legs())
        legs.push_back({{"kind", to_string(leg.kind)}, {"strike", leg.strike}, {"qty", leg.quantity}});
    return {{"expiry", p.expiry()}, {"style", to_string(p.style())}, {"legs", legs}};
}

}  // namespace fva
