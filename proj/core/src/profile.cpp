#include "choiceleak/profile.hpp"

#include <array>

#include "json_codec.hpp"

namespace choiceleak {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(std::string_view s, const std::array<E, N>& values) {
  for (E v : values) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

constexpr std::array kOses{Os::Windows, Os::Linux, Os::Mac};
constexpr std::array kPlatforms{Platform::Desktop, Platform::Laptop};
constexpr std::array kConditions{TrafficCondition::Morning, TrafficCondition::Noon, TrafficCondition::Night};
constexpr std::array kConnections{Connection::Wired, Connection::Wireless};
constexpr std::array kBrowsers{Browser::Chrome, Browser::Firefox};

}  // namespace

std::string_view to_string(Os v) noexcept {
  switch (v) {
    case Os::Windows: return "Windows";
    case Os::Linux: return "Linux";
    case Os::Mac: return "Mac";
  }
  return "?";
}

std::string_view to_string(Platform v) noexcept { return v == Platform::Desktop ? "Desktop" : "Laptop"; }

std::string_view to_string(TrafficCondition v) noexcept {
  switch (v) {
    case TrafficCondition::Morning: return "Morning";
    case TrafficCondition::Noon: return "Noon";
    case TrafficCondition::Night: return "Night";
  }
  return "?";
}

std::string_view to_string(Connection v) noexcept { return v == Connection::Wired ? "Wired" : "Wireless"; }
std::string_view to_string(Browser v) noexcept { return v == Browser::Chrome ? "Chrome" : "Firefox"; }

std::optional<Os> parse_os(std::string_view s) { return lookup(s, kOses); }
std::optional<Platform> parse_platform(std::string_view s) { return lookup(s, kPlatforms); }
std::optional<TrafficCondition> parse_traffic_condition(std::string_view s) { return lookup(s, kConditions); }
std::optional<Connection> parse_connection(std::string_view s) { return lookup(s, kConnections); }
std::optional<Browser> parse_browser(std::string_view s) { return lookup(s, kBrowsers); }

std::string profile_label(const OperationalProfile& p) {
  std::string out;
  for (std::string_view part : {to_string(p.os), to_string(p.platform), to_string(p.traffic_condition),
                                to_string(p.connection), to_string(p.browser)}) {
    if (!out.empty()) out += '_';
    out += part;
  }
  return out;
}

std::map<std::string, std::string> undisclosed_behavior() {
  std::map<std::string, std::string> m;
  for (const char* key : {"age_group", "gender", "political_alignment", "state_of_mind"})
    m.emplace(key, std::string(kUndisclosed));
  return m;
}

std::vector<OperationalProfile> default_profiles() {
  std::vector<OperationalProfile> out;
  out.reserve(kOses.size() * kPlatforms.size() * kConditions.size() * kConnections.size() * kBrowsers.size());
  for (Os os : kOses)
    for (Platform pf : kPlatforms)
      for (TrafficCondition tc : kConditions)
        for (Connection cn : kConnections)
          for (Browser br : kBrowsers) out.push_back({os, pf, tc, cn, br, undisclosed_behavior()});
  return out;
}

namespace detail {

ojson profile_to_json(const OperationalProfile& p) {
  ojson j;
  j["os"] = to_string(p.os);
  j["platform"] = to_string(p.platform);
  j["traffic_condition"] = to_string(p.traffic_condition);
  j["connection"] = to_string(p.connection);
  j["browser"] = to_string(p.browser);
  j["behavioral"] = ojson::object();
  for (const auto& [k, v] : p.behavioral) j["behavioral"][k] = v;
  return j;
}

namespace {

template <typename E>
E parse_enum(const ojson& j, const char* key, std::optional<E> (*parse)(std::string_view)) {
  const std::string raw = require_string(j, key, "profile");
  auto v = parse(raw);
  if (!v) throw Error(Errc::ParseError, std::string("profile: unknown ") + key + " '" + raw + "'");
  return *v;
}

}  // namespace

OperationalProfile profile_from_json(const ojson& j) {
  OperationalProfile p;
  p.os = parse_enum<Os>(j, "os", parse_os);
  p.platform = parse_enum<Platform>(j, "platform", parse_platform);
  p.traffic_condition = parse_enum<TrafficCondition>(j, "traffic_condition", parse_traffic_condition);
  p.connection = parse_enum<Connection>(j, "connection", parse_connection);
  p.browser = parse_enum<Browser>(j, "browser", parse_browser);
  if (auto it = j.find("behavioral"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Error(Errc::ParseError, "profile: 'behavioral' must be an object");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_string()) throw Error(Errc::ParseError, "profile: behavioral '" + k + "' must be a string");
      p.behavioral.emplace(k, v.get<std::string>());
    }
  }
  return p;
}

}  // namespace detail

}  // namespace choiceleak
