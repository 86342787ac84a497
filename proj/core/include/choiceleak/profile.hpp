#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace choiceleak {

enum class Os { Windows, Linux, Mac };
enum class Platform { Desktop, Laptop };
enum class TrafficCondition { Morning, Noon, Night };
enum class Connection { Wired, Wireless };
enum class Browser { Chrome, Firefox };

inline constexpr std::string_view kUndisclosed = "Undisclosed";

/// Capture conditions of a viewing session. Behavioral attributes are carried
/// as free-form metadata (age_group, gender, political_alignment,
/// state_of_mind) and never interpreted.
struct OperationalProfile {
  Os os = Os::Windows;
  Platform platform = Platform::Desktop;
  TrafficCondition traffic_condition = TrafficCondition::Morning;
  Connection connection = Connection::Wired;
  Browser browser = Browser::Chrome;
  std::map<std::string, std::string> behavioral;

  bool operator==(const OperationalProfile&) const = default;
};

std::string_view to_string(Os v) noexcept;
std::string_view to_string(Platform v) noexcept;
std::string_view to_string(TrafficCondition v) noexcept;
std::string_view to_string(Connection v) noexcept;
std::string_view to_string(Browser v) noexcept;

std::optional<Os> parse_os(std::string_view s);
std::optional<Platform> parse_platform(std::string_view s);
std::optional<TrafficCondition> parse_traffic_condition(std::string_view s);
std::optional<Connection> parse_connection(std::string_view s);
std::optional<Browser> parse_browser(std::string_view s);

/// Filesystem-friendly label, e.g. "Linux_Desktop_Night_Wired_Firefox".
std::string profile_label(const OperationalProfile& p);

/// Behavioral map with every attribute set to "Undisclosed".
std::map<std::string, std::string> undisclosed_behavior();

/// Cross product of the operational attributes (3 * 2 * 3 * 2 * 2 = 72),
/// browser varying fastest, behavioral fields undisclosed.
std::vector<OperationalProfile> default_profiles();

}  // namespace choiceleak
