#pragma once

#include "choiceleak/profile.hpp"
#include "json_util.hpp"

namespace choiceleak::detail {

ojson profile_to_json(const OperationalProfile& p);
OperationalProfile profile_from_json(const ojson& j);

}  // namespace choiceleak::detail
