#include "iotriage/resources.hpp"

#include "iotriage/error.hpp"

namespace iotriage {

std::string_view resource(std::string_view name) {
  const auto& table = embedded_resources();
  const auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown embedded resource: " + std::string(name));
  return it->second;
}

}  // namespace iotriage
