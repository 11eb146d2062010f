#include "hazeval/json_reply.hpp"

#include "hazeval/error.hpp"

namespace hazeval {

std::optional<nlohmann::json> extract_json(std::string_view reply) {
  auto try_parse = [](std::string_view s) -> std::optional<nlohmann::json> {
    auto j = nlohmann::json::parse(s, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) return std::nullopt;
    return j;
  };
  if (auto j = try_parse(reply)) return j;

  // Whichever bracket opens first is the outermost value.
  const auto first_array = reply.find('[');
  const auto first_object = reply.find('{');
  std::pair<char, char> order[2] = {{'[', ']'}, {'{', '}'}};
  if (first_object < first_array) std::swap(order[0], order[1]);
  for (auto [open, close] : order) {
    const auto b = reply.find(open);
    const auto e = reply.rfind(close);
    if (b == std::string_view::npos || e == std::string_view::npos || e < b) continue;
    if (auto j = try_parse(reply.substr(b, e - b + 1))) return j;
  }
  return std::nullopt;
}

std::string_view first_user_message(const ChatRequest& request) {
  for (const auto& m : request.messages) {
    if (m.role == "user") return m.content;
  }
  return {};
}

}  // namespace hazeval
