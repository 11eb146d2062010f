#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "hazeval/error.hpp"
#include "hazeval/gateway.hpp"

namespace hazeval {

// Pulls the JSON value out of a model reply: tolerates ``` fences and text
// around the outermost [...] or {...}. nullopt if nothing parses.
std::optional<nlohmann::json> extract_json(std::string_view reply);

// Reply contract: send `request` and convert the raw reply with `convert`,
// which throws on any violation. On failure one repair turn is appended
// quoting the problem; a second failure raises ReplyError.
template <class T>
T ask_checked(Provider& provider, ChatRequest request, const std::function<T(const std::string&)>& convert,
              std::string_view redo = "Reply again with only the corrected output and no extra text.") {
  std::string problem;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string reply = provider.chat(request);
    try {
      return convert(reply);
    } catch (const std::exception& e) {
      problem = e.what();
    }
    request.messages.push_back({"assistant", reply});
    request.messages.push_back({"user", "Your previous reply could not be used: " + problem + ". " + std::string(redo)});
  }
  throw ReplyError("model reply violated the reply contract after one repair: " + problem);
}

// ask_checked for replies that must hold one JSON value.
template <class T>
T ask_json(Provider& provider, ChatRequest request, const std::function<T(const nlohmann::json&)>& convert) {
  const std::function<T(const std::string&)> parse = [&convert](const std::string& reply) {
    auto parsed = extract_json(reply);
    if (!parsed) throw ReplyError("the reply is not valid JSON");
    return convert(*parsed);
  };
  return ask_checked(provider, std::move(request), parse,
                     "Reply again with only the corrected JSON, no markdown and no extra text.");
}

// Content of the first user message; mock backends answer the original task
// even on a repair turn.
std::string_view first_user_message(const ChatRequest& request);

}  // namespace hazeval
