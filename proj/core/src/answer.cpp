#include "hazeval/answer.hpp"

#include <cctype>

#include "hazeval/text.hpp"

namespace hazeval {

std::optional<std::string> numbered_point_body(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
  const std::size_t digits_begin = i;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == digits_begin || i >= line.size()) return std::nullopt;
  if (line[i] != '.' && line[i] != ')') return std::nullopt;
  ++i;
  // "3.5 inches" is a decimal, not a marker.
  if (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) return std::nullopt;
  return trim(line.substr(i));
}

StructuredAnswer parse_answer(std::string_view raw) {
  StructuredAnswer out;
  std::vector<std::string> intro_lines;
  std::vector<std::string> confidence_lines;
  bool in_confidence = false;

  for (const std::string& line : split_lines(raw)) {
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (in_confidence) {
      confidence_lines.push_back(text);
      continue;
    }
    auto point = numbered_point_body(text);
    const std::string& body = point ? *point : text;
    if (starts_with_ci(body, "confidence")) {
      in_confidence = true;
      confidence_lines.push_back(text);
      continue;
    }
    if (point) {
      out.segments.push_back(*point);
    } else if (out.segments.empty()) {
      intro_lines.push_back(text);
    } else {
      // Wrapped continuation of the previous point.
      std::string& last = out.segments.back();
      if (!last.empty()) last.push_back(' ');
      last += text;
    }
  }
  out.intro = join(intro_lines, "\n");
  if (!confidence_lines.empty()) out.self_confidence = join(confidence_lines, "\n");
  return out;
}

std::string render_answer(std::string_view intro, const std::vector<std::string>& segments) {
  std::string out(intro);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!out.empty()) out.push_back('\n');
    out += std::to_string(i + 1) + ". " + segments[i];
  }
  return out;
}

}  // namespace hazeval
