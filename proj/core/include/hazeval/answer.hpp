#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hazeval {

// A generated answer split into an optional introduction and ordered
// numbered points. The model's trailing self-reported confidence line is
// kept apart and never fed to a metric.
struct StructuredAnswer {
  std::string intro;
  std::vector<std::string> segments;
  std::optional<std::string> self_confidence;
  std::vector<std::string> retrieved_doc_ids;

  bool empty() const { return intro.empty() && segments.empty(); }
};

// Total: text without numbered points becomes the intro.
StructuredAnswer parse_answer(std::string_view raw);

// Renders intro followed by "1. ...", "2. ..." lines; no confidence line.
std::string render_answer(std::string_view intro, const std::vector<std::string>& segments);
inline std::string render_answer(const StructuredAnswer& a) { return render_answer(a.intro, a.segments); }

// Matches "12. text" or "3) text"; returns the text after the marker.
std::optional<std::string> numbered_point_body(std::string_view line);

}  // namespace hazeval
