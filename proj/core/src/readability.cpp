#include "hazeval/readability.hpp"

#include <array>
#include <cctype>
#include <cmath>

#include "hazeval/answer.hpp"
#include "hazeval/error.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

namespace {

constexpr std::array<std::string_view, 4> kFreBands = {
    "Plain English or easier (9th grade and below)",
    "Fairly difficult (10th–12th grade)",
    "Difficult to read (college level)",
    "Very difficult (college graduate or higher)",
};

constexpr std::array<std::string_view, 5> kFkglBands = {
    "Elementary school level",
    "Middle school level",
    "High school level",
    "College undergraduate level",
    "Graduate/professional level",
};

bool is_vowel(char c) {
  switch (c) {
    case 'a': case 'e': case 'i': case 'o': case 'u': case 'y': return true;
    default: return false;
  }
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace

int count_syllables(std::string_view word) {
  std::string w;
  for (char c : word) {
    if (std::isalpha(static_cast<unsigned char>(c))) w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (w.empty()) return 1;
  int groups = 0;
  bool prev_vowel = false;
  for (char c : w) {
    const bool v = is_vowel(c);
    if (v && !prev_vowel) ++groups;
    prev_vowel = v;
  }
  if (w.back() == 'e' && !w.ends_with("le")) --groups;
  return groups < 1 ? 1 : groups;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::string current;
  auto flush = [&] {
    std::string s = trim(current);
    if (!split_words(s).empty()) sentences.push_back(std::move(s));
    current.clear();
  };

  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::string line = trim(lines[li]);
    if (auto body = numbered_point_body(line)) line = *body;
    for (std::size_t i = 0; i < line.size(); ++i) {
      current.push_back(line[i]);
      if (is_terminator(line[i])) {
        const bool at_end = i + 1 == line.size();
        const bool before_space = !at_end && std::isspace(static_cast<unsigned char>(line[i + 1]));
        if (at_end || before_space) flush();
      }
    }
    bool boundary = true;
    if (li + 1 < lines.size()) {
      const std::string next = trim(lines[li + 1]);
      boundary = next.empty() || numbered_point_body(next).has_value();
    }
    if (boundary) {
      flush();
    } else {
      current.push_back(' ');
    }
  }
  flush();
  return sentences;
}

std::vector<std::string> split_words(std::string_view sentence) {
  std::vector<std::string> words;
  std::string cur;
  auto push = [&] {
    for (char c : cur) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        words.push_back(cur);
        break;
      }
    }
    cur.clear();
  };
  for (char c : sentence) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      push();
    } else {
      cur.push_back(c);
    }
  }
  push();
  return words;
}

double flesch_reading_ease(double asl, double asw) { return 206.835 - 1.015 * asl - 84.6 * asw; }

double flesch_kincaid_grade(double asl, double asw) { return 0.39 * asl + 11.8 * asw - 15.59; }

std::string_view fre_band(double fre) {
  if (fre >= 60.0) return kFreBands[0];
  if (fre >= 50.0) return kFreBands[1];
  if (fre >= 30.0) return kFreBands[2];
  return kFreBands[3];
}

std::string_view fkgl_band(double g) {
  if (std::isnan(g)) return kFkglBands[4];
  if (g < 6.0) return kFkglBands[0];
  if (g < 9.0) return kFkglBands[1];
  if (g < 13.0) return kFkglBands[2];
  if (g <= 16.0) return kFkglBands[3];
  return kFkglBands[4];
}

std::span<const std::string_view> fre_bands() { return kFreBands; }
std::span<const std::string_view> fkgl_bands() { return kFkglBands; }

ReadabilityReport readability(std::string_view text) {
  ReadabilityReport r;
  for (const std::string& s : split_sentences(text)) {
    const auto words = split_words(s);
    ++r.sentences;
    r.words += words.size();
    for (const auto& w : words) r.syllables += static_cast<std::size_t>(count_syllables(w));
  }
  if (r.words == 0) throw PreconditionError("readability: text has no words");
  r.asl = static_cast<double>(r.words) / static_cast<double>(r.sentences);
  r.asw = static_cast<double>(r.syllables) / static_cast<double>(r.words);
  r.fre = flesch_reading_ease(r.asl, r.asw);
  r.fkgl = flesch_kincaid_grade(r.asl, r.asw);
  r.fre_band = fre_band(r.fre);
  r.fkgl_band = fkgl_band(r.fkgl);
  return r;
}

ReadabilitySummary summarize_readability(std::span<const ReadabilityReport> reports) {
  ReadabilitySummary s;
  for (auto b : kFreBands) s.fre_band_counts[std::string(b)] = 0;
  for (auto b : kFkglBands) s.fkgl_band_counts[std::string(b)] = 0;
  for (const auto& r : reports) {
    s.mean_fre += r.fre;
    s.mean_fkgl += r.fkgl;
    ++s.fre_band_counts[r.fre_band];
    ++s.fkgl_band_counts[r.fkgl_band];
  }
  s.count = reports.size();
  if (s.count) {
    s.mean_fre /= static_cast<double>(s.count);
    s.mean_fkgl /= static_cast<double>(s.count);
  }
  return s;
}

}  // namespace hazeval
