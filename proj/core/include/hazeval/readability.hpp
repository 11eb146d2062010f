#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hazeval {

// Vowel-group heuristic: groups of [aeiouy], minus a silent trailing "e"
// (but not "-le"), never below one. Tokens without letters count as one.
int count_syllables(std::string_view word);

// Splits on '.', '!' or '?' followed by whitespace or end of text. A line
// break also ends a sentence when the next line starts a numbered point or
// is blank. Numbered-point markers ("1.") never end a sentence and are not
// counted as words.
std::vector<std::string> split_sentences(std::string_view text);

// Whitespace-separated tokens holding at least one letter or digit.
std::vector<std::string> split_words(std::string_view sentence);

double flesch_reading_ease(double asl, double asw);
double flesch_kincaid_grade(double asl, double asw);

// Band labels. Both functions are total over the reals (NaN maps to the
// hardest band).
std::string_view fre_band(double fre);
std::string_view fkgl_band(double fkgl);

// All bands in order from easiest to hardest.
std::span<const std::string_view> fre_bands();
std::span<const std::string_view> fkgl_bands();

struct ReadabilityReport {
  double fre = 0.0;
  double fkgl = 0.0;
  double asl = 0.0;  // words per sentence
  double asw = 0.0;  // syllables per word
  std::size_t sentences = 0;
  std::size_t words = 0;
  std::size_t syllables = 0;
  std::string fre_band;
  std::string fkgl_band;
};

// Throws PreconditionError when the text holds no word.
ReadabilityReport readability(std::string_view text);

// Averages plus per-band counts over a set of answers.
struct ReadabilitySummary {
  std::size_t count = 0;
  double mean_fre = 0.0;
  double mean_fkgl = 0.0;
  std::map<std::string, std::size_t> fre_band_counts;
  std::map<std::string, std::size_t> fkgl_band_counts;
};

ReadabilitySummary summarize_readability(std::span<const ReadabilityReport> reports);

}  // namespace hazeval
