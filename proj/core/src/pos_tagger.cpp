#include "dtsg/pos_tagger.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace dtsg {
namespace {

constexpr std::array<std::string_view, 44> kFunctionWords{
    "a",    "an",   "the",   "this", "that", "these", "those", "and",  "or",   "but",  "of",
    "in",   "on",   "at",    "to",   "into", "onto",  "from",  "with", "by",   "for",  "up",
    "down", "out",  "off",   "over", "then", "again", "while", "his",  "her",  "their", "its",
    "he",   "she",  "they",  "it",   "is",   "are",   "was",   "were", "be",   "some", "very"};

constexpr std::array<std::string_view, 40> kVerbs{
    "open",  "opens",  "close", "closes", "hold",  "holds",  "take",   "takes",   "put",    "puts",
    "sit",   "sits",   "stand", "stands", "walk",  "walks",  "run",    "runs",    "eat",    "eats",
    "drink", "drinks", "cut",   "cuts",   "throw", "throws", "pick",   "picks",   "wash",   "washes",
    "pour",  "pours",  "fix",   "fixes",  "play",  "plays",  "watch",  "watches", "turn",   "turns"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() + 1 && s.substr(s.size() - suffix.size()) == suffix;
}

bool contains(auto const& list, std::string_view w) { return std::find(list.begin(), list.end(), w) != list.end(); }

}  // namespace

std::string_view to_string(PosTag tag) {
  switch (tag) {
    case PosTag::kNoun:
      return "NOUN";
    case PosTag::kVerb:
      return "VERB";
    case PosTag::kOther:
      return "OTHER";
  }
  return "OTHER";
}

PosTag parse_pos_tag(std::string_view s) {
  const std::string u = lower(s);
  if (u == "noun" || u == "propn") return PosTag::kNoun;
  if (u == "verb") return PosTag::kVerb;
  return PosTag::kOther;
}

std::vector<PosTag> RuleBasedTagger::tag(const std::vector<std::string>& tokens) const {
  std::vector<PosTag> tags;
  tags.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string w = lower(tokens[i]);
    if (w.empty() || contains(kFunctionWords, w) || !std::isalpha(static_cast<unsigned char>(w[0]))) {
      tags.push_back(PosTag::kOther);
    } else if (contains(kVerbs, w) || ends_with(w, "ing") || ends_with(w, "ed")) {
      tags.push_back(PosTag::kVerb);
    } else if (ends_with(w, "ly")) {
      tags.push_back(PosTag::kOther);
    } else {
      tags.push_back(PosTag::kNoun);
    }
  }
  return tags;
}

}  // namespace dtsg
