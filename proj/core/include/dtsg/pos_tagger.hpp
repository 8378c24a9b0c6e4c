#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dtsg {

enum class PosTag { kNoun, kVerb, kOther };

std::string_view to_string(PosTag tag);
// Accepts NOUN / VERB / OTHER plus the common Universal POS spellings
// (PROPN -> NOUN, everything else -> OTHER). Unknown strings map to OTHER.
PosTag parse_pos_tag(std::string_view s);

class PosTagger {
 public:
  virtual ~PosTagger() = default;
  virtual std::vector<PosTag> tag(const std::vector<std::string>& tokens) const = 0;
};

// Lexicon + suffix heuristics. Used when an annotation line has no "pos"
// field; good enough for short descriptive queries ("person opens the door").
class RuleBasedTagger final : public PosTagger {
 public:
  std::vector<PosTag> tag(const std::vector<std::string>& tokens) const override;
};

}  // namespace dtsg
