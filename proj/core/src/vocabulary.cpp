#include "dtsg/vocabulary.hpp"

#include <set>

#include "dtsg/error.hpp"

namespace dtsg {

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
  add("<empty>");
}

void Vocabulary::add(const std::string& token) {
  if (index_.emplace(token, static_cast<int>(tokens_.size())).second) tokens_.push_back(token);
}

Vocabulary Vocabulary::build(const Dataset& train) {
  std::set<std::string> words;
  for (const auto& s : train.samples()) words.insert(s.query.tokens.begin(), s.query.tokens.end());
  Vocabulary v;
  for (const auto& w : words) v.add(w);
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 3 || tokens[0] != "<pad>" || tokens[1] != "<unk>" || tokens[2] != "<empty>") {
    throw Error("encoders", "vocabulary must start with the reserved tokens");
  }
  Vocabulary v;
  for (std::size_t i = 3; i < tokens.size(); ++i) v.add(tokens[i]);
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

EncodedQuery Vocabulary::encode(const std::vector<std::string>& tokens, int max_len) const {
  if (max_len < 1) throw Error("encoders", "max query length must be >= 1");
  EncodedQuery q;
  q.ids.assign(static_cast<std::size_t>(max_len), kPad);
  q.mask.assign(static_cast<std::size_t>(max_len), 0);
  if (tokens.empty()) {
    q.ids[0] = kEmpty;
    q.mask[0] = 1;
    return q;
  }
  const std::size_t n = std::min(tokens.size(), static_cast<std::size_t>(max_len));
  for (std::size_t i = 0; i < n; ++i) {
    q.ids[i] = id(tokens[i]);
    q.mask[i] = 1;
  }
  return q;
}

}  // namespace dtsg
