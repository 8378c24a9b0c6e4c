#pragma once

#include <map>
#include <string>
#include <vector>

#include "dtsg/data_model.hpp"
#include "dtsg/tensor.hpp"

namespace dtsg {

struct EncodedQuery {
  std::vector<int> ids;  // length M
  Mask mask;             // 1 = real token
};

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kEmpty = 2;

  Vocabulary();
  static Vocabulary build(const Dataset& train);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Truncates/pads to max_len. An empty token list becomes [EMPTY].
  EncodedQuery encode(const std::vector<std::string>& tokens, int max_len) const;

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> index_;
};

}  // namespace dtsg
