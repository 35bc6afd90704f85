#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "detox/common.hpp"

namespace detox {

using TokenId = std::int32_t;

// Byte-level tokenizer with four control ids and an extensible list of
// atomic added tokens.
//
//   0 <pad>  1 <bos>  2 <eos>  3 <unk>  4..259 bytes  260.. added tokens
//
// Added tokens are matched greedily (longest first) before falling back to
// bytes, so existing ids never change when tokens are added.
class ByteTokenizer {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kFirstByte = 4;
  static constexpr TokenId kBaseSize = kFirstByte + 256;

  std::size_t size() const { return kBaseSize + added_.size(); }
  const std::vector<std::string>& added_tokens() const { return added_; }

  // Appends tokens in order and returns the new size. Throws Error if a
  // token is empty, repeated, or already known.
  std::size_t add_tokens(const std::vector<std::string>& tokens);

  std::vector<TokenId> encode(std::string_view text) const;

  // Control ids are skipped; added tokens decode to their surface form
  // unless skip_added is set.
  std::string decode(const std::vector<TokenId>& ids, bool skip_added = false) const;

  bool is_added(TokenId id) const { return id >= kBaseSize && static_cast<std::size_t>(id) < size(); }
  bool is_control(TokenId id) const { return id >= 0 && id < kFirstByte; }

  json manifest() const;
  static ByteTokenizer from_manifest(const json& manifest);

 private:
  std::vector<std::string> added_;
  std::map<std::string, TokenId> added_ids_;
  std::size_t longest_added_ = 0;
};

}  // namespace detox
