#include "detox/tokenizer.hpp"

#include <algorithm>

namespace detox {

namespace {

constexpr std::string_view kControlNames[] = {"<pad>", "<bos>", "<eos>", "<unk>"};

}  // namespace

std::size_t ByteTokenizer::add_tokens(const std::vector<std::string>& tokens) {
  std::map<std::string, TokenId> staged;
  for (const auto& token : tokens) {
    if (token.empty()) throw Error("cannot add an empty token");
    if (std::find(std::begin(kControlNames), std::end(kControlNames), token) !=
        std::end(kControlNames)) {
      throw Error("token '" + token + "' collides with a control token");
    }
    if (added_ids_.count(token) || staged.count(token)) {
      throw Error("duplicate token '" + token + "'");
    }
    staged.emplace(token, 0);
  }
  for (const auto& token : tokens) {
    added_ids_[token] = static_cast<TokenId>(size());
    added_.push_back(token);
    longest_added_ = std::max(longest_added_, token.size());
  }
  return size();
}

std::vector<TokenId> ByteTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    TokenId matched = -1;
    std::size_t matched_len = 0;
    if (!added_.empty()) {
      std::size_t max_len = std::min(longest_added_, text.size() - i);
      for (std::size_t len = max_len; len > 0; --len) {
        auto it = added_ids_.find(std::string(text.substr(i, len)));
        if (it != added_ids_.end()) {
          matched = it->second;
          matched_len = len;
          break;
        }
      }
    }
    if (matched >= 0) {
      ids.push_back(matched);
      i += matched_len;
    } else {
      ids.push_back(kFirstByte + static_cast<unsigned char>(text[i]));
      ++i;
    }
  }
  return ids;
}

std::string ByteTokenizer::decode(const std::vector<TokenId>& ids, bool skip_added) const {
  std::string out;
  for (TokenId id : ids) {
    if (id < kFirstByte) continue;
    if (id < kBaseSize) {
      out.push_back(static_cast<char>(id - kFirstByte));
    } else if (static_cast<std::size_t>(id) < size()) {
      if (!skip_added) out += added_[static_cast<std::size_t>(id - kBaseSize)];
    }
  }
  return out;
}

json ByteTokenizer::manifest() const {
  return json{{"kind", "byte-v1"}, {"base_size", kBaseSize}, {"added_tokens", added_}};
}

ByteTokenizer ByteTokenizer::from_manifest(const json& manifest) {
  if (manifest.value("kind", std::string()) != "byte-v1") {
    throw Error("unsupported tokenizer manifest");
  }
  ByteTokenizer tokenizer;
  tokenizer.add_tokens(manifest.at("added_tokens").get<std::vector<std::string>>());
  return tokenizer;
}

}  // namespace detox
