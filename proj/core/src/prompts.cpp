// SPDX-License-Identifier: Apache-2.0
#include "rampforge/prompts.hpp"

#include <fstream>
#include <sstream>

#include "rampforge/error.hpp"

namespace rampforge::prompts {

std::string fill(std::string_view tmpl,
                 const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) break;
    auto it = values.find(tmpl.substr(open + 1, close - open - 1));
    if (it == values.end()) {
      out.append(tmpl.substr(pos, open + 1 - pos));
      pos = open + 1;
      continue;
    }
    out.append(tmpl.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 1;
  }
  out.append(tmpl.substr(std::min(pos, tmpl.size())));
  return out;
}

void require_placeholders(std::string_view tmpl, std::string_view template_name,
                          std::initializer_list<std::string_view> placeholders) {
  for (auto name : placeholders) {
    const std::string token = "{" + std::string(name) + "}";
    if (tmpl.find(token) == std::string_view::npos) {
      throw InvalidArgument(std::string(template_name) + " is missing placeholder " + token);
    }
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace rampforge::prompts
