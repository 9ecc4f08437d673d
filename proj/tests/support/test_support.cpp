// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rampforge/error.hpp"

#ifndef RAMPFORGE_FIXTURE_DIR
#error "RAMPFORGE_FIXTURE_DIR must be defined"
#endif

namespace rampforge::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = fs::temp_directory_path() /
                     ("rampforge-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path fixture_path(std::string_view name) { return fs::path(RAMPFORGE_FIXTURE_DIR) / name; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

namespace {

constexpr std::string_view kSyllables[] = {"bar", "cel", "dor", "fen", "gal", "hir", "jun", "kes",
                                           "lor", "mav", "nim", "pel", "quor", "ras", "sol", "tav"};
constexpr std::string_view kMonths[] = {"January", "February", "March",     "April",
                                        "May",     "June",     "July",      "August",
                                        "September", "October", "November", "December"};

std::string name_for(std::size_t n, std::size_t salt) {
  constexpr std::size_t base = std::size(kSyllables);
  std::string s;
  s += kSyllables[(n + salt) % base];
  s += kSyllables[(n / base + salt * 3) % base];
  s += kSyllables[(n * 7 + salt * 5) % base];
  s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string lower_word(std::size_t n) {
  constexpr std::size_t base = std::size(kSyllables);
  return std::string(kSyllables[n % base]) + std::string(kSyllables[(n / base + 11) % base]);
}

std::string reply(std::string_view thought, std::string_view key, std::string_view value) {
  nlohmann::ordered_json j;
  j["thought"] = thought;
  j[std::string(key)] = value;
  return j.dump();
}

}  // namespace

std::vector<Document> synthetic_corpus(std::size_t regular, std::size_t reference) {
  std::vector<Document> docs;
  char id[32];
  for (std::size_t i = 0; i < regular; ++i) {
    std::snprintf(id, sizeof id, "doc-%03zu", i);
    const auto year1 = 1820 + (i * 13) % 150;
    const auto year2 = year1 + 5 + i % 20;
    const auto members = 21 + (i * 37) % 900;
    std::string text = name_for(i, 1) + " " + name_for(i, 2) + " founded the " + name_for(i, 3) +
                       " Society in " + std::string(kMonths[i % 12]) + " " + std::to_string(year1) +
                       ". The society had " + std::to_string(members) + " members by " +
                       std::to_string(year2) + " and later moved to " + name_for(i, 4) + ".";
    docs.push_back({id, name_for(i, 3) + " Society", std::move(text)});
  }
  for (std::size_t j = 0; j < reference; ++j) {
    std::snprintf(id, sizeof id, "ref-%02zu", j);
    const auto w = lower_word(j);
    docs.push_back({id, "glossary note " + w,
                    std::string(kSentinel) + " glossary archive note " + w +
                        ": ledgers about founders, societies and towns are kept here for lookup."});
  }
  return docs;
}

DocumentStore make_store(const std::vector<Document>& docs) {
  DocumentStore store;
  for (const auto& d : docs) store.add(d);
  return store;
}

void write_corpus(const fs::path& path, const std::vector<Document>& docs) {
  std::string lines;
  for (const auto& d : docs) lines += to_jsonl(d) + "\n";
  write_file(path, lines);
}

std::string extract_task(std::string_view prompt) {
  const auto end = prompt.find(kRampInstruction);
  if (end == std::string_view::npos) return {};
  constexpr std::string_view kTaskLabel = "Task:\n";
  const auto label = prompt.rfind(kTaskLabel, end);
  if (label == std::string_view::npos) return {};
  const auto begin = label + kTaskLabel.size();
  return std::string(prompt.substr(begin, end + kRampInstruction.size() - begin));
}

std::unique_ptr<ChatClient> scripted_team(std::map<std::string, TeamScript> scripts) {
  return std::make_unique<FunctionChatClient>(
      [scripts = std::move(scripts)](std::span<const ChatMessage> messages) -> std::string {
        const auto& prompt = messages.back().content;
        const auto task = extract_task(prompt);
        auto it = scripts.find(task);
        if (it == scripts.end()) throw ClientError("no script for this task");
        const auto& s = it->second;
        std::size_t searches = 0;
        for (auto pos = prompt.find("</search>"); pos != std::string::npos;
             pos = prompt.find("</search>", pos + 1)) {
          ++searches;
        }
        const auto query = "glossary archive " + s.query_terms;
        if (prompt.starts_with("You are the Planner Agent")) {
          return reply("Plan: find each missing fact, one search per fact.", "query", query);
        }
        if (prompt.starts_with("You are the Rewriter Agent")) {
          return reply("Keep the distinctive names.", "query",
                        query + " step " + std::to_string(searches + 1));
        }
        if (prompt.starts_with("You are the Observer Agent")) {
          if (static_cast<int>(searches) < s.searches) {
            return reply("Some masks are still open.", "query", query);
          }
          return reply("Every mask can be filled now.", "answer", s.answer);
        }
        throw ClientError("unrecognized agent prompt");
      });
}

std::unique_ptr<ChatClient> exact_judge() {
  return std::make_unique<FunctionChatClient>([](std::span<const ChatMessage> messages) {
    const std::string_view prompt = messages.back().content;
    constexpr std::string_view kTarget = "\nStandard Answer: ";
    constexpr std::string_view kPredicted = "\nPredicted Answer: ";
    constexpr std::string_view kTail = "\nOnly return the option";
    const auto t = prompt.rfind(kTarget);
    const auto p = prompt.rfind(kPredicted);
    const auto e = prompt.rfind(kTail);
    if (t == std::string_view::npos || p == std::string_view::npos || e == std::string_view::npos) {
      return std::string("unparseable prompt");
    }
    const auto target = prompt.substr(t + kTarget.size(), p - t - kTarget.size());
    const auto predicted = prompt.substr(p + kPredicted.size(), e - p - kPredicted.size());
    return std::string(target == predicted ? "A" : "B");
  });
}

std::unique_ptr<ChatClient> constant_judge(std::string reply_text) {
  return std::make_unique<FunctionChatClient>(
      [reply_text = std::move(reply_text)](std::span<const ChatMessage>) { return reply_text; });
}

std::map<std::string, TeamScript> team_scripts(const std::vector<MaskedSample>& samples,
                                               const std::function<bool(std::size_t)>& correct,
                                               const std::function<int(std::size_t)>& searches) {
  std::map<std::string, TeamScript> scripts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    TeamScript script;
    script.answer = correct(i) ? reconstruct(s) : s.context;
    script.searches = searches(i);
    const auto words = tokenize_words(s.context);
    for (const auto& w : words) {
      if (w == "mask") continue;
      if (!script.query_terms.empty()) script.query_terms += ' ';
      script.query_terms += w;
      if (script.query_terms.size() > 24) break;
    }
    scripts[render_ramp_prompt(s)] = std::move(script);
  }
  return scripts;
}

namespace {

std::string skewed_word(std::mt19937_64& rng, std::size_t vocab) {
  // Minimum of two draws favours small indices.
  const auto a = rng() % vocab;
  const auto b = rng() % vocab;
  return "w" + std::to_string(std::min(a, b));
}

}  // namespace

std::vector<Document> random_corpus(std::uint64_t seed, std::size_t docs, std::size_t vocab) {
  std::mt19937_64 rng(seed);
  std::vector<Document> out;
  for (std::size_t i = 0; i < docs; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "r%04zu", i);
    std::string title = skewed_word(rng, vocab);
    std::string text;
    const auto len = 1 + rng() % 40;
    for (std::size_t w = 0; w < len; ++w) {
      if (w) text += (rng() % 7 == 0) ? ", " : " ";
      text += skewed_word(rng, vocab);
    }
    text += '.';
    out.push_back({id, std::move(title), std::move(text)});
  }
  return out;
}

std::string random_query(std::uint64_t& state, std::size_t vocab) {
  std::mt19937_64 rng(state);
  std::string q;
  const auto n = 1 + rng() % 4;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) q += ' ';
    q += (rng() % 10 == 0) ? "absentword" : "w" + std::to_string(rng() % vocab);
  }
  state = rng();
  return q;
}

Trajectory random_trajectory(std::uint64_t& state) {
  std::mt19937_64 rng(state);
  const auto text = [&] {
    std::uint64_t sub = rng();
    return random_words(sub, 1 + rng() % 8, "abcdeQRS 019\n<>/.,");
  };
  Trajectory t("gen-" + std::to_string(state % 100000));
  t.append(SegmentKind::think, text());
  const auto rounds = rng() % 5;
  for (std::uint64_t r = 0; r < rounds; ++r) {
    t.append(SegmentKind::search, text());
    if (rng() % 4 != 0) t.append(SegmentKind::information, text());
    t.append(SegmentKind::think, text());
  }
  if (rng() % 8 != 0) t.append(SegmentKind::answer, text());
  state = rng();
  return t;
}

std::string random_words(std::uint64_t& state, std::size_t words, std::string_view alphabet) {
  std::mt19937_64 rng(state);
  std::string out;
  for (std::size_t w = 0; w < words; ++w) {
    if (w) out += ' ';
    const auto len = 1 + rng() % 6;
    for (std::size_t i = 0; i < len; ++i) out += alphabet[rng() % alphabet.size()];
  }
  state = rng();
  return out;
}

}  // namespace rampforge::testing
