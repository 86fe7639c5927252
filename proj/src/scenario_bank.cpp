// SPDX-License-Identifier: Apache-2.0

#include "relate/scenario_bank.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "relate/hashing.hpp"

namespace relate::scene {

Json to_json(const Scenario& s) {
  Json j = Json::object();
  j["id"] = s.id;
  j["category"] = std::string(to_token(s.category));
  j["synopsis"] = s.synopsis;
  j["tags"] = s.tags;
  return j;
}

Scenario scenario_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected object");
  for (const char* key : {"id", "category", "synopsis"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw SchemaError(path + "/" + key, "missing or non-string field");
    }
  }
  Scenario s;
  s.id = j["id"].get<std::string>();
  s.category = parse_token_or_throw<TurningPointCategory>(j["category"].get<std::string>(),
                                                          path + "/category");
  s.synopsis = j["synopsis"].get<std::string>();
  if (j.contains("tags")) {
    if (!j["tags"].is_array()) throw SchemaError(path + "/tags", "expected array of strings");
    for (const auto& t : j["tags"]) {
      if (!t.is_string()) throw SchemaError(path + "/tags", "expected array of strings");
      s.tags.push_back(t.get<std::string>());
    }
  }
  if (s.id.empty()) throw SchemaError(path + "/id", "empty id");
  return s;
}

ScenarioBank::ScenarioBank(std::vector<Scenario> scenarios) : scenarios_(std::move(scenarios)) {
  std::set<std::string, std::less<>> seen;
  for (const auto& s : scenarios_) {
    if (s.id.empty()) throw std::invalid_argument("scenario with empty id");
    if (!seen.insert(s.id).second) throw std::invalid_argument("duplicate scenario id '" + s.id + "'");
  }
}

ScenarioBank ScenarioBank::parse(std::string_view text, const std::string& source) {
  std::vector<Scenario> scenarios;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto where = fmt::format("{}:{}", source, line_no);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw SchemaError(where, std::string("invalid JSON: ") + e.what());
    }
    auto s = scenario_from_json(j, where);
    if (!seen.insert(s.id).second) throw SchemaError(where, "duplicate scenario id '" + s.id + "'");
    scenarios.push_back(std::move(s));
    if (end == text.size()) break;
  }
  return ScenarioBank(std::move(scenarios));
}

ScenarioBank ScenarioBank::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read scenario bank " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), file.string());
}

const Scenario* ScenarioBank::find(std::string_view id) const {
  for (const auto& s : scenarios_) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::vector<const Scenario*> ScenarioBank::pool(TurningPointCategory category) const {
  std::vector<const Scenario*> out;
  for (const auto& s : scenarios_) {
    if (s.category == category) out.push_back(&s);
  }
  return out;
}

std::string ScenarioBank::serialize() const {
  std::string out;
  for (const auto& s : scenarios_) out += canonical_dump(to_json(s)) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Generator

namespace {

struct Situation {
  std::string_view text;
  std::string_view tag;
};

struct CategoryTemplates {
  std::string_view prefix;
  std::vector<Situation> situations;
};

const std::vector<CategoryTemplates>& templates() {
  static const std::vector<CategoryTemplates> t = {
      {"if",
       {{"the two meet again after a first date that ended awkwardly", "first-impressions"},
        {"one partner asks the other to define what they are to each other", "labels"},
        {"a friend introduces them and both feel an unexpected pull", "meeting"},
        {"one of them cancels a second date at the last minute", "reliability"},
        {"they discover they both applied for the same apartment", "coincidence"},
        {"one partner has to decide whether to delete a dating app", "exclusivity"},
        {"they spend a first full weekend together", "intimacy"},
        {"one partner discloses a past heartbreak early on", "self-disclosure"},
        {"they text late into the night and one stops replying mid-conversation", "communication"},
        {"one partner invites the other to a family dinner very early", "pace"}}},
      {"rd",
       {{"they start cooking dinner together every Sunday", "rituals"},
        {"one partner leaves a toothbrush at the other's place", "routines"},
        {"they plan a first trip abroad together", "shared-plans"},
        {"one partner meets the other's closest friends", "network"},
        {"they adopt a shared budget for groceries and outings", "finances"},
        {"one partner starts a demanding new hobby", "autonomy"},
        {"they care for each other through a bad flu", "support"},
        {"they agree to keep a weekly check-in conversation", "communication"},
        {"one partner asks for more time alone on weeknights", "space"},
        {"they decorate a shared room for the first time", "investment"}}},
      {"ct",
       {{"one partner is offered a job in another city", "distance"},
        {"an ex reaches out to one partner on social media", "alternatives"},
        {"a parent openly disapproves of the relationship", "network"},
        {"one partner loses their job unexpectedly", "stress"},
        {"a coworker flirts with one partner at an office party", "alternatives"},
        {"they must spend three months apart for a training program", "transition"},
        {"one partner faces a health scare", "support"},
        {"rent rises sharply and they must decide whether to move in together", "constraints"},
        {"one partner's best friend says the relationship is holding them back", "network"},
        {"a night shift schedule leaves them barely seeing each other", "schedules"}}},
      {"cr",
       {{"a forgotten anniversary turns into a bitter argument", "neglect"},
        {"one partner reads the other's messages without asking", "trust"},
        {"an argument about chores escalates into shouting", "escalation"},
        {"one partner stonewalls for two days after a fight", "withdrawal"},
        {"they clash over how much to spend on a wedding gift", "finances"},
        {"one partner makes a cutting joke in front of friends", "contempt"},
        {"they argue about whose family to visit for the holidays", "network"},
        {"one partner comes home very late without calling", "reliability"},
        {"an old grievance resurfaces during a calm evening", "unresolved"},
        {"one partner offers an apology that the other is not ready to accept", "repair"}}},
      {"dm",
       {{"one partner considers proposing", "proposal"},
        {"they sign a lease together", "constraints"},
        {"they adopt a dog", "investment"},
        {"they open a joint bank account", "finances"},
        {"they talk seriously about having children", "future"},
        {"one partner asks the other to be their emergency contact", "trust"},
        {"they celebrate five years together", "milestone"},
        {"they meet each other's extended families at a reunion", "network"},
        {"one partner supports the other through a parent's illness", "support"},
        {"they buy a car together", "investment"}}},
      {"om",
       {{"a shared streaming account reveals unexpected viewing habits", "digital"},
        {"one partner posts about the relationship online without asking", "privacy"},
        {"they disagree about sharing phone locations", "surveillance"},
        {"a dating app notification appears on one partner's phone", "alternatives"},
        {"one partner wants to try an open relationship", "non-monogamy"},
        {"they must choose between remote work together or separate offices", "work"},
        {"a viral post from one partner draws comments from an ex", "digital"},
        {"they split finances through a payment app and disagree about fairness", "finances"},
        {"one partner's gaming group takes up most weekends", "autonomy"},
        {"they consider moving in together mainly to save money", "sliding"}}},
  };
  return t;
}

constexpr std::array<std::string_view, 8> kSettings = {
    "at a crowded weekend market", "in their kitchen late at night",
    "on a long drive to a wedding", "during a rainy week indoors",
    "at a friend's birthday party", "over a rushed weekday breakfast",
    "on a hiking trail", "in a hospital waiting room"};

constexpr std::array<std::string_view, 6> kComplications = {
    "while money is tight", "with a friend watching",
    "right after a stressful week at work", "just before an important family event",
    "while one of them is exhausted", "on the anniversary of an earlier fight"};

}  // namespace

std::vector<Scenario> generate_bank(std::size_t per_category, std::uint64_t seed) {
  const std::size_t combos =
      templates().front().situations.size() * kSettings.size() * kComplications.size();
  if (per_category > combos) {
    throw std::invalid_argument(fmt::format("at most {} scenarios per category", combos));
  }
  std::vector<Scenario> out;
  for (std::size_t c = 0; c < templates().size(); ++c) {
    const auto& tpl = templates()[c];
    const auto category = static_cast<TurningPointCategory>(c);
    std::vector<std::size_t> order(combos);
    for (std::size_t i = 0; i < combos; ++i) order[i] = i;
    std::mt19937_64 rng(derive_seed(seed, {"genbank", to_token(category)}));
    // Fisher-Yates with raw draws; std::shuffle is not portable across libraries.
    for (std::size_t i = combos - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
    for (std::size_t n = 0; n < per_category; ++n) {
      const auto combo = order[n];
      const auto& situation = tpl.situations[combo / (kSettings.size() * kComplications.size())];
      const auto setting = kSettings[(combo / kComplications.size()) % kSettings.size()];
      const auto complication = kComplications[combo % kComplications.size()];
      Scenario s;
      s.id = fmt::format("{}-g{:04d}", tpl.prefix, n + 1);
      s.category = category;
      s.synopsis = fmt::format("{} {} {}.", situation.text, setting, complication);
      s.synopsis[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s.synopsis[0])));
      s.tags = {std::string(situation.tag), "generated"};
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace relate::scene
