// SPDX-License-Identifier: Apache-2.0

#include "relate/synthetic_backend.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <regex>

#include <fmt/format.h>

#include "relate/hashing.hpp"

namespace relate::synth {

using persona::AttachmentStyle;
using persona::ConflictRole;

std::string_view to_string(Move m) {
  switch (m) {
    case Move::Repair: return "repair";
    case Move::Commit: return "commit";
    case Move::Withdraw: return "withdraw";
    case Move::Escalate: return "escalate";
    case Move::Deflect: return "deflect";
    case Move::Rival: return "rival";
    case Move::Exit: return "exit";
  }
  return "deflect";
}

namespace {

// "{o}" stands for the other partner's letter.
const std::map<Move, std::vector<std::string_view>>& option_templates() {
  static const std::map<Move, std::vector<std::string_view>> t = {
      {Move::Repair,
       {"Apologizes to Partner {o} for their part and asks what would help",
        "Suggests a walk with Partner {o} to talk it through calmly",
        "Acknowledges Partner {o}'s feelings and proposes a concrete fix"}},
      {Move::Commit,
       {"Proposes a shared plan with Partner {o} for the coming months",
        "Offers to put both names on the next big commitment",
        "Tells Partner {o} plainly that they want the relationship to last"}},
      {Move::Withdraw,
       {"Leaves the room and stops responding for the evening",
        "Puts on headphones and goes quiet",
        "Goes out alone without saying when they will be back"}},
      {Move::Escalate,
       {"Raises their voice and lists past grievances",
        "Demands an answer immediately and follows Partner {o} from room to room",
        "Criticizes Partner {o}'s character in front of others"}},
      {Move::Deflect,
       {"Changes the subject to weekend plans",
        "Makes a joke to lighten the mood and moves on",
        "Agrees quickly to end the discussion without resolving anything"}},
      {Move::Rival,
       {"Quietly replies to a flirtatious message from someone else",
        "Spends the evening texting an ex"}},
      {Move::Exit,
       {"Suggests that they take a break from the relationship",
        "Packs a bag and goes to stay with a friend for a few days"}},
  };
  return t;
}

std::string fill_other(std::string_view tpl, char other) {
  std::string out(tpl);
  if (auto pos = out.find("{o}"); pos != std::string::npos) out.replace(pos, 3, std::string(1, other));
  return out;
}

}  // namespace

std::optional<Move> classify_option(std::string_view description) {
  for (const auto& [move, templates] : option_templates()) {
    for (auto tpl : templates) {
      for (char other : {'A', 'B'}) {
        if (fill_other(tpl, other) == description) return move;
      }
    }
  }
  return std::nullopt;
}

Archetype read_archetype(std::string_view text) {
  Archetype a;
  static const std::regex attachment(R"(reads as (secure|anxious|avoidant))");
  static const std::regex role(R"(act as an? (collaborator|pursuer|withdrawer))");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(text.begin(), text.end(), m, attachment)) {
    const auto s = m[1].str();
    a.attachment = s == "anxious"    ? AttachmentStyle::Anxious
                   : s == "avoidant" ? AttachmentStyle::Avoidant
                                     : AttachmentStyle::Secure;
  }
  if (std::regex_search(text.begin(), text.end(), m, role)) {
    const auto s = m[1].str();
    a.role = s == "pursuer"      ? ConflictRole::Pursuer
             : s == "withdrawer" ? ConflictRole::Withdrawer
                                 : ConflictRole::Collaborator;
  }
  return a;
}

AffectVector lexicon_affect(std::string_view text) {
  static const std::array<std::vector<std::string_view>, kAffectDims> lexicon = {{
      {"laugh", "smile", "happy", "celebrat", "relie", "warm", "joke", "glad", "delight"},
      {"sad", "cry", "tears", "miss", "lonel", "loss", "grief", "alone", "funeral"},
      {"worr", "afraid", "anxious", "fear", "scared", "nervous", "biopsy", "hospital"},
      {"unexpect", "sudden", "surpris", "discover", "notification", "shock"},
      {"furious", "angry", "anger", "shout", "slam", "raises", "criticiz", "demand", "grievance",
       "bitter", "yell"},
      {"contempt", "cutting", "disgust", "mock", "sneer", "gross"},
      {"apolog", "trust", "support", "together", "promise", "listen", "acknowledg", "care",
       "forgiv"},
      {"plan", "future", "next", "soon", "deadline", "upcoming", "propos", "ring", "hope"},
  }};
  std::array<double, kAffectDims> counts{};
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    for (std::size_t d = 0; d < kAffectDims; ++d) {
      for (auto stem : lexicon[d]) {
        if (word.compare(0, stem.size(), stem) == 0) {
          counts[d] += 1.0;
          break;
        }
      }
    }
    word.clear();
  };
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
  std::array<double, kAffectDims> values{};
  for (std::size_t d = 0; d < kAffectDims; ++d) values[d] = std::min(1.0, 0.3 * counts[d]);
  return AffectVector::clamped(values);
}

// ---------------------------------------------------------------------------

namespace {

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[pick(items.size())];
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[pick(i)]);
  }

 private:
  std::mt19937_64 rng_;
};

const std::string& section(const llm::PromptSpec& spec, std::string_view name) {
  static const std::string empty;
  const auto* s = spec.section(name);
  return s ? *s : empty;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    out.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    current += text[i];
    const bool terminal = text[i] == '.' || text[i] == '!' || text[i] == '?';
    if (terminal && (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      if (auto t = trim(current); !t.empty()) out.push_back(t);
      current.clear();
    }
  }
  if (auto t = trim(current); !t.empty()) out.push_back(t);
  return out;
}

std::string lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool contains_any(std::string_view haystack, std::initializer_list<std::string_view> needles) {
  return std::any_of(needles.begin(), needles.end(),
                     [&](std::string_view n) { return haystack.find(n) != std::string_view::npos; });
}

/// "field: token" lines back into a state; unknown lines are ignored.
RelationshipState parse_state(std::string_view text) {
  RelationshipState state;
  for (const auto& line : split_lines(text)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    set_state_field(state, trim(line.substr(0, colon)), trim(line.substr(colon + 1)));
  }
  return state;
}

std::optional<TurningPointCategory> frame_category(std::string_view frame) {
  for (const auto& line : split_lines(frame)) {
    if (line.rfind("Category: ", 0) == 0) return parse_token<TurningPointCategory>(line.substr(10));
  }
  return std::nullopt;
}

std::string frame_field(std::string_view frame, std::string_view key) {
  for (const auto& line : split_lines(frame)) {
    if (line.size() > key.size() + 2 && line.compare(0, key.size(), key) == 0 &&
        line[key.size()] == ':') {
      return line.substr(key.size() + 2);
    }
  }
  return {};
}

struct TranscriptDecision {
  std::string event_id;
  char actor = 'A';
  std::string option_id;
  std::string description;
  std::optional<Move> move;
};

std::vector<TranscriptDecision> transcript_decisions(std::string_view transcript) {
  static const std::regex line_re(R"(^\[(s\d+e\d+)\] Partner ([AB]) chose (o\d+): (.*)$)");
  std::vector<TranscriptDecision> out;
  for (const auto& line : split_lines(transcript)) {
    std::smatch m;
    if (std::regex_match(line, m, line_re)) {
      TranscriptDecision d;
      d.event_id = m[1].str();
      d.actor = m[2].str()[0];
      d.option_id = m[3].str();
      d.description = m[4].str();
      d.move = classify_option(d.description);
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::optional<int> transcript_scene_index(std::string_view transcript) {
  static const std::regex id_re(R"(\[s(\d+)e\d+\])");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(transcript.begin(), transcript.end(), m, id_re)) return std::stoi(m[1].str());
  return std::nullopt;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

// ---------------------------------------------------------------------------
// Persona synthesis

Json summarize(const llm::PromptSpec& spec) {
  const auto& doc = section(spec, "Document");
  const bool partner_report = section(spec, "Instrument").find("reported by partner") != std::string::npos;
  auto sentences = split_sentences(doc);
  std::string body;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, sentences.size()); ++i) {
    body += (body.empty() ? "" : " ") + sentences[i];
  }
  if (body.empty()) body = "unknown";
  Json evidence = Json::array();
  if (!sentences.empty()) evidence.push_back(sentences.front());
  return {{"synopsis", std::string(partner_report ? "Partner report: " : "Self-report: ") + body},
          {"evidence", evidence}};
}

Archetype archetype_from_synopses(std::string_view text) {
  const auto t = lower(text);
  Archetype a;
  if (contains_any(t, {"reassurance", "jealous", "ruminate", "worries when"})) {
    a.attachment = AttachmentStyle::Anxious;
  } else if (contains_any(t, {"on my own", "evenings alone", "seldom talk about feelings",
                              "more closeness than i am ready"})) {
    a.attachment = AttachmentStyle::Avoidant;
  }
  if (contains_any(t, {"go quiet", "stonewall", "shuts down"})) {
    a.role = ConflictRole::Withdrawer;
  } else if (contains_any(t, {"keep pressing", "raise my voice", "gets loud"})) {
    a.role = ConflictRole::Pursuer;
  }
  return a;
}

Json fuse(const llm::PromptSpec& spec, Draw& draw) {
  const auto& synopses = section(spec, "Synopses");
  const auto arch = archetype_from_synopses(synopses);

  std::vector<std::string> parts;
  static const std::regex self_re(
      R"(I am (\d+) years old and work as an? ([^.]+)\. We have been together for (\d+) years and we are currently (\w+))");
  std::smatch m;
  std::string s(synopses);
  if (std::regex_search(s, m, self_re)) {
    parts.push_back(fmt::format("You are {} years old and work as a {}. You and your partner have "
                                "been together for {} years and are currently {}.",
                                m[1].str(), m[2].str(), m[3].str(), m[4].str()));
  } else {
    parts.push_back("The records say little about your age, work or living situation, so treat "
                    "those details as unknown.");
  }

  switch (arch.attachment) {
    case AttachmentStyle::Secure:
      parts.push_back(
          "You feel at ease depending on your partner and letting them depend on you. When "
          "something worries you, you say so and expect to be heard, and you can wait for a reply "
          "without spiraling. You keep promises and notice when your partner needs support.");
      break;
    case AttachmentStyle::Anxious:
      parts.push_back(
          "You often worry that your partner's interest is fading. A slow reply can pull your "
          "attention away from everything else, and you look for reassurance through frequent "
          "messages and check-ins. Small comments stay with you for days, and you sometimes test "
          "closeness instead of asking for it directly.");
      break;
    case AttachmentStyle::Avoidant:
      parts.push_back(
          "You value your independence and feel crowded when closeness is expected on a schedule. "
          "You prefer to handle stress alone, often by working or keeping busy, and you rarely "
          "volunteer feelings. Talk about the future can feel like pressure, so you tend to change "
          "the subject.");
      break;
  }
  parts.push_back(fmt::format("Your attachment pattern reads as {}.", persona::to_string(arch.attachment)));

  switch (arch.role) {
    case ConflictRole::Collaborator:
      parts.push_back(
          "In disagreements you tend to act as a collaborator: you raise concerns early and "
          "calmly, ask what your partner needs, and usually offer the first apology once things "
          "cool down.");
      break;
    case ConflictRole::Pursuer:
      parts.push_back(
          "In disagreements you tend to act as a pursuer: you raise problems immediately and keep "
          "pressing until they are settled, and your voice rises when you feel ignored.");
      break;
    case ConflictRole::Withdrawer:
      parts.push_back(
          "In disagreements you tend to act as a withdrawer: you go quiet, leave the room or stop "
          "answering messages, and hope the problem fades without being discussed.");
      break;
  }

  // Keep the partner's account of the subject's conflict style verbatim.
  for (const auto& line : split_lines(synopses)) {
    const auto marker = line.find("[ctss | reported by partner] Partner report: ");
    if (marker != std::string::npos) {
      const auto quote = split_sentences(line.substr(marker + 45));
      if (!quote.empty()) {
        parts.push_back("You report your own conflict behavior in your own terms; your partner "
                        "experiences it this way: \"" + quote.front() + "\"");
      }
    }
  }

  switch (arch.attachment) {
    case AttachmentStyle::Secure:
      parts.push_back("Day to day your partner sees you as steady and affectionate, someone who "
                      "checks in and follows through. You share friends and weekend hobbies, and "
                      "tension over money or chores usually ends in a compromise.");
      parts.push_back("You treat the relationship as a long-term project and invest in shared "
                      "routines.");
      break;
    case AttachmentStyle::Anxious:
      parts.push_back("Your partner notices how much you need to hear from them during the day. "
                      "You give up time with friends to be together, and jealousy about exes or "
                      "online contacts is a recurring source of fights.");
      parts.push_back("You want this relationship to last and fear losing it, which can make you "
                      "hold on too tightly.");
      break;
    case AttachmentStyle::Avoidant:
      parts.push_back("Your partner sees you keep a separate routine and spend many evenings "
                      "apart. You have a wide circle of friends, some of whom are cool toward the "
                      "relationship, and arguments often circle around commitment and control.");
      parts.push_back("You care about this relationship but keep one foot outside it to protect "
                      "your freedom.");
      break;
  }

  static const std::vector<std::string_view> padding = {
      "Where the records are silent, for example on money habits, your behavior is unknown "
      "rather than assumed.",
      "You notice small gestures and remember them long after they happen.",
      "Stressful weeks make every pattern described here stronger.",
      "You respond better to concrete requests than to hints.",
      "Routines such as shared meals matter to you more than you usually admit.",
      "You are more patient with friends than with yourself.",
  };
  std::string narrative;
  for (const auto& p : parts) narrative += (narrative.empty() ? "" : " ") + p;
  for (std::size_t i = 0; i < padding.size() && word_count(narrative) < kMinPersonaWords + 15; ++i) {
    narrative += " " + std::string(padding[i]);
  }

  Json playbook = Json::array();
  auto rule = [&](std::string_view c, std::string_view a) {
    playbook.push_back({{"condition", std::string(c)}, {"action", std::string(a)}});
  };
  switch (arch.attachment) {
    case AttachmentStyle::Secure:
      rule("If your partner seems distant", "then you ask directly what is going on.");
      rule("If plans change at the last minute", "then you adapt and propose a new time.");
      rule("If your partner needs support", "then you make time even when you are busy.");
      break;
    case AttachmentStyle::Anxious:
      rule("If your partner is slow to reply", "then you send several follow-up messages.");
      rule("If an ex or rival comes up", "then you ask pointed questions and seek reassurance.");
      rule("If your partner wants time alone", "then you worry it means they are pulling away.");
      break;
    case AttachmentStyle::Avoidant:
      rule("If your partner asks about the future", "then you change the subject.");
      rule("If you feel crowded", "then you make plans with friends or work late.");
      rule("If your partner is upset", "then you offer practical help rather than talk.");
      break;
  }
  switch (arch.role) {
    case ConflictRole::Collaborator:
      rule("If a disagreement starts", "then you name the problem calmly and listen.");
      rule("If you hurt your partner", "then you apologize and propose a fix.");
      break;
    case ConflictRole::Pursuer:
      rule("If you feel ignored", "then you raise your voice and keep pressing.");
      rule("If your partner walks away", "then you follow to finish the argument.");
      break;
    case ConflictRole::Withdrawer:
      rule("If an argument escalates", "then you leave the room and go silent.");
      rule("If an old problem resurfaces", "then you avoid the topic.");
      break;
  }
  if (draw.uniform() < 0.5) {
    rule("If a milestone comes up", "then you look to your partner's reaction before committing.");
  }
  return {{"narrative", narrative}, {"playbook", playbook}};
}

double dissolution_risk(const Archetype& a, const Archetype& b) {
  double risk = 0.15;
  for (const auto* p : {&a, &b}) {
    if (p->attachment != AttachmentStyle::Secure) risk += 0.12;
    if (p->role == ConflictRole::Withdrawer) risk += 0.08;
  }
  const bool demand_withdraw =
      (a.role == ConflictRole::Pursuer && b.role == ConflictRole::Withdrawer) ||
      (b.role == ConflictRole::Pursuer && a.role == ConflictRole::Withdrawer);
  if (demand_withdraw) risk += 0.15;
  return risk;
}

Json baseline_commitment(const llm::PromptSpec& spec, Draw& draw) {
  const auto a = read_archetype(section(spec, "Partner A Persona"));
  const auto b = read_archetype(section(spec, "Partner B Persona"));
  const double risk = dissolution_risk(a, b);
  const double score = round2(std::clamp(3.6 - 1.5 * (risk - 0.15) + 0.2 * (draw.uniform() - 0.5),
                                         1.0, 5.0));
  return {{"score", score},
          {"rationale", fmt::format("Persona-only estimate: attachment patterns {} and {}, conflict "
                                    "roles {} and {}.",
                                    persona::to_string(a.attachment), persona::to_string(b.attachment),
                                    persona::to_string(a.role), persona::to_string(b.role))},
          {"evidence_refs", Json::array()}};
}

// ---------------------------------------------------------------------------
// Affect

Json affect_json(const AffectVector& v) {
  Json j = Json::object();
  for (std::size_t d = 0; d < kAffectDims; ++d) j[std::string(kAffectNames[d])] = round2(v[d]);
  return j;
}

Json appraisal(const llm::PromptSpec& spec, Draw& draw) {
  const auto& context = section(spec, "Context");
  // Recent text dominates how the agent feels right now.
  const std::string_view recent =
      std::string_view(context).substr(context.size() > 700 ? context.size() - 700 : 0);
  auto values = lexicon_affect(recent).values();
  const auto arch = read_archetype(section(spec, "Your Persona"));
  if (arch.attachment == AttachmentStyle::Anxious) values[2] += 0.15;
  if (arch.attachment == AttachmentStyle::Avoidant) values[6] -= 0.1;
  if (arch.attachment == AttachmentStyle::Secure) values[6] += 0.15;
  for (auto& v : values) v += 0.1 * draw.uniform();
  const auto affect = AffectVector::clamped(values);

  static constexpr std::array<std::string_view, kAffectDims> thoughts = {
      "This could actually turn out well for us, and I want to enjoy it.",
      "Something feels like it is slipping away and I do not know how to hold on to it.",
      "I am afraid of what happens if I get this wrong.",
      "I did not see this coming and need a moment to catch up.",
      "I am tired of being the one who gets blamed for this.",
      "Part of me is repelled by how this is being handled.",
      "I think we can get through this if we are honest with each other.",
      "I keep thinking about what this means for the months ahead.",
  };
  Json j = affect_json(affect);
  j["internal_thought"] = std::string(thoughts[affect.dominant()]);
  return j;
}

// ---------------------------------------------------------------------------
// Scene master steps

Json choose_scenario(const llm::PromptSpec& spec, Draw& draw) {
  std::vector<std::string> ids;
  for (const auto& line : split_lines(section(spec, "Candidates"))) {
    const auto space = line.find(" [");
    if (space != std::string::npos) ids.push_back(line.substr(0, space));
  }
  if (ids.empty()) return {{"scenario_id", "none"}};
  return {{"scenario_id", draw.pick(ids)}};
}

Json expand(const llm::PromptSpec& spec, Draw& draw) {
  const auto& scenario = section(spec, "Scenario");
  const auto open = scenario.find('[');
  const auto close = scenario.find("]: ");
  std::string synopsis = close == std::string::npos ? scenario : scenario.substr(close + 3);
  const auto category = open != std::string::npos && close != std::string::npos
                            ? parse_token<TurningPointCategory>(scenario.substr(open + 1, close - open - 1))
                            : std::nullopt;
  const auto c = category.value_or(TurningPointCategory::RelationshipDevelopment);

  struct Frame {
    std::string_view theme, goal_a, goal_b, conflict, stakes;
  };
  static const std::array<Frame, 6> frames = {{
      {"figuring out what they are to each other", "find out whether this is going somewhere",
       "keep things light without losing the connection",
       "whether to name the relationship or keep it undefined",
       "a chance at something serious versus another false start"},
      {"building a shared life one habit at a time", "make the new routine feel like theirs",
       "keep some space of their own inside it", "how much of their lives to merge and how fast",
       "trust in small promises that later ones will rest on"},
      {"an outside pressure testing the couple", "protect the relationship from the pressure",
       "respond to the pressure without giving up something important",
       "whose needs come first when the outside world pushes in",
       "whether the relationship can bend without breaking"},
      {"a rupture that needs repair", "be heard about what went wrong",
       "get past the fight without losing face", "who owes whom an apology and what it should fix",
       "the goodwill between them and the pattern for future fights"},
      {"a step that raises the cost of leaving", "move the relationship forward",
       "be sure before making it official", "whether both are ready for the same step",
       "a shared future that is hard to unwind"},
      {"a modern complication with no script", "set a rule they can both live with",
       "keep a habit that matters to them", "what counts as fair or private between them",
       "the norms their relationship will run on"},
  }};
  const auto& f = frames[static_cast<std::size_t>(c)];
  static const std::vector<std::string> settings = {
      "their shared kitchen on a weeknight", "a busy cafe near work", "a parked car outside a friend's house",
      "a quiet park bench at dusk", "the living room with the television muted", "a crowded train home"};
  const auto lower_syn = lower(synopsis);
  Json npcs = Json::array();
  std::optional<std::string> third;
  if (contains_any(lower_syn, {"parent", "family", "aunt", "sibling"})) {
    npcs.push_back("a family member");
    third = "a family member with strong opinions";
  } else if (contains_any(lower_syn, {"friend", "coworker", "party"})) {
    npcs.push_back("a mutual friend");
    third = "a friend who sees only one side";
  } else if (contains_any(lower_syn, {"ex ", "ex.", "ex,", "someone else", "flirt"})) {
    npcs.push_back("an ex-partner");
    third = "an ex-partner";
  }
  Json j = {{"theme", std::string(f.theme)},
            {"setting", draw.pick(settings)},
            {"NPC", npcs},
            {"current_scene", synopsis},
            {"character_1_goal", std::string(f.goal_a)},
            {"character_2_goal", std::string(f.goal_b)},
            {"scene_conflict", std::string(f.conflict)},
            {"stakes", std::string(f.stakes)}};
  j["third_party"] = third ? Json(*third) : Json(nullptr);
  return j;
}

Json narrate(const llm::PromptSpec& spec, Draw& draw) {
  static const std::regex progress_re(R"(decision_points=(\d+) of (\d+); narration_steps=(\d+) of (\d+))");
  std::smatch m;
  const auto& progress = section(spec, "Progress");
  int decisions = 0, max_decisions = 4, steps = 0;
  if (std::regex_search(progress, m, progress_re)) {
    decisions = std::stoi(m[1].str());
    max_decisions = std::stoi(m[2].str());
    steps = std::stoi(m[3].str());
  }
  // Scene-level choices hash only the scene frame so they stay fixed across
  // the scene's narration calls.
  const auto& frame = section(spec, "Scene");
  const auto scene_hash = stable_hash64(frame);
  const int target = std::min(max_decisions, 1 + static_cast<int>(scene_hash % 3));
  const int steps_needed = 1 + static_cast<int>(stable_hash64(frame + std::to_string(decisions)) % 3);

  static const std::vector<std::string> beats = {
      "For a moment neither of them says anything, and the room feels smaller.",
      "A phone buzzes on the table and both of them glance at it.",
      "One of them starts to speak, stops, and looks out of the window instead.",
      "The conversation drifts to small things while the real issue waits.",
      "A memory of an easier evening surfaces and fades.",
      "Outside, someone laughs loudly, which only sharpens the quiet between them.",
      "They both reach for the same cup and pull back at once.",
      "The moment everyone has been circling finally arrives.",
      "Tension builds as the topic comes back around.",
      "A small gesture lands better than either expected.",
  };
  static const std::vector<std::string> endings = {
      "The evening winds down and they go to bed with the matter settled for now.",
      "They part for the night, each replaying what just happened.",
      "The scene closes on a quiet that could mean peace or distance.",
  };
  if (decisions >= target) {
    return {{"narration", draw.pick(endings)}, {"stop", true}, {"acting_partner", nullptr}};
  }
  if (steps + 1 >= steps_needed) {
    const bool a_first = (scene_hash >> 8) % 2 == 0;
    const bool a_now = a_first == (decisions % 2 == 0);
    return {{"narration", draw.pick(beats)}, {"stop", true}, {"acting_partner", a_now ? "A" : "B"}};
  }
  return {{"narration", draw.pick(beats)}, {"stop", false}, {"acting_partner", nullptr}};
}

Json offer_options(const llm::PromptSpec& spec, Draw& draw) {
  const auto actor = trim(section(spec, "Acting Partner"));
  const char other = actor == "A" ? 'B' : 'A';
  const auto state = parse_state(section(spec, "Relationship State"));
  const auto category = frame_category(section(spec, "Scene"));

  std::vector<Move> pool = {Move::Commit, Move::Withdraw, Move::Escalate, Move::Deflect};
  if (category == TurningPointCategory::ChallengesOrTests ||
      category == TurningPointCategory::OtherModernTurningPoints ||
      state.alternatives == Alternatives::Salient || state.alternatives == Alternatives::Hot) {
    pool.push_back(Move::Rival);
  }
  if (state.conflict == Conflict::Active || state.conflict == Conflict::Unresolved ||
      state.breakup_marker == BreakupMarker::Soft) {
    pool.push_back(Move::Exit);
  }
  draw.shuffle(pool);
  const std::size_t count = 3 + draw.pick(2);
  std::vector<Move> moves = {Move::Repair};
  for (std::size_t i = 0; moves.size() < count && i < pool.size(); ++i) moves.push_back(pool[i]);
  draw.shuffle(moves);

  Json options = Json::array();
  for (auto move : moves) {
    const auto& templates = option_templates().at(move);
    options.push_back({{"description", fill_other(templates[draw.pick(templates.size())], other)},
                       {"actor", actor}});
  }
  return {{"options", options}};
}

double move_weight(Move move, const Archetype& a) {
  static const std::map<AttachmentStyle, std::array<double, 7>> base = {
      //                          repair commit withdraw escalate deflect rival exit
      {AttachmentStyle::Secure, {5.0, 4.0, 0.5, 0.4, 1.0, 0.1, 0.1}},
      {AttachmentStyle::Anxious, {2.0, 2.0, 0.5, 2.5, 1.0, 0.4, 0.6}},
      {AttachmentStyle::Avoidant, {1.0, 0.6, 3.0, 0.5, 3.0, 0.8, 0.9}},
  };
  double w = base.at(a.attachment)[static_cast<std::size_t>(move)];
  if (a.role == ConflictRole::Collaborator && move == Move::Repair) w += 2.0;
  if (a.role == ConflictRole::Pursuer && move == Move::Escalate) w += 2.0;
  if (a.role == ConflictRole::Withdrawer && move == Move::Withdraw) w += 2.0;
  return w;
}

Json decide(const llm::PromptSpec& spec, Draw& draw) {
  struct Listed {
    std::string id, description;
    double weight;
    std::optional<Move> move;
  };
  const auto arch = read_archetype(section(spec, "Your Persona"));
  std::vector<Listed> listed;
  for (const auto& line : split_lines(section(spec, "Action Options"))) {
    const auto colon = line.find(": ");
    if (colon == std::string::npos) continue;
    Listed l{line.substr(0, colon), line.substr(colon + 2), 1.0, std::nullopt};
    l.move = classify_option(l.description);
    if (l.move) l.weight = move_weight(*l.move, arch);
    listed.push_back(std::move(l));
  }
  if (listed.empty()) return {{"action", "nothing to choose"}, {"reasoning", "no options listed"}};
  // Weighted pick; independent of listing order because options are visited
  // in id order.
  std::sort(listed.begin(), listed.end(), [](const Listed& x, const Listed& y) {
    return x.description < y.description;
  });
  double total = 0.0;
  for (const auto& l : listed) total += l.weight;
  double u = draw.uniform() * total;
  const Listed* chosen = &listed.back();
  for (const auto& l : listed) {
    if (u < l.weight) {
      chosen = &l;
      break;
    }
    u -= l.weight;
  }
  static const std::map<Move, std::string_view> tags = {
      {Move::Repair, "trust"}, {Move::Commit, "anticipation"}, {Move::Withdraw, "sadness"},
      {Move::Escalate, "anger"}, {Move::Deflect, "fear"},       {Move::Rival, "surprise"},
      {Move::Exit, "sadness"}};
  Json j = {{"action", chosen->id + ": " + chosen->description},
            {"reasoning", fmt::format("This fits how I handle moments like this as someone whose "
                                      "attachment pattern is {} and who tends to be a {}.",
                                      persona::to_string(arch.attachment),
                                      persona::to_string(arch.role))},
            {"confidence", round2(0.5 + 0.5 * chosen->weight / total)}};
  j["emotion_tags"] = Json::array({std::string(tags.at(chosen->move.value_or(Move::Deflect)))});
  return j;
}

Json infer(const llm::PromptSpec& spec) {
  const auto prev = parse_state(section(spec, "Previous State"));
  const auto& frame = section(spec, "Scene");
  const auto category = frame_category(frame).value_or(TurningPointCategory::RelationshipDevelopment);
  const auto situation = lower(frame_field(frame, "Current scene"));
  const auto decisions = transcript_decisions(section(spec, "Transcript"));
  auto chose = [&](Move m) {
    return std::count_if(decisions.begin(), decisions.end(),
                         [&](const TranscriptDecision& d) { return d.move == m; });
  };
  const bool prior_conflict = prev.conflict == Conflict::Active ||
                              prev.conflict == Conflict::Unresolved ||
                              prev.conflict == Conflict::Brewing;
  const bool conflict_scene = category == TurningPointCategory::ConflictAndRepair;

  RelationshipState s;
  if (chose(Move::Escalate) > 0) {
    s.conflict = chose(Move::Repair) > chose(Move::Escalate) ? Conflict::Repaired : Conflict::Active;
  } else if (chose(Move::Withdraw) > 0 || chose(Move::Exit) > 0) {
    s.conflict = Conflict::Unresolved;
  } else if (chose(Move::Repair) > 0) {
    s.conflict = (prior_conflict || conflict_scene) ? Conflict::Repaired : Conflict::None;
  } else if (chose(Move::Deflect) > 0) {
    s.conflict = Conflict::Brewing;
  } else {
    s.conflict = prev.conflict == Conflict::Unknown ? Conflict::None : prev.conflict;
  }

  if (chose(Move::Repair) > 0) {
    s.repair_outcome = s.conflict == Conflict::Repaired || s.conflict == Conflict::None
                           ? RepairOutcome::Successful
                           : RepairOutcome::Attempted;
  } else if (prior_conflict || conflict_scene) {
    s.repair_outcome = chose(Move::Withdraw) + chose(Move::Escalate) > 0 ? RepairOutcome::Failed
                                                                        : RepairOutcome::None;
  } else {
    s.repair_outcome = RepairOutcome::None;
  }

  if (chose(Move::Commit) > 0) {
    s.clarity = Clarity::Explicit;
  } else if (prev.clarity != Clarity::Unknown) {
    s.clarity = prev.clarity;
  } else {
    s.clarity = category == TurningPointCategory::InitialFormation ? Clarity::Unclear : Clarity::Tacit;
  }

  if (chose(Move::Commit) > 0) {
    s.constraints = (prev.constraints == Constraints::Emerging || prev.constraints == Constraints::Accrued ||
                     category == TurningPointCategory::DeepeningOrMilestones)
                        ? Constraints::Accrued
                        : Constraints::Emerging;
  } else {
    s.constraints = prev.constraints == Constraints::Unknown ? Constraints::None : prev.constraints;
  }

  if (chose(Move::Rival) > 0) {
    s.alternatives = (prev.alternatives == Alternatives::Salient || prev.alternatives == Alternatives::Hot)
                         ? Alternatives::Hot
                         : Alternatives::Salient;
  } else if (chose(Move::Repair) + chose(Move::Commit) > 0 || prev.alternatives == Alternatives::Unknown) {
    s.alternatives = Alternatives::Quiet;
  } else {
    s.alternatives = prev.alternatives;
  }

  if (contains_any(situation, {"job", "city", "move", "apart", "months", "schedule", "shift", "lease"})) {
    s.transition = prev.transition == Transition::Upcoming ? Transition::Underway : Transition::Upcoming;
  } else {
    s.transition = prev.transition == Transition::Unknown || prev.transition == Transition::Underway
                       ? Transition::None
                       : prev.transition;
  }

  if (contains_any(situation, {"parent", "family", "friend", "aunt", "sibling"})) {
    s.network = chose(Move::Repair) + chose(Move::Commit) > 0 ? Network::Supportive
                : chose(Move::Escalate) + chose(Move::Exit) > 0 ? Network::Opposed
                                                                : Network::Mixed;
  } else {
    s.network = prev.network == Network::Unknown ? Network::Neutral : prev.network;
  }

  if (chose(Move::Exit) > 0) {
    s.breakup_marker = (prev.breakup_marker == BreakupMarker::Soft || chose(Move::Exit) > 1)
                           ? BreakupMarker::Hard
                           : BreakupMarker::Soft;
  } else if (prev.breakup_marker == BreakupMarker::Soft && chose(Move::Repair) + chose(Move::Commit) == 0) {
    s.breakup_marker = BreakupMarker::Soft;
  } else {
    s.breakup_marker = BreakupMarker::None;
  }

  Json j = Json::object();
  for (auto field : kStateFields) j[std::string(field)] = std::string(state_field_token(s, field));
  j["category"] = std::string(to_token(category));
  return j;
}

Json commitment(const llm::PromptSpec& spec, Draw& draw) {
  const auto& previous = section(spec, "Previous Estimate");
  double score = 3.2;
  if (!previous.empty() && std::isdigit(static_cast<unsigned char>(previous.front()))) {
    score = std::stod(previous);
  }
  const auto decisions = transcript_decisions(section(spec, "Transcript"));
  const auto state = parse_state(section(spec, "Relationship State"));
  static const std::map<Move, double> delta = {
      {Move::Repair, 0.06}, {Move::Commit, 0.1}, {Move::Withdraw, -0.15}, {Move::Escalate, -0.2},
      {Move::Deflect, -0.04}, {Move::Rival, -0.22}, {Move::Exit, -0.4}};
  Json refs = Json::array();
  std::vector<std::string> moves;
  for (const auto& d : decisions) {
    if (!d.move) continue;
    score += delta.at(*d.move);
    refs.push_back(d.event_id);
    moves.push_back(fmt::format("Partner {} chose to {}", d.actor, lower(d.description)));
  }
  // Every turning point costs a little; partners who mostly repair hold steady.
  score -= 0.1;
  if (state.breakup_marker == BreakupMarker::Hard) score -= 0.5;
  if (state.breakup_marker == BreakupMarker::Soft) score -= 0.15;
  if (state.constraints == Constraints::Accrued) score += 0.05;
  if (state.alternatives == Alternatives::Hot) score -= 0.1;
  if (state.conflict == Conflict::Repaired) score += 0.05;
  score += 0.1 * (draw.uniform() - 0.5);
  score = round2(std::clamp(score, 1.0, 5.0));

  std::string rationale = "Investments, alternatives and repair weighed on this scene's evidence";
  if (!moves.empty()) {
    rationale += ": ";
    for (std::size_t i = 0; i < moves.size(); ++i) rationale += (i ? "; " : "") + moves[i];
  }
  rationale += fmt::format(". Conflict is {}, repair {}, constraints {}.",
                           to_token(state.conflict), to_token(state.repair_outcome),
                           to_token(state.constraints));
  return {{"score", score}, {"rationale", rationale}, {"evidence_refs", refs}};
}

Json summarize_scene(const llm::PromptSpec& spec) {
  std::string previous = section(spec, "Previous Summary");
  if (previous.rfind("(first scene", 0) == 0) previous.clear();
  const auto& frame = section(spec, "Scene");
  const auto& transcript = section(spec, "Transcript");
  const auto index = transcript_scene_index(transcript).value_or(0);
  std::string piece = fmt::format("Scene {}: {}", index + 1, frame_field(frame, "Current scene"));
  for (const auto& d : transcript_decisions(transcript)) {
    piece += fmt::format(" Partner {} chose to {}.", d.actor, lower(d.description));
  }

  static const std::regex scene_re(R"(Scene \d+: )");
  std::vector<std::string> pieces;
  auto begin = std::sregex_iterator(previous.begin(), previous.end(), scene_re);
  std::vector<std::size_t> starts;
  for (auto it = begin; it != std::sregex_iterator(); ++it) starts.push_back(static_cast<std::size_t>(it->position()));
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const auto end = i + 1 < starts.size() ? starts[i + 1] : previous.size();
    pieces.push_back(trim(previous.substr(starts[i], end - starts[i])));
  }
  pieces.push_back(piece);
  auto join = [&] {
    std::string out;
    for (const auto& p : pieces) out += (out.empty() ? "" : " ") + p;
    return out;
  };
  while (pieces.size() > 1 && word_count(join()) > 140) pieces.erase(pieces.begin());
  auto summary = join();
  if (word_count(summary) > 140) {
    // A single oversized scene piece: keep its first 140 words.
    std::string cut;
    std::size_t n = 0;
    std::size_t i = 0;
    while (i < summary.size() && n < 140) {
      while (i < summary.size() && std::isspace(static_cast<unsigned char>(summary[i]))) ++i;
      const auto s = i;
      while (i < summary.size() && !std::isspace(static_cast<unsigned char>(summary[i]))) ++i;
      if (s < i) {
        cut += (cut.empty() ? "" : " ") + summary.substr(s, i - s);
        ++n;
      }
    }
    summary = cut;
  }
  return {{"summary", summary}};
}

Json predict_end_state(const llm::PromptSpec& spec, Draw& draw) {
  const auto* estimates = spec.section("Commitment Estimates");
  if (estimates) {
    double final_score = 3.0;
    static const std::regex score_re(R"(^Scene \d+: ([0-9.]+))");
    for (const auto& line : split_lines(*estimates)) {
      std::smatch m;
      if (std::regex_search(line, m, score_re)) final_score = std::stod(m[1].str());
    }
    const auto& outcome = section(spec, "Run Outcome");
    if (outcome.rfind("Ended early", 0) == 0 || final_score < 2.6) {
      return {{"label", "broken_up_or_divorced"}};
    }
    return {{"label", final_score >= 3.5 ? "married" : "dating"}};
  }
  const auto a = read_archetype(section(spec, "Partner A Persona"));
  const auto b = read_archetype(section(spec, "Partner B Persona"));
  if (draw.uniform() < dissolution_risk(a, b)) return {{"label", "broken_up_or_divorced"}};
  return {{"label", draw.uniform() < 0.5 ? "married" : "dating"}};
}

}  // namespace

SyntheticBackend::SyntheticBackend(std::uint64_t seed, std::size_t dimension)
    : seed_(seed), embedder_(dimension, seed) {}

llm::Completion SyntheticBackend::complete(const llm::PromptSpec& spec, const std::string&) {
  const auto key = fmt::format("{}\x1f{}\x1f{}", seed_, spec.role_tag, spec.render());
  Draw draw(stable_hash64(key));
  const auto& tag = spec.role_tag;
  Json reply;
  if (tag == "instrument_summary") {
    reply = summarize(spec);
  } else if (tag == "persona_fusion") {
    reply = fuse(spec, draw);
  } else if (tag == "baseline_commitment") {
    reply = baseline_commitment(spec, draw);
  } else if (tag == "appraisal") {
    reply = appraisal(spec, draw);
  } else if (tag == "affect_embed") {
    reply = affect_json(lexicon_affect(section(spec, "Text")));
  } else if (tag == "scenario_selection") {
    reply = choose_scenario(spec, draw);
  } else if (tag == "scene_expansion") {
    reply = expand(spec, draw);
  } else if (tag == "narration") {
    reply = narrate(spec, draw);
  } else if (tag == "options") {
    reply = offer_options(spec, draw);
  } else if (tag == "decision") {
    reply = decide(spec, draw);
  } else if (tag == "state_inference") {
    reply = infer(spec);
  } else if (tag == "commitment") {
    reply = commitment(spec, draw);
  } else if (tag == "summary") {
    reply = summarize_scene(spec);
  } else if (tag == "end_state") {
    reply = predict_end_state(spec, draw);
  } else {
    throw llm::ConfigError("synthetic backend has no behavior for role_tag '" + tag + "'");
  }
  llm::Completion c;
  c.text = reply.dump();
  c.usage.prompt_tokens = static_cast<int>(word_count(spec.render()));
  c.usage.completion_tokens = static_cast<int>(word_count(c.text));
  return c;
}

}  // namespace relate::synth
