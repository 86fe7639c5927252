// SPDX-License-Identifier: Apache-2.0

#include "relate/persona.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "relate/hashing.hpp"
#include "relate/llm/schemas.hpp"

namespace relate::persona {

namespace fs = std::filesystem;

Json to_json(const InstrumentDoc& doc) {
  Json j = Json::object();
  j["kind"] = std::string(to_token(doc.kind));
  j["subject_id"] = doc.subject_id;
  j["reporter"] = std::string(to_token(doc.reporter));
  j["text"] = doc.text;
  return j;
}

InstrumentDoc doc_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected object");
  for (const char* key : {"kind", "subject_id", "reporter", "text"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw SchemaError(path + "/" + key, "missing or non-string field");
    }
  }
  InstrumentDoc doc;
  doc.kind = parse_token_or_throw<InstrumentKind>(j["kind"].get<std::string>(), path + "/kind");
  doc.subject_id = j["subject_id"].get<std::string>();
  doc.reporter = parse_token_or_throw<Reporter>(j["reporter"].get<std::string>(), path + "/reporter");
  doc.text = j["text"].get<std::string>();
  return doc;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += c;
    }
  }
  return out;
}

bool evidence_in_source(std::string_view snippet, std::string_view source) {
  const auto needle = normalize_whitespace(snippet);
  if (needle.empty()) return false;
  return normalize_whitespace(source).find(needle) != std::string::npos;
}

std::vector<std::string> persona_problems(const Persona& p) {
  std::vector<std::string> out;
  const auto words = word_count(p.narrative);
  if (words < kMinPersonaWords || words > kMaxPersonaWords) {
    out.push_back(fmt::format("narrative has {} words, expected {}-{}", words, kMinPersonaWords,
                              kMaxPersonaWords));
  }
  const auto rules = p.playbook.size();
  if (rules < kMinPlaybookRules || rules > kMaxPlaybookRules) {
    out.push_back(fmt::format("playbook has {} rules, expected {}-{}", rules, kMinPlaybookRules,
                              kMaxPlaybookRules));
  }
  for (std::size_t i = 0; i < p.playbook.size(); ++i) {
    if (p.playbook[i].condition.empty() || p.playbook[i].action.empty()) {
      out.push_back(fmt::format("playbook rule {} has an empty condition or action", i + 1));
    }
  }
  return out;
}

namespace {

std::string_view instrument_description(InstrumentKind kind) {
  switch (kind) {
    case InstrumentKind::Ctss: return "conflict tactics: how the subject behaves in disagreements";
    case InstrumentKind::Ersi: return "attention, task and stress traits";
    case InstrumentKind::Rpd: return "the partner's view of the subject's daily life";
    case InstrumentKind::Self: return "demographic and relationship identity";
    case InstrumentKind::Sfn: return "the partner's view of the subject's friends and interests";
    case InstrumentKind::Vplst: return "sources of tension and control in the relationship";
    case InstrumentKind::Other: return "other baseline information";
  }
  return "other baseline information";
}

std::string reporter_label(Reporter r) {
  return r == Reporter::Self ? "self-report" : "reported by partner";
}

}  // namespace

InstrumentSynopsis summarize_instrument(llm::Gateway& gateway, const InstrumentDoc& doc,
                                        Warnings& warnings) {
  if (normalize_whitespace(doc.text).empty()) {
    throw std::invalid_argument("instrument document for '" + doc.subject_id + "' is empty");
  }
  llm::PromptSpec spec;
  spec.role_tag = "instrument_summary";
  spec.response_schema = std::string(llm::schema::kSynopsis);
  spec.temperature = 0.2;
  spec.seed = stable_hash64(doc.subject_id + "/" + std::string(to_token(doc.kind)) + "/" +
                            std::string(to_token(doc.reporter)));
  spec.sections = {
      {"Task",
       "Condense the document below into a short synopsis (2-4 sentences) of concrete, "
       "relationship-relevant behaviors. Use evidence or silence: state only what the document "
       "supports, and write \"unknown\" for anything the record does not cover. Do not speculate "
       "about motives or diagnoses. Quote 1-3 short supporting snippets copied verbatim from the "
       "document."},
      {"Instrument", fmt::format("{} ({}), {}", to_token(doc.kind), instrument_description(doc.kind),
                                 reporter_label(doc.reporter))},
      {"Document", doc.text},
      {"Output", R"({"synopsis": "...", "evidence": ["verbatim snippet", "..."]})"},
  };
  auto reply = gateway.chat(spec);
  if (!reply.ok()) {
    throw SynthesisError("instrument summary for '" + doc.subject_id + "' failed: " +
                         reply.parse_error);
  }
  InstrumentSynopsis synopsis;
  synopsis.kind = doc.kind;
  synopsis.reporter = doc.reporter;
  synopsis.text = (*reply.parsed)["synopsis"].get<std::string>();
  for (const auto& item : (*reply.parsed)["evidence"]) {
    auto snippet = item.get<std::string>();
    if (evidence_in_source(snippet, doc.text)) {
      synopsis.evidence.push_back(std::move(snippet));
    } else {
      auto message = fmt::format("dropped evidence not found in {} document of '{}': \"{}\"",
                                 to_token(doc.kind), doc.subject_id, snippet);
      spdlog::warn("{}", message);
      warnings.push_back(std::move(message));
    }
  }
  return synopsis;
}

namespace {

std::string render_synopses(std::span<const InstrumentSynopsis> synopses) {
  std::string out;
  for (const auto& s : synopses) {
    out += fmt::format("[{} | {}] {}\n", to_token(s.kind), reporter_label(s.reporter), s.text);
    for (const auto& e : s.evidence) out += fmt::format("  evidence: \"{}\"\n", e);
  }
  return out;
}

Persona persona_from_reply(const Json& reply) {
  Persona p;
  p.narrative = reply["narrative"].get<std::string>();
  for (const auto& rule : reply["playbook"]) {
    p.playbook.push_back({rule["condition"].get<std::string>(), rule["action"].get<std::string>()});
  }
  return p;
}

}  // namespace

Persona fuse_persona(llm::Gateway& gateway, std::span<const InstrumentSynopsis> synopses) {
  if (synopses.empty()) throw std::invalid_argument("fuse_persona needs at least one synopsis");

  llm::PromptSpec spec;
  spec.role_tag = "persona_fusion";
  spec.response_schema = std::string(llm::schema::kPersona);
  spec.temperature = 0.3;
  spec.seed = stable_hash64(render_synopses(synopses));
  spec.sections = {
      {"Task",
       "Fuse the instrument synopses into (i) a persona written in the second person, between 200 "
       "and 300 words, describing attachment, commitment, communication patterns, regulation "
       "style and interdependence as concrete behaviors; and (ii) a playbook of 5 to 7 if->then "
       "rules. Preserve differences between self-reports and partner reports, e.g. \"you "
       "report...; your partner experiences...\". Use only the evidence given; where it is thin, "
       "say so rather than inventing detail."},
      {"Synopses", render_synopses(synopses)},
      {"Output",
       R"({"narrative": "You ...", "playbook": [{"condition": "if ...", "action": "then ..."}]})"},
  };

  for (int attempt = 0; attempt < 2; ++attempt) {
    auto reply = gateway.chat(spec);
    if (!reply.ok()) throw SynthesisError("persona fusion failed: " + reply.parse_error);
    Persona persona = persona_from_reply(*reply.parsed);
    const auto problems = persona_problems(persona);
    if (problems.empty()) {
      persona.source_synopses.assign(synopses.begin(), synopses.end());
      return persona;
    }
    std::string joined;
    for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
    if (attempt == 1) throw SynthesisError("persona failed validation after retry: " + joined);
    spdlog::warn("persona out of band ({}), asking once more", joined);
    spec.sections.push_back({"Correction", "Your previous persona was rejected: " + joined +
                                               ". Rewrite it to satisfy the limits exactly."});
  }
  throw SynthesisError("unreachable");
}

Persona build_persona(llm::Gateway& gateway, std::span<const InstrumentDoc> docs, Warnings& warnings) {
  if (docs.empty()) throw std::invalid_argument("build_persona needs at least one document");
  for (const auto& doc : docs) {
    if (doc.subject_id != docs.front().subject_id) {
      throw std::invalid_argument("documents for '" + docs.front().subject_id + "' and '" +
                                  doc.subject_id + "' mixed in one persona");
    }
  }
  std::vector<InstrumentSynopsis> synopses;
  for (const auto& doc : docs) synopses.push_back(summarize_instrument(gateway, doc, warnings));
  return fuse_persona(gateway, synopses);
}

std::vector<Dyad> pair_dyads(const std::map<std::string, Persona>& personas, Warnings& warnings) {
  auto split = [](std::string_view subject) -> std::pair<std::string, std::optional<Partner>> {
    for (auto [suffix, partner] : {std::pair{kPartnerSuffixA, Partner::A}, std::pair{kPartnerSuffixB, Partner::B}}) {
      if (subject.size() > suffix.size() && subject.substr(subject.size() - suffix.size()) == suffix) {
        return {std::string(subject.substr(0, subject.size() - suffix.size())), partner};
      }
    }
    return {std::string(subject), std::nullopt};
  };
  std::map<std::string, std::pair<const Persona*, const Persona*>> halves;
  for (const auto& [subject, p] : personas) {
    const auto [dyad_id, partner] = split(subject);
    if (!partner) {
      warnings.push_back("subject '" + subject + "' has no __A/__B suffix; skipped");
      continue;
    }
    auto& slot = halves[dyad_id];
    (*partner == Partner::A ? slot.first : slot.second) = &p;
  }
  std::vector<Dyad> out;
  for (const auto& [dyad_id, pair] : halves) {
    if (!pair.first || !pair.second) {
      warnings.push_back("dyad '" + dyad_id + "' is missing a partner; skipped");
      continue;
    }
    Dyad d;
    d.dyad_id = dyad_id;
    d.a = *pair.first;
    d.b = *pair.second;
    out.push_back(std::move(d));
  }
  return out;
}

std::string render_persona(const Persona& p) {
  std::string out = p.narrative;
  if (!p.playbook.empty()) {
    out += "\nPlaybook:";
    for (const auto& r : p.playbook) out += fmt::format("\n- {} -> {}", r.condition, r.action);
  }
  return out;
}

CommitmentEstimate infer_baseline_commitment(llm::Gateway& gateway, const Persona& a,
                                             const Persona& b, Warnings& warnings) {
  for (const auto* p : {&a, &b}) {
    if (p->narrative.empty() || p->playbook.empty()) {
      throw std::invalid_argument("baseline commitment needs two complete personas");
    }
  }
  llm::PromptSpec spec;
  spec.role_tag = "baseline_commitment";
  spec.response_schema = std::string(llm::schema::kCommitment);
  spec.temperature = 0.0;
  spec.seed = stable_hash64(a.narrative + "\x1f" + b.narrative);
  spec.sections = {
      {"Rubric", std::string(kCommitmentRubric)},
      {"Partner A Persona", render_persona(a)},
      {"Partner B Persona", render_persona(b)},
      {"Task",
       "Using only the two personas, estimate the couple's current commitment. No interaction "
       "has been observed yet."},
      {"Output", R"({"score": 3.0, "rationale": "...", "evidence_refs": []})"},
  };
  auto reply = gateway.chat(spec);
  if (!reply.ok()) throw SynthesisError("baseline commitment failed: " + reply.parse_error);
  return commitment_from_reply(*reply.parsed, warnings);
}

// ---------------------------------------------------------------------------
// Files

namespace {

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& file, const std::string& content) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << content;
}

}  // namespace

std::map<std::string, std::vector<InstrumentDoc>> load_instrument_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + " is not a directory");
  std::map<std::string, std::vector<InstrumentDoc>> out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    Json j;
    try {
      j = Json::parse(read_file(file));
    } catch (const Json::parse_error& e) {
      throw SchemaError(file.string(), e.what());
    }
    auto doc = doc_from_json(j, file.string());
    out[doc.subject_id].push_back(std::move(doc));
  }
  return out;
}

void write_instrument_dir(const fs::path& dir, std::span<const InstrumentDoc> docs) {
  for (const auto& doc : docs) {
    const auto name = fmt::format("{}_{}.json", to_token(doc.kind), to_token(doc.reporter));
    write_file(dir / doc.subject_id / name, to_json(doc).dump(2) + "\n");
  }
}

Persona load_persona(const fs::path& file) {
  Json j;
  try {
    j = Json::parse(read_file(file));
  } catch (const Json::parse_error& e) {
    throw SchemaError(file.string(), e.what());
  }
  return from_json<Persona>(j, file.string());
}

void save_persona(const fs::path& file, const Persona& persona) {
  write_file(file, canonical_dump(relate::to_json(persona)) + "\n");
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

std::string_view to_string(AttachmentStyle s) {
  switch (s) {
    case AttachmentStyle::Secure: return "secure";
    case AttachmentStyle::Anxious: return "anxious";
    case AttachmentStyle::Avoidant: return "avoidant";
  }
  return "secure";
}

std::string_view to_string(ConflictRole r) {
  switch (r) {
    case ConflictRole::Collaborator: return "collaborator";
    case ConflictRole::Pursuer: return "pursuer";
    case ConflictRole::Withdrawer: return "withdrawer";
  }
  return "collaborator";
}

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T, std::size_t N>
const T& pick(std::mt19937_64& rng, const std::array<T, N>& items) {
  return items[rng() % N];
}

std::string ctss_self(ConflictRole role) {
  switch (role) {
    case ConflictRole::Collaborator:
      return "When we disagree I try to say what is bothering me early and calmly. I usually ask "
             "what my partner needs before defending myself. After an argument I am the one who "
             "suggests we sit down and talk it through, and I apologize when I got something wrong.";
    case ConflictRole::Pursuer:
      return "When something bothers me I bring it up right away and keep pressing until we "
             "settle it. I raise my voice when I feel ignored. If my partner tries to end the "
             "conversation I follow them from room to room because I cannot let it go.";
    case ConflictRole::Withdrawer:
      return "When an argument starts I go quiet and wait for it to pass. I often leave the room "
             "or stop answering texts until I calm down. I avoid bringing up problems because "
             "talking about them usually makes things worse.";
  }
  return {};
}

std::string ctss_partner(ConflictRole role) {
  switch (role) {
    case ConflictRole::Collaborator:
      return "My partner stays calm in disagreements and listens before answering. They are "
             "usually the first to apologize and they follow up the next day to check that we "
             "are okay.";
    case ConflictRole::Pursuer:
      return "My partner gets loud and critical when we fight and brings up old grievances. They "
             "do not give me space to think, and I sometimes feel cornered.";
    case ConflictRole::Withdrawer:
      return "My partner shuts down during arguments and sometimes stonewalls for a whole "
             "evening. They rarely apologize first, and problems tend to stay unresolved.";
  }
  return {};
}

std::string ersi_text(AttachmentStyle s) {
  switch (s) {
    case AttachmentStyle::Secure:
      return "I stay organized under pressure and can usually finish tasks even when stressed. "
             "I ask for help when I need it and I can tell my partner when I am overwhelmed.";
    case AttachmentStyle::Anxious:
      return "Stress makes it hard for me to concentrate, and I check my phone constantly when I "
             "am worried about us. I ruminate about small things my partner says.";
    case AttachmentStyle::Avoidant:
      return "I handle stress by throwing myself into work and keeping busy. I prefer to deal "
             "with problems on my own and I do not like depending on anyone.";
  }
  return {};
}

std::string rpd_text(AttachmentStyle s) {
  switch (s) {
    case AttachmentStyle::Secure:
      return "Day to day, my partner is steady and affectionate. They check in during the day "
             "and follow through on the plans we make together.";
    case AttachmentStyle::Anxious:
      return "My partner texts many times a day and gets upset if I do not reply quickly. They "
             "need a lot of reassurance that I still want to be together.";
    case AttachmentStyle::Avoidant:
      return "My partner keeps a separate routine and often spends evenings alone. They seldom "
             "talk about feelings and change the subject when I ask about the future.";
  }
  return {};
}

std::string sfn_text(AttachmentStyle s) {
  switch (s) {
    case AttachmentStyle::Secure:
      return "My partner has a close group of friends who like me, and we share weekend hobbies "
             "like hiking and cooking.";
    case AttachmentStyle::Anxious:
      return "My partner gives up time with friends to be with me and worries when I go out "
             "without them.";
    case AttachmentStyle::Avoidant:
      return "My partner has a wide circle of friends and spends a lot of time with them instead "
             "of with me; some of them do not approve of our relationship.";
  }
  return {};
}

std::string vplst_text(AttachmentStyle s) {
  switch (s) {
    case AttachmentStyle::Secure:
      return "Our main tension is over money and chores, and we usually find a compromise we "
             "can both live with.";
    case AttachmentStyle::Anxious:
      return "I get jealous when my partner talks about an ex, and we fight about how much time "
             "they spend online with other people.";
    case AttachmentStyle::Avoidant:
      return "We argue about commitment; my partner wants more closeness than I am ready for, "
             "and I sometimes feel controlled when they ask where I am.";
  }
  return {};
}

std::string self_text(std::mt19937_64& rng, OutcomeLabel status) {
  static constexpr std::array<std::string_view, 8> kJobs = {
      "nurse", "warehouse supervisor", "teacher", "software tester",
      "line cook", "bank teller", "electrician", "graduate student"};
  static constexpr std::array<std::string_view, 3> kLiving = {
      "We live together in a rented apartment.", "We live apart but stay over most weekends.",
      "We share a house with a roommate."};
  const int age = 22 + static_cast<int>(rng() % 14);
  const int years = 1 + static_cast<int>(rng() % 8);
  return fmt::format("I am {} years old and work as a {}. We have been together for {} years and "
                     "we are currently {}. {}",
                     age, pick(rng, kJobs), years,
                     status == OutcomeLabel::Dating    ? "dating"
                     : status == OutcomeLabel::Engaged ? "engaged"
                                                       : "married",
                     pick(rng, kLiving));
}

std::vector<InstrumentDoc> subject_docs(std::mt19937_64& rng, const std::string& subject,
                                        const SyntheticProfile& p, OutcomeLabel status) {
  return {
      {InstrumentKind::Ctss, subject, ctss_self(p.conflict_role), Reporter::Self},
      {InstrumentKind::Ctss, subject, ctss_partner(p.conflict_role), Reporter::Partner},
      {InstrumentKind::Ersi, subject, ersi_text(p.attachment), Reporter::Self},
      {InstrumentKind::Rpd, subject, rpd_text(p.attachment), Reporter::Partner},
      {InstrumentKind::Self, subject, self_text(rng, status), Reporter::Self},
      {InstrumentKind::Sfn, subject, sfn_text(p.attachment), Reporter::Partner},
      {InstrumentKind::Vplst, subject, vplst_text(p.attachment), Reporter::Self},
  };
}

SyntheticProfile random_profile(std::mt19937_64& rng) {
  static constexpr std::array kStyles = {AttachmentStyle::Secure, AttachmentStyle::Secure,
                                         AttachmentStyle::Anxious, AttachmentStyle::Avoidant};
  static constexpr std::array kRoles = {ConflictRole::Collaborator, ConflictRole::Pursuer,
                                        ConflictRole::Withdrawer};
  return {pick(rng, kStyles), pick(rng, kRoles)};
}

double dissolution_risk(const SyntheticProfile& a, const SyntheticProfile& b) {
  double risk = 0.15;
  for (const auto* p : {&a, &b}) {
    if (p->attachment != AttachmentStyle::Secure) risk += 0.12;
    if (p->conflict_role == ConflictRole::Withdrawer) risk += 0.08;
  }
  const bool demand_withdraw =
      (a.conflict_role == ConflictRole::Pursuer && b.conflict_role == ConflictRole::Withdrawer) ||
      (b.conflict_role == ConflictRole::Pursuer && a.conflict_role == ConflictRole::Withdrawer);
  if (demand_withdraw) risk += 0.15;
  return std::min(risk, 0.9);
}

}  // namespace

std::vector<SyntheticDyad> generate_synthetic_cohort(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {"synthetic-cohort"}));
  std::vector<SyntheticDyad> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticDyad d;
    d.dyad_id = fmt::format("dyad{:03d}", i + 1);
    d.a = random_profile(rng);
    d.b = random_profile(rng);

    const double status_draw = uniform01(rng);
    d.baseline = status_draw < 0.5   ? OutcomeLabel::Dating
                 : status_draw < 0.7 ? OutcomeLabel::Engaged
                                     : OutcomeLabel::Married;
    if (uniform01(rng) < dissolution_risk(d.a, d.b)) {
      d.followup = OutcomeLabel::BrokenUpOrDivorced;
    } else if (d.baseline != OutcomeLabel::Married &&
               uniform01(rng) < (d.baseline == OutcomeLabel::Engaged ? 0.6 : 0.35)) {
      d.followup = OutcomeLabel::Married;
    } else {
      d.followup = d.baseline;
    }

    auto docs_a = subject_docs(rng, d.dyad_id + std::string(kPartnerSuffixA), d.a, d.baseline);
    auto docs_b = subject_docs(rng, d.dyad_id + std::string(kPartnerSuffixB), d.b, d.baseline);
    d.docs = std::move(docs_a);
    d.docs.insert(d.docs.end(), docs_b.begin(), docs_b.end());
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace relate::persona
