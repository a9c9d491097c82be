#include "help/plan_dsl.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>
#include <variant>

namespace help {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_inline_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Length in bytes of a whitespace code point starting at s[i], or 0.
std::size_t whitespace_len(std::string_view s, std::size_t i) {
  const auto b = [&](std::size_t k) { return static_cast<unsigned char>(s[i + k]); };
  const std::size_t left = s.size() - i;
  const unsigned char c = b(0);
  if (c == ' ' || (c >= '\t' && c <= '\r')) return 1;
  if (left >= 2 && c == 0xC2 && (b(1) == 0x85 || b(1) == 0xA0)) return 2;
  if (left >= 3) {
    if (c == 0xE1 && b(1) == 0x9A && b(2) == 0x80) return 3;  // U+1680
    if (c == 0xE2 && b(1) == 0x80 &&
        ((b(2) >= 0x80 && b(2) <= 0x8A) || b(2) == 0xA8 || b(2) == 0xA9 || b(2) == 0xAF))
      return 3;                                                        // U+2000..200A, 2028, 2029, 202F
    if (c == 0xE2 && b(1) == 0x81 && b(2) == 0x9F) return 3;           // U+205F
    if (c == 0xE3 && b(1) == 0x80 && b(2) == 0x80) return 3;           // U+3000
  }
  return 0;
}

bool strip_quote_pair(std::string& s) {
  static constexpr std::array<std::pair<std::string_view, std::string_view>, 5> kPairs{{
      {"'", "'"},
      {"\"", "\""},
      {"`", "`"},
      {"\xE2\x80\x98", "\xE2\x80\x99"},  // ‘ ’
      {"\xE2\x80\x9C", "\xE2\x80\x9D"},  // “ ”
  }};
  for (const auto& [open, close] : kPairs) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
      s = s.substr(open.size(), s.size() - open.size() - close.size());
      return true;
    }
  }
  return false;
}

class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < text.size(); ++i)
      if (text[i] == '\n') line_starts_.push_back(i + 1);
  }

  std::size_t line_of(std::size_t pos) const {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), pos);
    return static_cast<std::size_t>(it - line_starts_.begin());
  }
  std::size_t column_of(std::size_t pos) const { return pos - line_starts_[line_of(pos) - 1] + 1; }

  std::string_view text() const { return text_; }

 private:
  std::string_view text_;
  std::vector<std::size_t> line_starts_;
};

struct RawCall {
  std::string name;
  std::vector<std::string> args;
  std::size_t start = 0;
  std::size_t name_pos = 0;
  std::size_t end = 0;
};

struct CallSyntaxError {
  std::size_t pos;
  std::string message;
};

// Parses `[N.] ident ( args )` starting at pos. Returns the call or the
// position and reason of the first syntax error.
std::variant<RawCall, CallSyntaxError> parse_call(std::string_view text, std::size_t pos) {
  const std::size_t n = text.size();
  auto skip_inline = [&] {
    while (pos < n && is_inline_space(text[pos])) ++pos;
  };
  auto skip_all = [&] {
    while (pos < n && (is_inline_space(text[pos]) || text[pos] == '\n')) ++pos;
  };

  RawCall call;
  call.start = pos;
  if (pos < n && std::isdigit(static_cast<unsigned char>(text[pos]))) {
    while (pos < n && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos < n && (text[pos] == '.' || text[pos] == ')' || text[pos] == ':')) {
      ++pos;
    } else {
      return CallSyntaxError{pos, "expected '.' after step number"};
    }
    skip_inline();
  }
  if (pos >= n || !is_ident_start(text[pos])) return CallSyntaxError{pos, "expected skill name"};
  const std::size_t name_start = pos;
  call.name_pos = pos;
  while (pos < n && is_ident_char(text[pos])) ++pos;
  call.name = ascii_lower(text.substr(name_start, pos - name_start));
  skip_inline();
  if (pos >= n || text[pos] != '(') return CallSyntaxError{pos, "expected '(' after skill name"};
  ++pos;
  skip_all();
  if (pos < n && text[pos] == ')') {
    call.end = pos + 1;
    return call;
  }
  while (true) {
    skip_all();
    if (pos >= n) return CallSyntaxError{pos, "unterminated argument list"};
    std::string arg;
    const std::size_t arg_pos = pos;
    if (text[pos] == '\'' || text[pos] == '"') {
      const char quote = text[pos++];
      const std::size_t close = text.find(quote, pos);
      const std::size_t newline = text.find('\n', pos);
      if (close == std::string_view::npos || (newline != std::string_view::npos && newline < close))
        return CallSyntaxError{arg_pos, "unterminated quoted argument"};
      arg = std::string(text.substr(pos, close - pos));
      pos = close + 1;
    } else {
      while (pos < n && text[pos] != ',' && text[pos] != ')' && text[pos] != '\n' && text[pos] != '(')
        ++pos;
      if (pos >= n || text[pos] == '\n' || text[pos] == '(')
        return CallSyntaxError{pos, "expected ',' or ')' in argument list"};
      arg = std::string(text.substr(arg_pos, pos - arg_pos));
    }
    arg = normalize_arg(arg);
    if (arg.empty()) return CallSyntaxError{arg_pos, "empty argument"};
    call.args.push_back(std::move(arg));
    skip_all();
    if (pos >= n) return CallSyntaxError{pos, "unterminated argument list"};
    if (text[pos] == ',') {
      ++pos;
      continue;
    }
    if (text[pos] == ')') {
      call.end = pos + 1;
      return call;
    }
    return CallSyntaxError{pos, "expected ',' or ')' in argument list"};
  }
}

bool is_separator(char c) { return is_inline_space(c) || c == '\n' || c == ',' || c == ';'; }

// True if a call to a registered skill starts anywhere at or after pos.
bool has_later_call(std::string_view text, std::size_t pos, const SkillRegistry& registry) {
  for (std::size_t p = pos; p < text.size(); ++p) {
    if (!is_ident_start(text[p]) || (p > 0 && is_ident_char(text[p - 1]))) continue;
    auto result = parse_call(text, p);
    if (auto* call = std::get_if<RawCall>(&result); call && registry.contains(call->name)) return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(ParamRole role) { return role == ParamRole::Object ? "object" : "location"; }

ParamRole param_role_from_string(std::string_view text) {
  if (text == "object") return ParamRole::Object;
  if (text == "location") return ParamRole::Location;
  throw std::invalid_argument("unknown parameter role: " + std::string(text));
}

std::string_view to_string(PlanErrorKind kind) {
  switch (kind) {
    case PlanErrorKind::EmptyInput: return "EmptyInput";
    case PlanErrorKind::UnknownSkill: return "UnknownSkill";
    case PlanErrorKind::ArityMismatch: return "ArityMismatch";
    case PlanErrorKind::SyntaxError: return "SyntaxError";
    case PlanErrorKind::InvalidPlan: return "InvalidPlan";
  }
  return "?";
}

PlanError::PlanError(PlanErrorKind kind, std::string message, std::size_t line, std::size_t column)
    : std::runtime_error(std::move(message)), kind_(kind), line_(line), column_(column) {}

// ---------------------------------------------------------------------------
// SkillRegistry

SkillRegistry::SkillRegistry(std::vector<SkillSchema> skills) : skills_(std::move(skills)) {
  std::unordered_set<std::string> seen;
  for (auto& s : skills_) {
    s.name = ascii_lower(s.name);
    for (auto& a : s.aliases) a = ascii_lower(a);
    if (s.name.empty()) throw std::invalid_argument("skill with empty name");
    if (!seen.insert(s.name).second) throw std::invalid_argument("duplicate skill name: " + s.name);
    for (const auto& a : s.aliases)
      if (!seen.insert(a).second) throw std::invalid_argument("duplicate skill alias: " + a);
    if (s.name == kDoneSkill && !s.params.empty())
      throw std::invalid_argument("done() must take no parameters");
  }
}

SkillRegistry SkillRegistry::from_json(const nlohmann::json& doc) {
  std::vector<SkillSchema> skills;
  for (const auto& entry : doc.at("skills")) {
    SkillSchema s;
    s.name = entry.at("name").get<std::string>();
    for (const auto& p : entry.value("params", nlohmann::json::array()))
      s.params.push_back(param_role_from_string(p.get<std::string>()));
    s.description = entry.value("description", "");
    s.aliases = entry.value("aliases", std::vector<std::string>{});
    s.location_optional = entry.value("location_optional", false);
    skills.push_back(std::move(s));
  }
  return SkillRegistry(std::move(skills));
}

SkillRegistry SkillRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open skill registry: " + path.string());
  return from_json(nlohmann::json::parse(in));
}

SkillRegistry SkillRegistry::default_registry() {
  using enum ParamRole;
  return SkillRegistry({
      {"move_to", {Object, Location}, "Navigate to object o at location l.", {}, true},
      {"pick_up", {Object, Location}, "Pick up object o at location l.", {}, false},
      {"put", {Object, Location}, "Place the held object o at location l.", {}, false},
      {"done", {}, "Plan terminator.", {}, false},
  });
}

SkillRegistry SkillRegistry::alfred_registry() {
  using enum ParamRole;
  return SkillRegistry({
      {"gotolocation", {Location}, "GotoLocation", {"goto"}, false},
      {"pickupobject", {Object}, "PickupObject", {"pickup"}, false},
      {"toggleobject", {Object}, "ToggleObject", {"toggle"}, false},
      {"putobject", {Object, Location}, "PutObject", {"put"}, false},
      {"sliceobject", {Object}, "SliceObject", {"slice"}, false},
      {"cleanobject", {Object}, "CleanObject", {"clean"}, false},
      {"heatobject", {Object}, "HeatObject", {"heat"}, false},
      {"coolobject", {Object}, "CoolObject", {"cool"}, false},
      {"done", {}, "Plan terminator.", {}, false},
  });
}

const SkillSchema* SkillRegistry::find(std::string_view name) const {
  for (const auto& s : skills_) {
    if (s.name == name) return &s;
    if (std::find(s.aliases.begin(), s.aliases.end(), name) != s.aliases.end()) return &s;
  }
  return nullptr;
}

nlohmann::json SkillRegistry::to_json() const {
  auto skills = nlohmann::json::array();
  for (const auto& s : skills_) {
    nlohmann::json entry{{"name", s.name}, {"description", s.description}};
    auto params = nlohmann::json::array();
    for (auto p : s.params) params.push_back(std::string(to_string(p)));
    entry["params"] = params;
    if (!s.aliases.empty()) entry["aliases"] = s.aliases;
    if (s.location_optional) entry["location_optional"] = true;
    skills.push_back(std::move(entry));
  }
  return {{"skills", skills}};
}

// ---------------------------------------------------------------------------
// Parsing

ParseResult parse_plan_detailed(std::string_view text, const SkillRegistry& registry) {
  const bool blank = std::all_of(text.begin(), text.end(),
                                 [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
  if (blank) throw PlanError(PlanErrorKind::EmptyInput, "plan text is empty");

  const Cursor cursor(text);
  ParseResult result;
  std::size_t pos = 0;
  const std::size_t n = text.size();

  while (true) {
    while (pos < n && is_separator(text[pos])) ++pos;
    if (pos >= n) break;

    if (result.plan.terminated) {
      result.warnings.push_back("ignored text after done() at line " +
                                std::to_string(cursor.line_of(pos)));
      break;
    }

    auto parsed = parse_call(text, pos);
    if (auto* err = std::get_if<CallSyntaxError>(&parsed)) {
      const bool have_actions = !result.plan.actions.empty();
      if (have_actions && !has_later_call(text, pos, registry)) {
        result.warnings.push_back("ignored trailing text at line " +
                                  std::to_string(cursor.line_of(pos)));
        break;
      }
      throw PlanError(PlanErrorKind::SyntaxError,
                      err->message + " at line " + std::to_string(cursor.line_of(err->pos)) +
                          ", column " + std::to_string(cursor.column_of(err->pos)),
                      cursor.line_of(err->pos), cursor.column_of(err->pos));
    }

    auto& call = std::get<RawCall>(parsed);
    const std::size_t line = cursor.line_of(call.name_pos);
    const SkillSchema* schema = registry.find(call.name);
    if (schema == nullptr) {
      throw PlanError(PlanErrorKind::UnknownSkill,
                      "unknown skill '" + call.name + "' at line " + std::to_string(line), line,
                      cursor.column_of(call.name_pos));
    }
    const std::size_t expected = schema->arity();
    if (call.args.size() + 1 == expected && schema->location_optional &&
        schema->params.back() == ParamRole::Location) {
      call.args.emplace_back(kUnspecified);
    }
    if (call.args.size() != expected) {
      throw PlanError(PlanErrorKind::ArityMismatch,
                      "skill '" + schema->name + "' expects " + std::to_string(expected) +
                          " argument(s), got " + std::to_string(call.args.size()) + " at line " +
                          std::to_string(line),
                      line, cursor.column_of(call.name_pos));
    }
    if (schema->name == kDoneSkill) {
      result.plan.terminated = true;
    } else {
      result.plan.actions.push_back(Action{schema->name, std::move(call.args)});
    }
    pos = call.end;
  }

  if (result.plan.actions.empty() && !result.plan.terminated)
    throw PlanError(PlanErrorKind::EmptyInput, "no actions found");
  return result;
}

Plan parse_plan(std::string_view text, const SkillRegistry& registry) {
  return parse_plan_detailed(text, registry).plan;
}

// ---------------------------------------------------------------------------
// Validation and rendering

std::vector<Violation> validate_plan(const Plan& plan, const SkillRegistry& registry) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < plan.actions.size(); ++i) {
    const auto& a = plan.actions[i];
    if (a.is_done()) {
      out.push_back({Violation::Kind::MisplacedDone, i, "done() inside the action list"});
      continue;
    }
    const SkillSchema* schema = registry.find(a.skill);
    if (schema == nullptr) {
      out.push_back({Violation::Kind::UnknownSkill, i, "unknown skill '" + a.skill + "'"});
      continue;
    }
    if (a.args.size() != schema->arity()) {
      out.push_back({Violation::Kind::ArityMismatch, i,
                     "skill '" + a.skill + "' expects " + std::to_string(schema->arity()) +
                         " argument(s), got " + std::to_string(a.args.size())});
    }
    for (const auto& arg : a.args) {
      if (arg.empty()) out.push_back({Violation::Kind::EmptyArgument, i, "empty argument"});
    }
  }
  return out;
}

std::string render_action(const Action& action) {
  std::string out = action.skill + "(";
  for (std::size_t i = 0; i < action.args.size(); ++i) {
    if (i > 0) out += ", ";
    const auto& arg = action.args[i];
    const bool has_single = arg.find('\'') != std::string::npos;
    if (has_single && arg.find('"') != std::string::npos)
      throw PlanError(PlanErrorKind::InvalidPlan, "argument contains both quote characters: " + arg);
    const char quote = has_single ? '"' : '\'';
    out += quote;
    out += arg;
    out += quote;
  }
  out += ")";
  return out;
}

std::string render_plan(const Plan& plan, const SkillRegistry& registry) {
  if (auto violations = validate_plan(plan, registry); !violations.empty())
    throw PlanError(PlanErrorKind::InvalidPlan, "invalid plan: " + violations.front().message);
  return render_plan(plan);
}

std::string render_plan(const Plan& plan) {
  std::ostringstream out;
  std::size_t step = 1;
  for (const auto& a : plan.actions) {
    if (step > 1) out << '\n';
    out << step++ << ". " << render_action(a);
  }
  if (plan.terminated) {
    if (step > 1) out << '\n';
    out << step << ". done()";
  }
  return out.str();
}

std::string normalize_arg(std::string_view raw) {
  // Unicode whitespace becomes ASCII space; runs collapse to one.
  std::string collapsed;
  collapsed.reserve(raw.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < raw.size();) {
    if (std::size_t w = whitespace_len(raw, i); w > 0) {
      pending_space = true;
      i += w;
      continue;
    }
    if (pending_space && !collapsed.empty()) collapsed += ' ';
    pending_space = false;
    collapsed += static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i])));
    ++i;
  }
  // Quotes may wrap further whitespace: peel until stable.
  while (true) {
    while (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
    while (!collapsed.empty() && collapsed.front() == ' ') collapsed.erase(collapsed.begin());
    if (!strip_quote_pair(collapsed)) break;
  }
  return collapsed;
}

}  // namespace help
