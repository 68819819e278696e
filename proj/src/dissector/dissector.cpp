#include "qtracker/dissector/dissector.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "qtracker/wire/varint.hpp"

#ifndef QTRACKER_DESCRIPTION_DIR
#define QTRACKER_DESCRIPTION_DIR "descriptions"
#endif

namespace qtracker::dissector {

LoadError::LoadError(const std::string& where, std::size_t line,
                     const std::string& what)
    : std::runtime_error(where + (line ? ":" + std::to_string(line) : "") +
                         ": " + what),
      where_(where),
      line_(line),
      message_(what) {}

const Structure& ProtocolDescription::structure(const std::string& name) const {
  auto it = structures.find(name);
  if (it == structures.end()) throw std::out_of_range("no structure " + name);
  return it->second;
}

namespace {

std::size_t line_of(const YAML::Node& n) {
  const auto m = n.Mark();
  return m.line < 0 ? 0 : static_cast<std::size_t>(m.line) + 1;
}

std::string trim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

std::optional<std::uint64_t> parse_number(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty() || !std::isdigit(static_cast<unsigned char>(t[0]))) return std::nullopt;
  char* end = nullptr;
  const auto v = std::strtoull(t.c_str(), &end, 0);
  if (end == nullptr || *end != '\0') return std::nullopt;
  return v;
}

bool is_identifier(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') return false;
  }
  return true;
}

Expr parse_expr(const std::string& text, std::size_t line) {
  Expr e;
  e.text = trim(text);
  std::string head = e.text;
  const auto op = head.find_first_of("+-");
  if (op != std::string::npos) {
    const auto n = parse_number(head.substr(op + 1));
    if (!n) throw LoadError("expression", line, "bad offset in '" + e.text + "'");
    e.offset = head[op] == '+' ? static_cast<std::int64_t>(*n)
                               : -static_cast<std::int64_t>(*n);
    head = trim(head.substr(0, op));
  }
  if (auto n = parse_number(head)) {
    e.base = Expr::Base::constant;
    e.offset += static_cast<std::int64_t>(*n);
  } else if (head == "rest") {
    e.base = Expr::Base::rest;
  } else if (!head.empty() && head[0] == '$' && is_identifier(head.substr(1))) {
    e.base = Expr::Base::param;
    e.ref = head.substr(1);
  } else if (is_identifier(head)) {
    e.base = Expr::Base::ref;
    e.ref = head;
  } else {
    throw LoadError("expression", line, "cannot parse '" + e.text + "'");
  }
  return e;
}

std::vector<CaseDef> parse_case_key(const std::string& key, const std::string& target,
                                    std::size_t line) {
  std::vector<CaseDef> out;
  std::stringstream ss(key);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    CaseDef c;
    c.structure = target;
    const auto dots = item.find("..");
    if (dots != std::string::npos) {
      const auto lo = parse_number(item.substr(0, dots));
      const auto hi = parse_number(item.substr(dots + 2));
      if (!lo || !hi || *lo > *hi) throw LoadError("case", line, "bad range '" + item + "'");
      c.low = *lo;
      c.high = *hi;
    } else {
      const auto v = parse_number(item);
      if (!v) throw LoadError("case", line, "bad case key '" + item + "'");
      c.low = c.high = *v;
    }
    out.push_back(c);
  }
  if (out.empty()) throw LoadError("case", line, "empty case key");
  return out;
}

std::string scalar(const YAML::Node& n, const char* key, std::size_t line) {
  const auto v = n[key];
  if (!v || !v.IsScalar()) throw LoadError(key, line, std::string("missing '") + key + "'");
  return v.as<std::string>();
}

FieldDef parse_field(const YAML::Node& n) {
  const std::size_t line = line_of(n);
  if (!n.IsMap()) throw LoadError("field", line, "field must be a mapping");
  FieldDef f;
  f.line = line;
  f.name = scalar(n, "name", line);
  const std::string kind = scalar(n, "kind", line);
  if (kind == "uint") {
    f.kind = FieldKind::uint;
    if (n["size"]) {
      f.size = n["size"].as<std::size_t>();
      if (f.size == 0 || f.size > 8) throw LoadError(f.name, line, "uint size must be 1..8");
    } else if (n["length"]) {
      f.length = parse_expr(n["length"].as<std::string>(), line);
    } else {
      throw LoadError(f.name, line, "uint needs 'size' or 'length'");
    }
    if (const auto flags = n["flags"]) {
      unsigned total = 0;
      for (const auto& fl : flags) {
        FlagDef d{scalar(fl, "name", line_of(fl)), fl["bits"] ? fl["bits"].as<unsigned>() : 1u};
        if (d.bits == 0) throw LoadError(f.name, line_of(fl), "flag of zero bits");
        total += d.bits;
        f.flags.push_back(d);
      }
      if (f.length || total != f.size * 8) {
        throw LoadError(f.name, line, "flags must exactly cover a fixed-size uint");
      }
    }
  } else if (kind == "varint") {
    f.kind = FieldKind::varint;
  } else if (kind == "bytes") {
    f.kind = FieldKind::bytes;
    f.length = parse_expr(scalar(n, "length", line), line);
    f.format = n["format"] ? n["format"].as<std::string>() : "hex";
    if (f.format != "hex" && f.format != "text") {
      throw LoadError(f.name, line, "unknown format '" + f.format + "'");
    }
  } else if (kind == "struct") {
    f.kind = FieldKind::structure;
    f.type = scalar(n, "type", line);
  } else if (kind == "repeat") {
    f.kind = FieldKind::repeat;
    f.type = scalar(n, "type", line);
    if (n["count"]) f.count = parse_expr(n["count"].as<std::string>(), line);
  } else if (kind == "switch") {
    f.kind = FieldKind::switch_;
    if (n["on"]) {
      f.on = parse_expr(n["on"].as<std::string>(), line);
      if (f.on->base != Expr::Base::ref) throw LoadError(f.name, line, "'on' must name a field");
    } else if (n["peek"]) {
      const auto mask = parse_number(n["peek"].as<std::string>());
      if (!mask || *mask == 0 || *mask > 0xff) throw LoadError(f.name, line, "bad peek mask");
      f.peek_mask = static_cast<std::uint8_t>(*mask);
    } else {
      throw LoadError(f.name, line, "switch needs 'on' or 'peek'");
    }
    const auto cases = n["cases"];
    if (!cases || !cases.IsMap()) throw LoadError(f.name, line, "switch needs 'cases'");
    for (const auto& kv : cases) {
      auto parsed = parse_case_key(kv.first.as<std::string>(), kv.second.as<std::string>(),
                                   line_of(kv.first));
      f.cases.insert(f.cases.end(), parsed.begin(), parsed.end());
    }
    if (n["default"]) f.default_case = n["default"].as<std::string>();
  } else {
    throw LoadError(f.name, line, "unknown kind '" + kind + "'");
  }
  return f;
}

// One level of the scope chain seen while validating: names declared so far
// and the flags each one carries.
using NameScope = std::map<std::string, std::set<std::string>>;

class Validator {
 public:
  explicit Validator(const ProtocolDescription& d) : d_(d) {}

  void run() {
    if (!d_.structures.count(d_.root)) {
      throw LoadError("root", 0, "root structure '" + d_.root + "' is not defined");
    }
    std::vector<NameScope> chain;
    visit(d_.root, chain);
    for (const auto& [name, s] : d_.structures) {
      if (!reached_.count(name)) {
        throw LoadError(name, s.line, "structure is unreachable from the root");
      }
    }
  }

 private:
  void check_expr(const Expr& e, const Structure& s, const FieldDef& f,
                  const std::vector<NameScope>& chain) {
    if (e.base == Expr::Base::param) {
      if (!d_.parameters.count(e.ref)) {
        throw LoadError(f.name, f.line, "unknown parameter '$" + e.ref + "'");
      }
      return;
    }
    if (e.base != Expr::Base::ref) return;
    const auto dot = e.ref.find('.');
    const std::string field = e.ref.substr(0, dot);
    const std::string flag = dot == std::string::npos ? "" : e.ref.substr(dot + 1);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      auto hit = it->find(field);
      if (hit == it->end()) continue;
      if (!flag.empty() && !hit->second.count(flag)) {
        throw LoadError(f.name, f.line, "'" + field + "' has no flag '" + flag + "'");
      }
      return;
    }
    bool later = false;
    for (const auto& other : s.fields) later = later || other.name == field;
    throw LoadError(f.name, f.line,
                    (later ? "forward reference to '" : "dangling reference to '") + e.ref + "'");
  }

  void visit(const std::string& name, std::vector<NameScope>& chain) {
    auto it = d_.structures.find(name);
    if (it == d_.structures.end()) throw LoadError(name, 0, "undefined structure");
    if (std::find(stack_.begin(), stack_.end(), name) != stack_.end()) {
      throw LoadError(name, it->second.line, "structure contains itself");
    }
    reached_.insert(name);
    stack_.push_back(name);
    chain.emplace_back();
    const Structure& s = it->second;
    for (const auto& f : s.fields) {
      if (f.length) check_expr(*f.length, s, f, chain);
      if (f.count) check_expr(*f.count, s, f, chain);
      if (f.on) check_expr(*f.on, s, f, chain);
      auto require = [&](const std::string& target) {
        if (!d_.structures.count(target)) {
          throw LoadError(f.name, f.line, "unknown structure '" + target + "'");
        }
        visit(target, chain);
      };
      if (f.kind == FieldKind::structure || f.kind == FieldKind::repeat) require(f.type);
      if (f.kind == FieldKind::switch_) {
        std::set<std::string> targets;
        for (const auto& c : f.cases) targets.insert(c.structure);
        if (!f.default_case.empty()) targets.insert(f.default_case);
        for (const auto& t : targets) require(t);
      }
      auto& flags = chain.back()[f.name];
      for (const auto& fl : f.flags) flags.insert(fl.name);
    }
    chain.pop_back();
    stack_.pop_back();
  }

  const ProtocolDescription& d_;
  std::set<std::string> reached_;
  std::vector<std::string> stack_;
};

}  // namespace

ProtocolDescription load_description(const std::string& yaml_text) {
  YAML::Node doc;
  try {
    doc = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw LoadError("yaml", e.mark.line < 0 ? 0 : static_cast<std::size_t>(e.mark.line) + 1,
                    e.msg);
  }
  if (!doc.IsMap()) throw LoadError("document", 0, "top level must be a mapping");

  ProtocolDescription d;
  try {
    d.protocol = scalar(doc, "protocol", line_of(doc));
    d.version_tag = scalar(doc, "version", line_of(doc));
    d.root = scalar(doc, "root", line_of(doc));
    if (const auto params = doc["parameters"]) {
      for (const auto& kv : params) d.parameters[kv.first.as<std::string>()] = kv.second.as<std::uint64_t>();
    }
    const auto structs = doc["structures"];
    if (!structs || !structs.IsMap()) throw LoadError("structures", line_of(doc), "missing 'structures'");
    for (const auto& kv : structs) {
      Structure s;
      s.name = kv.first.as<std::string>();
      s.line = line_of(kv.first);
      if (!kv.second.IsSequence()) throw LoadError(s.name, s.line, "structure must be a list of fields");
      std::set<std::string> seen;
      for (const auto& fn : kv.second) {
        s.fields.push_back(parse_field(fn));
        if (!seen.insert(s.fields.back().name).second) {
          throw LoadError(s.name, s.fields.back().line, "duplicate field '" + s.fields.back().name + "'");
        }
      }
      d.structures.emplace(s.name, std::move(s));
    }
  } catch (const YAML::Exception& e) {
    throw LoadError("yaml", e.mark.line < 0 ? 0 : static_cast<std::size_t>(e.mark.line) + 1,
                    e.msg);
  }
  Validator(d).run();
  return d;
}

ProtocolDescription load_description_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError(file.string(), 0, "cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return load_description(ss.str());
  } catch (const LoadError& e) {
    throw LoadError(file.string(), e.line(), e.where() + ": " + e.message());
  }
}

void DescriptionSet::add(ProtocolDescription d) {
  const std::string tag = d.version_tag;
  by_tag_.insert_or_assign(tag, std::move(d));
}

const ProtocolDescription* DescriptionSet::find(const std::string& version_tag) const {
  auto it = by_tag_.find(version_tag);
  return it == by_tag_.end() ? nullptr : &it->second;
}

std::vector<std::string> DescriptionSet::tags() const {
  std::vector<std::string> out;
  for (const auto& [tag, _] : by_tag_) out.push_back(tag);
  return out;
}

std::filesystem::path default_description_dir() {
  if (const char* env = std::getenv("QTRACKER_DESCRIPTIONS")) return env;
  return QTRACKER_DESCRIPTION_DIR;
}

const ProtocolDescription& quic_v1() {
  static const ProtocolDescription d =
      load_description_file(default_description_dir() / "quic-v1.yaml");
  return d;
}

const DissectedNode* DissectedNode::child(std::string_view n) const {
  for (const auto& c : children) {
    if (c.name == n) return &c;
  }
  return nullptr;
}

namespace {

struct Failure {
  std::string message;
};

class Dissector {
 public:
  Dissector(wire::ByteSpan bytes, const ProtocolDescription& d, const DissectOptions& o)
      : in_(bytes), d_(d), params_(d.parameters) {
    for (const auto& [k, v] : o.parameters) params_[k] = v;
  }

  DissectedNode run(const std::string& start) {
    DissectedNode root;
    root.name = start;
    root.kind = "struct";
    std::vector<const DissectedNode*> chain;
    if (!apply(d_.structure(start), root, chain) && pos_ < in_.size()) {
      root.children.push_back(annotation("undissected", "trailing bytes"));
    }
    finish(root, 0);
    return root;
  }

 private:
  // Appends the fields of `s` to `into`. Returns true when dissection stopped
  // on an error, after the error leaf has been appended.
  bool apply(const Structure& s, DissectedNode& into,
             std::vector<const DissectedNode*>& chain) {
    chain.push_back(&into);
    bool failed = false;
    for (const auto& f : s.fields) {
      try {
        failed = field(f, into, chain);
      } catch (const Failure& e) {
        into.children.push_back(annotation("error", f.name + ": " + e.message));
        failed = true;
      }
      if (failed) break;
    }
    chain.pop_back();
    return failed;
  }

  bool field(const FieldDef& f, DissectedNode& into,
             std::vector<const DissectedNode*>& chain) {
    DissectedNode n;
    n.name = f.name;
    n.start = pos_;
    bool failed = false;
    switch (f.kind) {
      case FieldKind::uint: {
        const std::uint64_t width = f.length ? eval(*f.length, chain) : f.size;
        if (width > 8) throw Failure{"uint wider than 8 bytes"};
        need(width);
        n.kind = "uint";
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < width; ++i) v = (v << 8) | in_[pos_ + i];
        n.value = v;
        unsigned shift = static_cast<unsigned>(width * 8);
        for (const auto& fl : f.flags) {
          shift -= fl.bits;
          n.flags.emplace_back(fl.name, (v >> shift) & ((std::uint64_t{1} << fl.bits) - 1));
        }
        take(n, width);
        break;
      }
      case FieldKind::varint: {
        if (pos_ >= in_.size()) throw Failure{"truncated varint"};
        const std::size_t width = std::size_t{1} << (in_[pos_] >> 6);
        need(width);
        const auto dec = wire::decode_varint(in_.subspan(pos_, width));
        n.kind = "varint";
        n.value = dec.value;
        take(n, width);
        break;
      }
      case FieldKind::bytes: {
        const std::uint64_t len = eval(*f.length, chain);
        need(len);
        n.kind = "bytes";
        take(n, len);
        n.text = f.format == "text" ? printable(n.raw) : wire::to_hex(n.raw);
        break;
      }
      case FieldKind::structure:
        n.kind = f.type;
        failed = apply(d_.structure(f.type), n, chain);
        break;
      case FieldKind::switch_: {
        std::uint64_t v = 0;
        if (f.peek_mask) {
          if (pos_ >= in_.size()) throw Failure{"nothing to peek at"};
          v = static_cast<std::uint64_t>(in_[pos_] & *f.peek_mask) >> std::countr_zero(*f.peek_mask);
        } else {
          v = eval(*f.on, chain);
        }
        const std::string* target = nullptr;
        for (const auto& c : f.cases) {
          if (v >= c.low && v <= c.high) {
            target = &c.structure;
            break;
          }
        }
        if (!target && !f.default_case.empty()) target = &f.default_case;
        if (!target) throw Failure{"no case for value " + std::to_string(v)};
        n.kind = *target;
        n.value = v;
        failed = apply(d_.structure(*target), n, chain);
        break;
      }
      case FieldKind::repeat: {
        n.kind = "repeat";
        const Structure& elem = d_.structure(f.type);
        const std::optional<std::uint64_t> count =
            f.count ? std::optional(eval(*f.count, chain)) : std::nullopt;
        for (std::uint64_t i = 0; count ? i < *count : pos_ < in_.size(); ++i) {
          DissectedNode e;
          e.name = f.type;
          e.kind = "struct";
          e.start = pos_;
          failed = apply(elem, e, chain);
          n.children.push_back(std::move(e));
          if (failed) break;
          if (pos_ == n.children.back().start) {
            n.children.push_back(annotation("error", f.name + ": element consumed no bytes"));
            failed = true;
            break;
          }
        }
        break;
      }
    }
    into.children.push_back(std::move(n));
    return failed;
  }

  std::uint64_t eval(const Expr& e, const std::vector<const DissectedNode*>& chain) const {
    std::int64_t base = 0;
    switch (e.base) {
      case Expr::Base::constant: break;
      case Expr::Base::rest: base = static_cast<std::int64_t>(in_.size() - pos_); break;
      case Expr::Base::param: {
        auto it = params_.find(e.ref);
        if (it == params_.end()) throw Failure{"unset parameter $" + e.ref};
        base = static_cast<std::int64_t>(it->second);
        break;
      }
      case Expr::Base::ref: base = static_cast<std::int64_t>(lookup(e.ref, chain)); break;
    }
    const std::int64_t v = base + e.offset;
    if (v < 0) throw Failure{"'" + e.text + "' is negative"};
    return static_cast<std::uint64_t>(v);
  }

  static std::uint64_t lookup(const std::string& ref,
                              const std::vector<const DissectedNode*>& chain) {
    const auto dot = ref.find('.');
    const std::string name = ref.substr(0, dot);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      const DissectedNode* hit = (*it)->child(name);
      if (!hit) continue;
      if (dot == std::string::npos) {
        if (!hit->value) throw Failure{"'" + name + "' has no value"};
        return *hit->value;
      }
      const std::string flag = ref.substr(dot + 1);
      for (const auto& [fn, fv] : hit->flags) {
        if (fn == flag) return fv;
      }
      throw Failure{"'" + name + "' has no flag " + flag};
    }
    throw Failure{"'" + ref + "' not found"};
  }

  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) {
      throw Failure{"needs " + std::to_string(n) + " bytes, " +
                    std::to_string(in_.size() - pos_) + " left"};
    }
  }

  void take(DissectedNode& n, std::uint64_t len) {
    n.raw.assign(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                 in_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    n.end = pos_;
  }

  DissectedNode annotation(const std::string& kind, const std::string& message) {
    DissectedNode n;
    n.name = kind;
    n.kind = kind;
    n.start = pos_;
    n.text = message;
    take(n, in_.size() - pos_);
    return n;
  }

  // Containers span from their start to their last child.
  static void finish(DissectedNode& n, std::size_t start) {
    if (n.children.empty()) {
      if (n.end < n.start) n.end = n.start;
      return;
    }
    for (auto& c : n.children) finish(c, start);
    n.start = std::min(n.start, n.children.front().start);
    n.end = n.children.back().end;
  }

  static std::string printable(const wire::Bytes& b) {
    std::string s;
    for (auto c : b) {
      if (c >= 0x20 && c < 0x7f) {
        s += static_cast<char>(c);
      } else {
        char buf[5];
        std::snprintf(buf, sizeof buf, "\\x%02x", c);
        s += buf;
      }
    }
    return s;
  }

  wire::ByteSpan in_;
  const ProtocolDescription& d_;
  std::map<std::string, std::uint64_t> params_;
  std::size_t pos_ = 0;
};

void collect(const DissectedNode& n, std::vector<const DissectedNode*>& out) {
  if (n.is_leaf()) {
    out.push_back(&n);
    return;
  }
  for (const auto& c : n.children) collect(c, out);
}

bool nested(const DissectedNode& n) {
  for (const auto& c : n.children) {
    if (c.start < n.start || c.end > n.end || c.start > c.end || !nested(c)) return false;
  }
  return true;
}

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string describe(const DissectedNode& n) {
  std::ostringstream os;
  os << n.name;
  if (n.kind != "struct" && n.kind != "uint" && n.kind != "varint" && n.kind != "bytes" &&
      n.kind != "repeat") {
    os << " (" << n.kind << ")";
  }
  if (n.value && n.is_leaf()) os << " = " << *n.value;
  if (!n.text.empty()) os << (n.kind == "error" || n.kind == "undissected" ? ": " : " = ") << n.text;
  for (const auto& [fn, fv] : n.flags) os << " " << fn << "=" << fv;
  os << " [" << n.start << "," << n.end << ")";
  return os.str();
}

void render_text_into(const DissectedNode& n, int depth, std::string& out) {
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
  out += describe(n);
  out += '\n';
  for (const auto& c : n.children) render_text_into(c, depth + 1, out);
}

void render_html_into(const DissectedNode& n, std::string& out) {
  const char* cls = n.kind == "error" ? " class=\"error\"" : "";
  out += "<li";
  out += cls;
  out += ">";
  out += html_escape(describe(n));
  if (!n.children.empty()) {
    out += "<ul>";
    for (const auto& c : n.children) render_html_into(c, out);
    out += "</ul>";
  }
  out += "</li>\n";
}

}  // namespace

DissectedNode dissect(wire::ByteSpan bytes, const ProtocolDescription& desc,
                      const DissectOptions& opts) {
  const std::string start = opts.start.empty() ? desc.root : opts.start;
  return Dissector(bytes, desc, opts).run(start);
}

std::vector<const DissectedNode*> leaves(const DissectedNode& root) {
  std::vector<const DissectedNode*> out;
  collect(root, out);
  return out;
}

bool coverage_ok(const DissectedNode& root, std::size_t size) {
  if (root.start != 0 || root.end != size || !nested(root)) return false;
  std::size_t at = 0;
  for (const auto* l : leaves(root)) {
    if (l->start != at) return false;
    at = l->end;
  }
  return at == size;
}

std::string render_text(const DissectedNode& root) {
  std::string out;
  render_text_into(root, 0, out);
  return out;
}

std::string render_html_fragment(const DissectedNode& root) {
  std::string out = "<ul class=\"dissection\">\n";
  render_html_into(root, out);
  out += "</ul>\n";
  return out;
}

std::string render_html(const DissectedNode& root) {
  return "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>packet</title>"
         "<style>body{font-family:monospace}ul{list-style:none;padding-left:1.2em}"
         ".error{color:#b00}</style></head><body>\n" +
         render_html_fragment(root) + "</body></html>\n";
}

}  // namespace qtracker::dissector
