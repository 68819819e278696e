#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtracker/wire/bytes.hpp"

namespace qtracker::dissector {

/// Raised by load_description; `line` is 1-based, 0 when unknown.
class LoadError : public std::runtime_error {
 public:
  LoadError(const std::string& where, std::size_t line, const std::string& what);
  const std::string& where() const { return where_; }
  std::size_t line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  std::string where_;
  std::size_t line_;
  std::string message_;
};

/// `ref (+|-) constant`, a bare constant, or `rest` (bytes left in scope).
struct Expr {
  enum class Base : std::uint8_t { constant, ref, param, rest };
  Base base = Base::constant;
  std::string ref;  // "field" or "field.flag"; parameter name for Base::param
  std::int64_t offset = 0;
  std::string text;
};

struct FlagDef {
  std::string name;
  unsigned bits = 1;
};

enum class FieldKind : std::uint8_t { uint, varint, bytes, structure, switch_, repeat };

struct CaseDef {
  std::uint64_t low = 0;
  std::uint64_t high = 0;  // inclusive
  std::string structure;
};

struct FieldDef {
  std::string name;
  FieldKind kind = FieldKind::uint;
  std::size_t line = 0;

  // uint: fixed `size` in bytes, or `length` expression. bytes: `length`.
  std::size_t size = 0;
  std::optional<Expr> length;
  std::vector<FlagDef> flags;  // uint only, most significant bit first
  std::string format;          // bytes: "hex" (default) or "text"

  // structure / repeat: the structure to apply.
  std::string type;
  // repeat: `count` expression, or until the end of scope when absent.
  std::optional<Expr> count;

  // switch: discriminator is a backward reference or a peek at the next
  // byte under a mask.
  std::optional<Expr> on;
  std::optional<std::uint8_t> peek_mask;
  std::vector<CaseDef> cases;
  std::string default_case;
};

struct Structure {
  std::string name;
  std::size_t line = 0;
  std::vector<FieldDef> fields;
};

struct ProtocolDescription {
  std::string protocol;
  std::string version_tag;
  std::string root;
  std::map<std::string, std::uint64_t> parameters;
  std::map<std::string, Structure> structures;

  const Structure& structure(const std::string& name) const;
};

/// Parses and validates a description: kinds, structure references, and that
/// every field reference points backward.
ProtocolDescription load_description(const std::string& yaml_text);
ProtocolDescription load_description_file(const std::filesystem::path& file);

/// Descriptions keyed by version tag.
class DescriptionSet {
 public:
  void add(ProtocolDescription d);
  const ProtocolDescription* find(const std::string& version_tag) const;
  std::vector<std::string> tags() const;

 private:
  std::map<std::string, ProtocolDescription> by_tag_;
};

/// Directory holding the shipped descriptions.
std::filesystem::path default_description_dir();
/// The shipped version-1 description.
const ProtocolDescription& quic_v1();

struct DissectedNode {
  std::string name;
  /// Field kind, the chosen case structure for a switch, or "error" /
  /// "undissected" for annotation leaves.
  std::string kind;
  std::size_t start = 0;
  std::size_t end = 0;
  wire::Bytes raw;
  std::optional<std::uint64_t> value;
  std::vector<std::pair<std::string, std::uint64_t>> flags;
  std::string text;   // rendered value for bytes fields, message for errors
  std::vector<DissectedNode> children;

  bool is_leaf() const { return children.empty(); }
  const DissectedNode* child(std::string_view name) const;
};

struct DissectOptions {
  /// Overrides description parameters (e.g. short_dcid_length).
  std::map<std::string, std::uint64_t> parameters;
  /// Structure to start from; the description root when empty.
  std::string start;
};

/// Never throws on packet content: errors become "error" leaves and unparsed
/// trailing bytes an "undissected" leaf, so the leaves always tile the input.
DissectedNode dissect(wire::ByteSpan bytes, const ProtocolDescription& desc,
                      const DissectOptions& opts = {});

/// Leaves in order; their ranges concatenate to the whole input.
std::vector<const DissectedNode*> leaves(const DissectedNode& root);
/// True when leaf ranges tile [0, size) and every child nests in its parent.
bool coverage_ok(const DissectedNode& root, std::size_t size);

std::string render_text(const DissectedNode& root);
/// A nested <ul> for embedding in a larger page.
std::string render_html_fragment(const DissectedNode& root);
/// A standalone page around the fragment.
std::string render_html(const DissectedNode& root);

}  // namespace qtracker::dissector
