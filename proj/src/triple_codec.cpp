#include "ras/triple_codec.hpp"

#include <optional>
#include <set>

#include "text_util.hpp"

namespace ras {

namespace {

struct MarkerSpan {
  std::size_t begin;
  std::size_t end;
};

// Matches `lead ws* letter ws* '>'` starting the search at `from`.
std::optional<MarkerSpan> find_marker(std::string_view text, std::size_t from,
                                      char lead, char letter) {
  for (std::size_t pos = text.find(lead, from); pos != std::string_view::npos;
       pos = text.find(lead, pos + 1)) {
    std::size_t i = pos + 1;
    while (i < text.size() && detail::is_space(text[i]))
      ++i;
    if (i >= text.size() || text[i] != letter)
      continue;
    ++i;
    while (i < text.size() && detail::is_space(text[i]))
      ++i;
    if (i < text.size() && text[i] == '>')
      return MarkerSpan{pos, i + 1};
  }
  return std::nullopt;
}

std::optional<MarkerSpan> find_open(std::string_view text, std::size_t from) {
  return find_marker(text, from, '(', 'S');
}

void check_field(std::size_t index, TripleField field, const std::string &value) {
  if (detail::trim(value).empty())
    throw InvalidTriple(index, field, "empty after trimming");
  if (contains_marker(value))
    throw InvalidTriple(index, field, "contains a triple marker");
  if (detail::trim(value).size() != value.size())
    throw InvalidTriple(index, field, "has leading or trailing whitespace");
}

} // namespace

const char *to_string(TripleField field) noexcept {
  switch (field) {
  case TripleField::Subject:
    return "subject";
  case TripleField::Predicate:
    return "predicate";
  case TripleField::Object:
    return "object";
  }
  return "?";
}

InvalidTriple::InvalidTriple(std::size_t index, TripleField field,
                             const std::string &why)
    : Error("triple " + std::to_string(index) + ": " + to_string(field) + " " +
            why),
      index_(index), field_(field) {}

bool contains_marker(std::string_view text) noexcept {
  return find_marker(text, 0, '(', 'S') || find_marker(text, 0, '|', 'P') ||
         find_marker(text, 0, '|', 'O');
}

TripleList parse_triples(std::string_view text, ParseDiagnostics *diag) {
  TripleList out;
  std::size_t skipped = 0;
  auto open = find_open(text, 0);
  while (open) {
    auto next = find_open(text, open->end);
    const std::size_t seg_end = next ? next->begin : text.size();
    const std::string_view seg = text.substr(open->end, seg_end - open->end);
    open = next;

    auto p = find_marker(seg, 0, '|', 'P');
    auto o = p ? find_marker(seg, p->end, '|', 'O') : std::nullopt;
    // The object runs to the last ')' of the segment so that parentheses
    // inside entity names survive.
    const std::size_t close = seg.rfind(')');
    if (!p || !o || close == std::string_view::npos || close < o->end) {
      ++skipped;
      continue;
    }
    Triple t{std::string(detail::trim(seg.substr(0, p->begin))),
             std::string(detail::trim(seg.substr(p->end, o->begin - p->end))),
             std::string(detail::trim(seg.substr(o->end, close - o->end)))};
    if (t.subject.empty() || t.predicate.empty() || t.object.empty() ||
        contains_marker(t.predicate) || contains_marker(t.object)) {
      ++skipped;
      continue;
    }
    out.push_back(std::move(t));
  }
  if (diag)
    diag->skipped_spans += skipped;
  return out;
}

std::string serialize_triples(std::span<const Triple> triples) {
  std::string out;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const Triple &t = triples[i];
    check_field(i, TripleField::Subject, t.subject);
    check_field(i, TripleField::Predicate, t.predicate);
    check_field(i, TripleField::Object, t.object);
    if (i)
      out += ", ";
    out += "(S> ";
    out += t.subject;
    out += "| P> ";
    out += t.predicate;
    out += "| O> ";
    out += t.object;
    out += ')';
  }
  return out;
}

TripleList dedupe(std::span<const Triple> triples) {
  TripleList out;
  std::set<const Triple *, decltype([](const Triple *a, const Triple *b) {
             return *a < *b;
           })>
      seen;
  for (const Triple &t : triples) {
    if (seen.insert(&t).second)
      out.push_back(t);
  }
  return out;
}

} // namespace ras
