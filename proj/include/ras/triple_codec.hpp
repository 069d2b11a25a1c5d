#pragma once

// Wire format for subject-predicate-object facts:
//
//   (S> subject| P> predicate| O> object), (S> ...| P> ...| O> ...)
//
// Fields that contain a marker cannot be represented; serialize rejects them
// and parse skips them (counting each skip in ParseDiagnostics).

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ras/error.hpp"

namespace ras {

struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;

  auto operator<=>(const Triple &) const = default;
};

using TripleList = std::vector<Triple>;

struct ParseDiagnostics {
  std::size_t skipped_spans = 0;
};

enum class TripleField { Subject, Predicate, Object };

const char *to_string(TripleField field) noexcept;

class InvalidTriple : public Error {
public:
  InvalidTriple(std::size_t index, TripleField field, const std::string &why);
  std::size_t index() const noexcept { return index_; }
  TripleField field() const noexcept { return field_; }

private:
  std::size_t index_;
  TripleField field_;
};

/// True when `text` contains "(S>", "| P>" or "| O>", including the spaced
/// variants the parser also accepts ("(S >", "|P>").
bool contains_marker(std::string_view text) noexcept;

/// Extracts every triple span from free-form model output. Never throws.
TripleList parse_triples(std::string_view text, ParseDiagnostics *diag = nullptr);

/// Throws InvalidTriple naming the first offending triple and field.
std::string serialize_triples(std::span<const Triple> triples);

/// Keeps the first occurrence of each exact (subject, predicate, object).
TripleList dedupe(std::span<const Triple> triples);

} // namespace ras
