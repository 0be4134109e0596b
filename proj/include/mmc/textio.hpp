#pragma once

#include "mmc/search.hpp"

// The movie DSL: line-oriented text for movies, move catalogs, and
// certificates. parse/print round-trip exactly; the printer is
// deterministic with sorted identifiers.
namespace mmc {

struct Span {
  int line = 0;  // 1-based
  int col = 0;   // 1-based
  int len = 0;
};

struct ParseError : std::runtime_error {
  ParseError(Span s, bool semantic, const std::string &msg)
      : std::runtime_error(msg), span(s), semantic(semantic) {}
  Span span;
  // Dangling or inconsistent identifiers rather than bad syntax.
  bool semantic = false;
};

Movie parse_movie(const std::string &src);
// Throws MovieError when m does not run.
std::string print_movie(const Movie &m);

std::vector<MoveSchema> parse_catalog(const std::string &src);
std::string print_catalog(const std::vector<MoveSchema> &catalog);

Certificate parse_certificate(const std::string &src);
std::string print_certificate(const Certificate &c);

}  // namespace mmc
