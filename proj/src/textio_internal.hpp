#pragma once

#include <string>
#include <vector>

#include "mmc/event.hpp"

// Grammar-token views of single events, shared between the DSL and the move
// matcher: move templates bind and substitute exactly these tokens.
namespace mmc {

// [kind, arg tokens...] in movie-grammar form.
std::vector<std::string> event_tokens(const Event &e);
// Inverse; throws ParseError (span at line 0) on malformed tokens.
Event event_from_tokens(const std::vector<std::string> &toks);

std::string arcref_token(const ArcRef &r);
std::string arcside_token(ArcSide a);
std::string face_token(const GlobalFace &f);
std::string elem_token(ElemRef e);

}  // namespace mmc
