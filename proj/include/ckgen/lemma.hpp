#pragma once

#include <string>

namespace ckgen {

// Rule-based suffix stripper (s/es/ies/ed/ing) with consonant un-doubling,
// e-restoration and i->y restoration. An approximation: good enough to let
// "combs" satisfy the concept "comb", not a linguistic lemmatizer.
std::string lemma(const std::string& word);

}  // namespace ckgen
