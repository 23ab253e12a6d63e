#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "lyr/ast.hpp"

namespace lyr {

/// Declared signatures the sort checker resolves against.
struct SymbolTable {
  std::set<std::string> domains;
  std::map<std::string, std::vector<std::string>> predicates;  // name -> input sorts
  struct FuncSig {
    std::vector<std::string> inputs;
    std::string output;
  };
  std::map<std::string, FuncSig> functions;
  std::map<std::string, std::string> individuals;  // name -> domain
};

class SortError : public Error {
 public:
  using Error::Error;
};

/// Many-sorted check. Annotates every quantifier with the unique sort its
/// variable must range over, inferred from the atom positions it occurs in;
/// resolves bare terms to individuals where the name is declared as one.
/// Rejects: sort conflicts, arity mismatches, unknown symbols, variables
/// that never occur in an atom, unbound variables, and shadowed variables.
void sort_check(Formula& f, const SymbolTable& symbols);

}  // namespace lyr
