#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "quartree/tree.hpp"

namespace quartree {

/// Parses one Newick tree.
///
/// Branch lengths are optional and default to 1. Internal node labels are
/// accepted and dropped; `[...]` comments are skipped anywhere whitespace is
/// allowed; single-quoted labels may contain any character ('' escapes a
/// quote). The result is rooted when the outermost node has two children.
///
/// Throws ParseError (carrying the byte offset) on unbalanced parentheses,
/// empty leaf labels, duplicate leaf labels, malformed lengths, a missing ';'
/// or trailing non-whitespace.
Tree parse_newick(std::string_view text);

/// Serializes `tree` deterministically: children are ordered by the smallest
/// leaf label they contain, lengths are printed in fixed notation with
/// `precision` digits, the root carries no length, and the text ends in ';'.
std::string write_newick(const Tree& tree, int precision = 6);

Tree read_newick_file(const std::filesystem::path& path);
void write_newick_file(const Tree& tree, const std::filesystem::path& path, int precision = 6);

}  // namespace quartree
