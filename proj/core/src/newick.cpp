#include "quartree/newick.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "quartree/error.hpp"

namespace quartree {

namespace {

class NewickParser {
 public:
  explicit NewickParser(std::string_view input) : input_(input) {}

  Tree parse() {
    skip_space();
    if (at_end()) throw ParseError("empty Newick text", pos_);
    parse_node(kNoNode);
    skip_space();
    if (peek() != ';') throw ParseError("expected ';'", pos_);
    ++pos_;
    skip_space();
    if (!at_end()) throw ParseError("trailing characters after ';'", pos_);

    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t v = 0; v < labels_.size(); ++v) {
      if (!is_leaf_[v]) {
        labels_[v].clear();
        continue;
      }
      if (labels_[v].empty()) throw ParseError("leaf without a label", offsets_[v]);
      if (!seen.emplace(labels_[v], v).second) {
        throw ParseError("duplicate leaf label '" + labels_[v] + "'", offsets_[v]);
      }
    }
    const NodeId root = 0;
    std::size_t root_children = 0;
    for (NodeId p : parents_) root_children += (p == root) ? 1 : 0;
    return Tree(std::move(parents_), std::move(lengths_), std::move(labels_), root_children == 2);
  }

 private:
  bool at_end() const { return pos_ >= input_.size(); }
  char peek() const { return at_end() ? '\0' : input_[pos_]; }

  void skip_space() {
    while (!at_end()) {
      const char c = input_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '[') {
        const std::size_t start = pos_;
        int depth = 0;
        do {
          if (input_[pos_] == '[') ++depth;
          if (input_[pos_] == ']') --depth;
          ++pos_;
        } while (depth > 0 && !at_end());
        if (depth > 0) throw ParseError("unterminated comment", start);
      } else {
        break;
      }
    }
  }

  NodeId new_node(NodeId parent, std::size_t offset) {
    parents_.push_back(parent);
    lengths_.push_back(1.0);
    labels_.emplace_back();
    is_leaf_.push_back(true);
    offsets_.push_back(offset);
    if (parent != kNoNode) is_leaf_[parent] = false;
    return static_cast<NodeId>(parents_.size() - 1);
  }

  // Iterative so that deep caterpillars cannot exhaust the call stack.
  void parse_node(NodeId parent) {
    std::vector<NodeId> open;
    NodeId current = new_node(parent, pos_);
    for (;;) {
      skip_space();
      if (peek() == '(') {
        ++pos_;
        open.push_back(current);
        current = new_node(current, pos_);
        continue;
      }
      parse_label_and_length(current);
      for (;;) {
        skip_space();
        if (open.empty()) return;
        if (peek() == ',') {
          ++pos_;
          current = new_node(open.back(), pos_);
          break;
        }
        if (peek() != ')') {
          throw ParseError(at_end() ? "unbalanced parentheses" : "expected ',' or ')'", pos_);
        }
        ++pos_;
        current = open.back();
        open.pop_back();
        parse_label_and_length(current);
      }
    }
  }

  void parse_label_and_length(NodeId node) {
    skip_space();
    offsets_[node] = pos_;
    labels_[node] = parse_label();
    skip_space();
    if (peek() == ':') {
      ++pos_;
      skip_space();
      const std::size_t start = pos_;
      while (!at_end() && (std::isdigit(static_cast<unsigned char>(input_[pos_])) ||
                           std::string_view("+-.eE").find(input_[pos_]) != std::string_view::npos)) {
        ++pos_;
      }
      double value = 0.0;
      const auto* first = input_.data() + start;
      const auto* last = input_.data() + pos_;
      if (*first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, value);
      if (start == pos_ || ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw ParseError("malformed branch length", start);
      }
      if (value < 0.0) throw ParseError("negative branch length", start);
      lengths_[node] = value;
    }
  }

  std::string parse_label() {
    std::string label;
    if (peek() == '\'') {
      const std::size_t start = pos_;
      ++pos_;
      for (;;) {
        if (at_end()) throw ParseError("unterminated quoted label", start);
        const char c = input_[pos_++];
        if (c == '\'') {
          if (peek() == '\'') {
            label.push_back('\'');
            ++pos_;
            continue;
          }
          break;
        }
        label.push_back(c);
      }
      return label;
    }
    while (!at_end()) {
      const char c = input_[pos_];
      if (std::isspace(static_cast<unsigned char>(c)) ||
          std::string_view("():;,[]'").find(c) != std::string_view::npos) {
        break;
      }
      label.push_back(c);
      ++pos_;
    }
    return label;
  }

  std::string_view input_;
  std::size_t pos_ = 0;
  std::vector<NodeId> parents_;
  std::vector<double> lengths_;
  std::vector<std::string> labels_;
  std::vector<bool> is_leaf_;
  std::vector<std::size_t> offsets_;
};

bool needs_quotes(const std::string& label) {
  return std::any_of(label.begin(), label.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) ||
           std::string_view("():;,[]'").find(c) != std::string_view::npos;
  });
}

void write_label(std::ostringstream& out, const std::string& label) {
  if (!needs_quotes(label)) {
    out << label;
    return;
  }
  out << '\'';
  for (char c : label) {
    if (c == '\'') out << '\'';
    out << c;
  }
  out << '\'';
}

}  // namespace

Tree parse_newick(std::string_view text) { return NewickParser(text).parse(); }

std::string write_newick(const Tree& tree, int precision) {
  // Smallest leaf label below each node decides sibling order.
  std::vector<const std::string*> smallest(tree.node_count(), nullptr);
  const auto& order = tree.preorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId v = *it;
    if (tree.is_leaf(v)) {
      smallest[v] = &tree.node_label(v);
      continue;
    }
    for (NodeId c : tree.children(v)) {
      if (smallest[v] == nullptr || *smallest[c] < *smallest[v]) smallest[v] = smallest[c];
    }
  }

  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(precision);
  // Explicit stack of (node, next child position) frames.
  struct Frame {
    NodeId node;
    std::vector<NodeId> kids;
    std::size_t next = 0;
  };
  auto sorted_children = [&](NodeId v) {
    std::vector<NodeId> kids = tree.children(v);
    std::sort(kids.begin(), kids.end(), [&](NodeId a, NodeId b) { return *smallest[a] < *smallest[b]; });
    return kids;
  };
  auto close_node = [&](NodeId v) {
    if (tree.is_leaf(v)) write_label(out, tree.node_label(v));
    if (v != tree.root()) out << ':' << tree.length(v);
  };

  std::vector<Frame> stack;
  if (tree.is_leaf(tree.root())) {
    close_node(tree.root());
  } else {
    stack.push_back({tree.root(), sorted_children(tree.root())});
    out << '(';
  }
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next == top.kids.size()) {
      out << ')';
      const NodeId done = top.node;
      stack.pop_back();
      close_node(done);
      continue;
    }
    if (top.next > 0) out << ',';
    const NodeId child = top.kids[top.next++];
    if (tree.is_leaf(child)) {
      close_node(child);
    } else {
      out << '(';
      stack.push_back({child, sorted_children(child)});
    }
  }
  out << ';';
  return out.str();
}

Tree read_newick_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open Newick file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_newick(buffer.str());
}

void write_newick_file(const Tree& tree, const std::filesystem::path& path, int precision) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << write_newick(tree, precision) << '\n';
}

}  // namespace quartree
