#ifndef STARSEL_CONFIG_HPP
#define STARSEL_CONFIG_HPP

// Model configuration language:
//
//   family = gaussian
//   response = y
//   prior { v0 = 0.00025, a_tau = 5, b_tau = 25 }
//   term { kind = pspline, var = x1, basis = 20 }
//   term { kind = tensor_spline, var = (x1, x2), label = x1x2 }
//
// '#' starts a comment; commas between key/value pairs are optional.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "starsel/error.hpp"
#include "starsel/model.hpp"
#include "starsel/terms.hpp"

namespace starsel {

struct ModelConfig {
  Family family = Family::gaussian;
  std::string response = "y";
  std::optional<std::string> offset;
  std::vector<TermSpec> terms;
  Hyperparams hyper;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

namespace config_detail {

enum class Tok { word, string, lbrace, rbrace, lparen, rparen, comma, equals, end };

struct Token {
  Tok type = Tok::end;
  std::string text;
  std::size_t line = 1, col = 1;
};

inline bool word_char(char c) {
  return !std::isspace(static_cast<unsigned char>(c)) && c != '{' && c != '}' && c != '(' &&
         c != ')' && c != ',' && c != '=' && c != '#' && c != '"';
}

inline std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  std::size_t line = 1, col = 1, i = 0;
  auto advance = [&](std::size_t k) {
    for (std::size_t j = 0; j < k; ++j, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    switch (c) {
      case '{': t.type = Tok::lbrace; break;
      case '}': t.type = Tok::rbrace; break;
      case '(': t.type = Tok::lparen; break;
      case ')': t.type = Tok::rparen; break;
      case ',': t.type = Tok::comma; break;
      case '=': t.type = Tok::equals; break;
      default: break;
    }
    if (t.type != Tok::end) {
      t.text = std::string(1, c);
      advance(1);
      out.push_back(t);
      continue;
    }
    if (c == '"') {
      advance(1);
      t.type = Tok::string;
      while (true) {
        if (i >= text.size() || text[i] == '\n')
          throw ConfigError("unterminated string", t.line, t.col);
        if (text[i] == '"') break;
        if (text[i] == '\\' && i + 1 < text.size()) advance(1);
        t.text += text[i];
        advance(1);
      }
      advance(1);
      out.push_back(t);
      continue;
    }
    t.type = Tok::word;
    while (i < text.size() && word_char(text[i])) {
      t.text += text[i];
      advance(1);
    }
    out.push_back(t);
  }
  Token e;
  e.line = line;
  e.col = col;
  out.push_back(e);
  return out;
}

struct Value {
  std::vector<Token> items;  // one item unless written as a list
  bool list = false;
  Token at;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

  const Token& peek() const { return t_[pos_]; }
  const Token& next() { return t_[pos_ < t_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] static void fail(const std::string& msg, const Token& at) {
    throw ConfigError(msg, at.line, at.col);
  }

  const Token& expect(Tok type, const char* what) {
    if (peek().type != type)
      fail(std::string("expected ") + what + (peek().type == Tok::end ? " before end of input"
                                                                       : ", found '" + peek().text + "'"),
           peek());
    return next();
  }

  Value value() {
    Value v;
    v.at = peek();
    if (peek().type == Tok::lparen) {
      next();
      v.list = true;
      while (true) {
        const Token& tk = peek();
        if (tk.type != Tok::word && tk.type != Tok::string) fail("expected a list item", tk);
        v.items.push_back(next());
        if (peek().type == Tok::comma) {
          next();
          continue;
        }
        expect(Tok::rparen, "')'");
        break;
      }
      return v;
    }
    if (peek().type != Tok::word && peek().type != Tok::string) fail("expected a value", peek());
    v.items.push_back(next());
    return v;
  }

  /// '{' key = value [,] ... '}'
  std::vector<std::pair<Token, Value>> block() {
    expect(Tok::lbrace, "'{'");
    std::vector<std::pair<Token, Value>> kv;
    std::set<std::string> keys;
    while (peek().type != Tok::rbrace) {
      const Token key = expect(Tok::word, "a key");
      if (!keys.insert(key.text).second) fail("duplicate key '" + key.text + "'", key);
      expect(Tok::equals, "'='");
      kv.emplace_back(key, value());
      if (peek().type == Tok::comma) next();
    }
    next();
    return kv;
  }

 private:
  std::vector<Token> t_;
  std::size_t pos_ = 0;
};

inline const Token& scalar(const Value& v, const Token& key) {
  if (v.list || v.items.size() != 1) Parser::fail("'" + key.text + "' takes a single value", v.at);
  return v.items.front();
}

inline double number(const Value& v, const Token& key) {
  const Token& t = scalar(v, key);
  double x = 0.0;
  auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), x);
  if (t.type != Tok::word || ec != std::errc() || p != t.text.data() + t.text.size() ||
      !std::isfinite(x))
    Parser::fail("'" + key.text + "' must be a number, found '" + t.text + "'", t);
  return x;
}

inline int integer(const Value& v, const Token& key) {
  const double x = number(v, key);
  if (x != std::floor(x) || std::abs(x) > 1e9)
    Parser::fail("'" + key.text + "' must be an integer", scalar(v, key));
  return static_cast<int>(x);
}

inline bool boolean(const Value& v, const Token& key) {
  const Token& t = scalar(v, key);
  if (t.text == "true" || t.text == "yes") return true;
  if (t.text == "false" || t.text == "no") return false;
  Parser::fail("'" + key.text + "' must be true or false", t);
}

}  // namespace config_detail

/// Parses a model configuration. When `columns` is given, every referenced
/// variable must be one of them.
inline ModelConfig parse_model_config(const std::string& text,
                                      const std::optional<std::vector<std::string>>& columns = {}) {
  using namespace config_detail;
  Parser ps(tokenize(text));
  ModelConfig cfg;
  std::set<std::string> seen_top;
  std::set<std::string> labels;
  auto check_column = [&](const Token& t) {
    if (!columns) return;
    for (const auto& c : *columns)
      if (c == t.text) return;
    Parser::fail("unknown column '" + t.text + "'", t);
  };

  while (ps.peek().type != Tok::end) {
    const Token key = ps.expect(Tok::word, "a statement");
    if (key.text == "term") {
      const auto kv = ps.block();
      TermSpec ts;
      std::optional<Token> kind_tok, var_tok;
      bool has_label = false;
      for (const auto& [k, v] : kv) {
        if (k.text == "kind") {
          const Token& t = scalar(v, k);
          auto kind = term_kind_from_string(t.text);
          if (!kind) Parser::fail("unknown term kind '" + t.text + "'", t);
          ts.kind = *kind;
          kind_tok = t;
        } else if (k.text == "var") {
          ts.covariates.clear();
          for (const auto& it : v.items) {
            check_column(it);
            ts.covariates.push_back(it.text);
          }
          var_tok = v.at;
        } else if (k.text == "label") {
          ts.label = scalar(v, k).text;
          if (ts.label.empty()) Parser::fail("empty label", v.at);
          has_label = true;
        } else if (k.text == "basis") {
          ts.num_basis = integer(v, k);
        } else if (k.text == "degree") {
          ts.spline_degree = integer(v, k);
        } else if (k.text == "order") {
          ts.penalty_order = integer(v, k);
        } else if (k.text == "neighbors") {
          ts.neighbors = scalar(v, k).text;
        } else if (k.text == "base") {
          const Token& t = scalar(v, k);
          auto kind = term_kind_from_string(t.text);
          if (!kind) Parser::fail("unknown base kind '" + t.text + "'", t);
          ts.base = *kind;
        } else if (k.text == "select") {
          ts.selectable = boolean(v, k);
        } else if (k.text == "expand") {
          ts.expanded = boolean(v, k);
        } else {
          Parser::fail("unknown term key '" + k.text + "'", k);
        }
      }
      if (!kind_tok) Parser::fail("term is missing 'kind'", key);
      if (!var_tok) Parser::fail("term is missing 'var'", key);
      if (!has_label) {
        for (std::size_t i = 0; i < ts.covariates.size(); ++i)
          ts.label += (i ? ":" : "") + ts.covariates[i];
      }
      try {
        ts.validate();
      } catch (const InvalidArgument& e) {
        Parser::fail(e.what(), key);
      }
      if (!labels.insert(ts.label).second)
        Parser::fail("duplicate term label '" + ts.label + "'", key);
      cfg.terms.push_back(std::move(ts));
    } else if (key.text == "prior") {
      for (const auto& [k, v] : ps.block()) {
        const double x = number(v, k);
        double* slot = nullptr;
        if (k.text == "v0") slot = &cfg.hyper.v0;
        else if (k.text == "a_tau") slot = &cfg.hyper.a_tau;
        else if (k.text == "b_tau") slot = &cfg.hyper.b_tau;
        else if (k.text == "a_w") slot = &cfg.hyper.a_w;
        else if (k.text == "b_w") slot = &cfg.hyper.b_w;
        else if (k.text == "a_sigma") slot = &cfg.hyper.a_sigma;
        else if (k.text == "b_sigma") slot = &cfg.hyper.b_sigma;
        else Parser::fail("unknown prior parameter '" + k.text + "'", k);
        *slot = x;
        try {
          cfg.hyper.validate();
        } catch (const InvalidArgument& e) {
          Parser::fail(std::string("invalid hyperparameter: ") + e.what(), scalar(v, k));
        }
      }
    } else if (key.text == "family" || key.text == "response" || key.text == "offset") {
      if (!seen_top.insert(key.text).second) Parser::fail("'" + key.text + "' given twice", key);
      ps.expect(Tok::equals, "'='");
      const Value v = ps.value();
      const Token& t = scalar(v, key);
      if (key.text == "family") {
        auto f = family_from_string(t.text);
        if (!f) Parser::fail("unknown family '" + t.text + "'", t);
        cfg.family = *f;
      } else if (key.text == "response") {
        check_column(t);
        cfg.response = t.text;
      } else {
        check_column(t);
        cfg.offset = t.text;
      }
    } else {
      Parser::fail("unknown statement '" + key.text + "'", key);
    }
  }
  return cfg;
}

namespace config_detail {

inline std::string quoted(const std::string& s) {
  bool plain = !s.empty();
  for (char c : s)
    if (!word_char(c) || c == '\\') plain = false;
  if (plain) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') q += '\\';
    q += c;
  }
  return q + "\"";
}

inline std::string num(double x) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

}  // namespace config_detail

inline std::string render_model_config(const ModelConfig& c) {
  using config_detail::num;
  using config_detail::quoted;
  std::ostringstream os;
  os << "family = " << to_string(c.family) << "\n";
  os << "response = " << quoted(c.response) << "\n";
  if (c.offset) os << "offset = " << quoted(*c.offset) << "\n";
  const auto& h = c.hyper;
  os << "prior { v0 = " << num(h.v0) << ", a_tau = " << num(h.a_tau)
     << ", b_tau = " << num(h.b_tau) << ", a_w = " << num(h.a_w) << ", b_w = " << num(h.b_w)
     << ", a_sigma = " << num(h.a_sigma) << ", b_sigma = " << num(h.b_sigma) << " }\n";
  const TermSpec def;
  for (const auto& t : c.terms) {
    os << "term { kind = " << to_string(t.kind) << ", var = ";
    if (t.covariates.size() == 1) {
      os << quoted(t.covariates[0]);
    } else {
      os << "(";
      for (std::size_t i = 0; i < t.covariates.size(); ++i)
        os << (i ? ", " : "") << quoted(t.covariates[i]);
      os << ")";
    }
    os << ", label = " << quoted(t.label);
    if (t.num_basis) os << ", basis = " << *t.num_basis;
    if (t.spline_degree != def.spline_degree) os << ", degree = " << t.spline_degree;
    if (t.penalty_order) os << ", order = " << *t.penalty_order;
    if (t.neighbors != def.neighbors) os << ", neighbors = " << quoted(t.neighbors);
    if (t.base != def.base) os << ", base = " << to_string(t.base);
    if (!t.selectable) os << ", select = false";
    if (!t.expanded) os << ", expand = false";
    os << " }\n";
  }
  return os.str();
}

}  // namespace starsel

#endif  // STARSEL_CONFIG_HPP
