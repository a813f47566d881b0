#pragma once

// JSON documents for Hamiltonians, circuits, LEDMV instances and marginal
// lists. Complex entries are [re, im] pairs, matrices are row-major lists of
// rows. Errors carry the line of the offending value.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "qmasearch/clock.hpp"
#include "qmasearch/hamiltonian.hpp"
#include "qmasearch/oracle.hpp"

namespace qmasearch::io {

using json = nlohmann::ordered_json;

/// A parsed document plus the line on which each value starts, keyed by JSON pointer.
struct LocatedJson {
  json value;
  std::map<std::string, int> lines;
  std::string source;

  int line_of(std::string ptr) const {
    while (true) {
      const auto it = lines.find(ptr);
      if (it != lines.end()) return it->second;
      if (ptr.empty()) return 1;
      ptr.erase(ptr.rfind('/'));
    }
  }
};

namespace detail {

inline int line_at(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  int line = 1;
  for (std::size_t i = 0; i < offset; ++i)
    if (text[i] == '\n') ++line;
  return line;
}

/// Forward iterator over a string that publishes how many characters the parser consumed.
struct CountingIterator {
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  const char* p = nullptr;
  const char* base = nullptr;
  std::size_t* consumed = nullptr;

  reference operator*() const { return *p; }
  CountingIterator& operator++() {
    ++p;
    if (consumed) *consumed = static_cast<std::size_t>(p - base);
    return *this;
  }
  CountingIterator operator++(int) {
    auto old = *this;
    ++*this;
    return old;
  }
  bool operator==(const CountingIterator& o) const { return p == o.p; }
  bool operator!=(const CountingIterator& o) const { return p != o.p; }
};

inline std::string escape_pointer_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

class LocatingSax {
 public:
  using number_integer_t = json::number_integer_t;
  using number_unsigned_t = json::number_unsigned_t;
  using number_float_t = json::number_float_t;
  using string_t = json::string_t;
  using binary_t = json::binary_t;

  LocatingSax(LocatedJson& doc, const std::string& text, const std::size_t& consumed)
      : dom_(doc.value), lines_(doc.lines), text_(text), consumed_(consumed) {}

  bool null() { mark(child()); return dom_.null(); }
  bool boolean(bool v) { mark(child()); return dom_.boolean(v); }
  bool number_integer(number_integer_t v) { mark(child()); return dom_.number_integer(v); }
  bool number_unsigned(number_unsigned_t v) { mark(child()); return dom_.number_unsigned(v); }
  bool number_float(number_float_t v, const string_t& s) { mark(child()); return dom_.number_float(v, s); }
  bool string(string_t& v) { mark(child()); return dom_.string(v); }
  bool binary(binary_t& v) { mark(child()); return dom_.binary(v); }
  bool start_object(std::size_t n) {
    auto p = child();
    mark(p);
    stack_.push_back({p, true, "", 0});
    return dom_.start_object(n);
  }
  bool key(string_t& k) {
    stack_.back().key = k;
    return dom_.key(k);
  }
  bool end_object() {
    stack_.pop_back();
    return dom_.end_object();
  }
  bool start_array(std::size_t n) {
    auto p = child();
    mark(p);
    stack_.push_back({p, false, "", 0});
    return dom_.start_array(n);
  }
  bool end_array() {
    stack_.pop_back();
    return dom_.end_array();
  }
  template <class Exception>
  bool parse_error(std::size_t pos, const std::string& tok, const Exception& ex) {
    return dom_.parse_error(pos, tok, ex);
  }

 private:
  struct Frame {
    std::string path;
    bool object;
    std::string key;
    std::size_t count;
  };

  std::string child() {
    if (stack_.empty()) return "";
    auto& f = stack_.back();
    if (f.object) return f.path + "/" + escape_pointer_token(f.key);
    return f.path + "/" + std::to_string(f.count++);
  }

  // The lexer may have read one character past the token; step back over
  // trailing whitespace so a value at the end of a line keeps its own line.
  void mark(const std::string& p) {
    std::size_t off = consumed_ ? consumed_ - 1 : 0;
    while (off > 0 && off < text_.size() && std::isspace(static_cast<unsigned char>(text_[off]))) --off;
    lines_[p] = line_at(text_, off);
  }

  nlohmann::detail::json_sax_dom_parser<json> dom_;
  std::map<std::string, int>& lines_;
  const std::string& text_;
  const std::size_t& consumed_;
  std::vector<Frame> stack_;
};

}  // namespace detail

inline LocatedJson parse_located(const std::string& text, const std::string& source) {
  LocatedJson doc;
  doc.source = source;
  std::size_t consumed = 0;
  detail::LocatingSax sax(doc, text, consumed);
  detail::CountingIterator first{text.data(), text.data(), &consumed};
  detail::CountingIterator last{text.data() + text.size(), text.data(), nullptr};
  try {
    json::sax_parse(first, last, &sax);
  } catch (const json::parse_error& e) {
    const int line = detail::line_at(text, e.byte ? e.byte - 1 : 0);
    std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (msg.rfind("[json.exception", 0) == 0 && colon != std::string::npos) msg = msg.substr(colon + 2);
    throw ParseError(source + ":" + std::to_string(line) + ": " + msg, line);
  }
  return doc;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a temporary file in the same directory and renames it into place.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io: cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("io: short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("io: cannot move report into place at " + path + ": " + ec.message());
  }
}

// ---------------------------------------------------------------------------

/// A position inside a located document.
class Cursor {
 public:
  Cursor(const LocatedJson& doc) : doc_(&doc), node_(&doc.value) {}
  Cursor(const LocatedJson* doc, const json* node, std::string ptr) : doc_(doc), node_(node), ptr_(std::move(ptr)) {}

  [[noreturn]] void fail(const std::string& msg) const {
    const int line = doc_->line_of(ptr_);
    throw ParseError(doc_->source + ":" + std::to_string(line) + ": " + msg + " (at " + (ptr_.empty() ? "/" : ptr_) + ")", line);
  }

  const json& raw() const { return *node_; }
  const std::string& pointer() const { return ptr_; }
  bool has(const std::string& key) const { return node_->is_object() && node_->contains(key); }

  Cursor operator[](const std::string& key) const {
    if (!node_->is_object()) fail("expected an object");
    const auto it = node_->find(key);
    if (it == node_->end()) fail("missing key \"" + key + "\"");
    return Cursor(doc_, &*it, ptr_ + "/" + detail::escape_pointer_token(key));
  }
  Cursor operator[](std::size_t i) const {
    if (!node_->is_array()) fail("expected an array");
    if (i >= node_->size()) fail("index " + std::to_string(i) + " out of range");
    return Cursor(doc_, &(*node_)[i], ptr_ + "/" + std::to_string(i));
  }
  std::size_t size() const {
    if (!node_->is_array()) fail("expected an array");
    return node_->size();
  }
  void only_keys(std::initializer_list<const char*> allowed) const {
    if (!node_->is_object()) fail("expected an object");
    for (const auto& [k, v] : node_->items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) Cursor(doc_, &v, ptr_ + "/" + detail::escape_pointer_token(k)).fail("unknown key \"" + k + "\"");
    }
  }
  double number() const {
    if (!node_->is_number()) fail("expected a number");
    return node_->get<double>();
  }
  int integer() const {
    if (!node_->is_number_integer()) fail("expected an integer");
    return node_->get<int>();
  }
  std::string str() const {
    if (!node_->is_string()) fail("expected a string");
    return node_->get<std::string>();
  }
  Complex complex() const {
    if (!node_->is_array() || node_->size() != 2 || !(*node_)[0].is_number() || !(*node_)[1].is_number()) {
      fail("expected a complex entry [re, im]");
    }
    return {(*node_)[0].get<double>(), (*node_)[1].get<double>()};
  }

 private:
  const LocatedJson* doc_;
  const json* node_;
  std::string ptr_;
};

// ---------------------------------------------------------------------------
// Writers

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const QubitSet& s) { return json(s); }

inline json to_json(const DensityMatrix& rho) {
  json j;
  j["support"] = to_json(rho.support());
  j["matrix"] = to_json(rho.matrix());
  return j;
}

inline json to_json(const LocalHamiltonian& h) {
  json j;
  j["n"] = h.n();
  j["k"] = h.k();
  j["terms"] = json::array();
  for (const auto& t : h.terms()) j["terms"].push_back({{"support", to_json(t.support)}, {"matrix", to_json(t.matrix.matrix())}});
  return j;
}

inline json to_json(const QuantumCircuit& c) {
  json j;
  j["num_qubits"] = c.num_qubits;
  j["witness"] = to_json(c.witness);
  j["ancillas"] = to_json(c.ancillas);
  j["output"] = c.output;
  j["gates"] = json::array();
  for (const auto& g : c.gates) j["gates"].push_back({{"support", to_json(g.support)}, {"matrix", to_json(g.matrix)}});
  return j;
}

inline json to_json(const LedmvInstance& inst) {
  json j;
  j["hamiltonian"] = to_json(inst.H);
  j["marginals"] = json::array();
  for (const auto& rho : inst.D) j["marginals"].push_back(to_json(rho));
  j["a"] = inst.a;
  j["delta"] = inst.delta;
  j["alpha"] = inst.alpha;
  j["beta"] = inst.beta;
  return j;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Readers

inline Matrix read_matrix(const Cursor& c) {
  const std::size_t rows = c.size();
  if (rows == 0) c.fail("matrix has no rows");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto row = c[i];
    if (row.size() != rows) row.fail("matrix row has " + std::to_string(row.size()) + " entries, expected " + std::to_string(rows));
    for (std::size_t j = 0; j < rows; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].complex();
  }
  return m;
}

inline QubitSet read_qubits(const Cursor& c) {
  QubitSet s;
  for (std::size_t i = 0; i < c.size(); ++i) s.push_back(c[i].integer());
  return s;
}

/// Runs `f`, turning library validation errors into ParseErrors located at `c`.
template <class F>
auto located(const Cursor& c, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    c.fail(e.what());
  }
}

inline DensityMatrix read_density(const Cursor& c) {
  c.only_keys({"support", "matrix"});
  const auto s = read_qubits(c["support"]);
  const auto m = read_matrix(c["matrix"]);
  return located(c, [&] { return DensityMatrix(s, m); });
}

inline std::vector<DensityMatrix> read_marginals(const Cursor& c) {
  std::vector<DensityMatrix> out;
  for (std::size_t i = 0; i < c.size(); ++i) out.push_back(read_density(c[i]));
  return out;
}

inline LocalHamiltonian read_hamiltonian(const Cursor& c) {
  c.only_keys({"n", "k", "terms"});
  const int n = c["n"].integer();
  const int k = c["k"].integer();
  auto h = located(c, [&] { return LocalHamiltonian(n, k); });
  const auto terms = c["terms"];
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto t = terms[i];
    t.only_keys({"support", "matrix"});
    const auto s = read_qubits(t["support"]);
    const auto m = read_matrix(t["matrix"]);
    located(t, [&] { h.add(LocalTerm(s, m)); });
  }
  return h;
}

inline QuantumCircuit read_circuit(const Cursor& c) {
  c.only_keys({"num_qubits", "witness", "ancillas", "output", "gates"});
  QuantumCircuit circ;
  circ.num_qubits = c["num_qubits"].integer();
  circ.witness = read_qubits(c["witness"]);
  circ.ancillas = read_qubits(c["ancillas"]);
  circ.output = c["output"].integer();
  const auto gates = c["gates"];
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const auto g = gates[i];
    g.only_keys({"support", "matrix"});
    const auto s = read_qubits(g["support"]);
    const auto m = read_matrix(g["matrix"]);
    located(g, [&] { circ.gates.emplace_back(s, m); });
  }
  located(c, [&] { circ.validate(); });
  return circ;
}

inline LedmvInstance read_instance(const Cursor& c) {
  c.only_keys({"hamiltonian", "marginals", "a", "delta", "alpha", "beta"});
  LedmvInstance inst{read_hamiltonian(c["hamiltonian"]), read_marginals(c["marginals"]), c["a"].number(),
                     c["delta"].number(), c["alpha"].number(), c["beta"].number()};
  located(c, [&] { inst.validate(); });
  return inst;
}

inline LocalHamiltonian parse_hamiltonian(const std::string& text, const std::string& source = "<hamiltonian>") {
  const auto doc = parse_located(text, source);
  return read_hamiltonian(Cursor(doc));
}
inline QuantumCircuit parse_circuit(const std::string& text, const std::string& source = "<circuit>") {
  const auto doc = parse_located(text, source);
  return read_circuit(Cursor(doc));
}
inline LedmvInstance parse_instance(const std::string& text, const std::string& source = "<instance>") {
  const auto doc = parse_located(text, source);
  return read_instance(Cursor(doc));
}

inline LocalHamiltonian load_hamiltonian(const std::string& path) { return parse_hamiltonian(read_file(path), path); }
inline QuantumCircuit load_circuit(const std::string& path) { return parse_circuit(read_file(path), path); }
inline LedmvInstance load_instance(const std::string& path) { return parse_instance(read_file(path), path); }

}  // namespace qmasearch::io
