#include "fewstep/structure.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace fewstep {

std::string_view to_string(EntityClass e) {
  switch (e) {
    case EntityClass::protein: return "protein";
    case EntityClass::ligand: return "ligand";
    case EntityClass::dna: return "dna";
    case EntityClass::rna: return "rna";
  }
  return "protein";
}

std::optional<EntityClass> parse_entity(std::string_view s) {
  if (s == "protein") return EntityClass::protein;
  if (s == "ligand") return EntityClass::ligand;
  if (s == "dna") return EntityClass::dna;
  if (s == "rna") return EntityClass::rna;
  return std::nullopt;
}

void Structure::validate() const {
  const auto n = static_cast<std::size_t>(size());
  if (n < 1) throw ValidationError("structure has no atoms");
  if (entity.size() != n || chain.size() != n || static_cast<std::size_t>(weight.size()) != n) {
    throw ValidationError("structure annotation lengths do not match atom count");
  }
  if (!coords.allFinite()) throw ValidationError("structure has non-finite coordinates");
  if (!weight.allFinite() || (weight.array() < 0.0).any()) {
    throw ValidationError("atom weights must be finite and nonnegative");
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& b : bonds) {
    if (b.l < 0 || b.m >= size() || b.l >= b.m) {
      throw ValidationError("bond (" + std::to_string(b.l) + ", " + std::to_string(b.m) +
                            ") out of range or not ordered");
    }
    if (!seen.insert({b.l, b.m}).second) {
      throw ValidationError("duplicate bond (" + std::to_string(b.l) + ", " + std::to_string(b.m) + ")");
    }
  }
}

Structure Structure::with_coords(Coords c) const {
  if (c.rows() != coords.rows()) throw ValidationError("with_coords: atom count mismatch");
  Structure out = *this;
  out.coords = std::move(c);
  return out;
}

bool Structure::has_entity(EntityClass e) const {
  for (auto x : entity) {
    if (x == e) return true;
  }
  return false;
}

bool operator==(const Structure& a, const Structure& b) {
  return a.coords.rows() == b.coords.rows() && a.coords == b.coords && a.entity == b.entity &&
         a.chain == b.chain && a.bonds == b.bonds && a.weight == b.weight;
}

Structure make_structure(Coords coords) {
  Structure s;
  const auto n = static_cast<std::size_t>(coords.rows());
  s.coords = std::move(coords);
  s.entity.assign(n, EntityClass::protein);
  s.chain.assign(n, 0);
  s.weight = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  return s;
}

void require_same_size(const Structure& a, const Structure& b, std::string_view what) {
  if (a.size() != b.size()) {
    throw ValidationError(std::string(what) + ": atom counts differ (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
}

ParseError::ParseError(const std::string& msg, std::size_t offset)
    : ValidationError(msg + " at byte " + std::to_string(offset)), offset_(offset) {}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Tokenizer {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line_end = 0;

  bool next_line() {
    while (pos < text.size()) {
      line_end = text.find('\n', pos);
      if (line_end == std::string_view::npos) line_end = text.size();
      std::size_t p = pos;
      while (p < line_end && (text[p] == ' ' || text[p] == '\t' || text[p] == '\r')) ++p;
      if (p < line_end && text[p] != '#') {
        pos = p;
        return true;
      }
      pos = line_end + 1;
    }
    return false;
  }

  // Next whitespace-separated field on the current line; empty at end of line.
  std::string_view field(std::size_t& start) {
    while (pos < line_end && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r')) ++pos;
    start = pos;
    while (pos < line_end && text[pos] != ' ' && text[pos] != '\t' && text[pos] != '\r') ++pos;
    return text.substr(start, pos - start);
  }

  void finish_line() {
    std::size_t start = 0;
    if (!field(start).empty()) throw ParseError("trailing field on line", start);
    pos = line_end + 1;
  }
};

double to_double(std::string_view f, std::size_t at) {
  if (f.empty()) throw ParseError("expected a number", at);
  // strtod accepts the exact 17-digit form that from_chars on older toolchains rejects.
  std::string tmp(f);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size()) throw ParseError("malformed number '" + tmp + "'", at);
  return v;
}

int to_int(std::string_view f, std::size_t at) {
  int v = 0;
  auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (f.empty() || ec != std::errc() || p != f.data() + f.size()) {
    throw ParseError("expected an integer", at);
  }
  return v;
}

}  // namespace

std::string to_text(const Structure& s) {
  std::string out;
  for (int i = 0; i < s.size(); ++i) {
    out += std::to_string(i) + ' ' + std::to_string(s.chain[i]) + ' ' +
           std::string(to_string(s.entity[i])) + ' ' + fmt17(s.coords(i, 0)) + ' ' +
           fmt17(s.coords(i, 1)) + ' ' + fmt17(s.coords(i, 2)) + ' ' + fmt17(s.weight(i)) + '\n';
  }
  for (const auto& b : s.bonds) {
    out += "BOND " + std::to_string(b.l) + ' ' + std::to_string(b.m) + '\n';
  }
  return out;
}

Structure parse_structure(std::string_view text) {
  Tokenizer tok{text};
  std::vector<std::array<double, 4>> rows;
  std::vector<EntityClass> entity;
  std::vector<int> chain;
  std::vector<Bond> bonds;
  std::size_t at = 0;
  while (tok.next_line()) {
    const std::size_t line_start = tok.pos;
    auto first = tok.field(at);
    if (first == "BOND") {
      std::size_t a1 = 0, a2 = 0;
      auto f1 = tok.field(a1);
      const int l = to_int(f1, a1);
      auto f2 = tok.field(a2);
      const int m = to_int(f2, a2);
      bonds.push_back({l, m});
      tok.finish_line();
      continue;
    }
    if (!bonds.empty()) throw ParseError("atom record after BOND records", line_start);
    const int idx = to_int(first, at);
    if (idx != static_cast<int>(rows.size())) {
      throw ParseError("atom index " + std::to_string(idx) + " out of sequence", at);
    }
    auto fc = tok.field(at);
    chain.push_back(to_int(fc, at));
    auto fe = tok.field(at);
    auto e = parse_entity(fe);
    if (!e) throw ParseError("unknown entity class '" + std::string(fe) + "'", at);
    entity.push_back(*e);
    std::array<double, 4> r{};
    for (double& v : r) {
      auto f = tok.field(at);
      v = to_double(f, at);
    }
    rows.push_back(r);
    tok.finish_line();
  }
  if (rows.empty()) throw ParseError("no atom records", text.size());
  Structure s;
  const auto n = static_cast<Eigen::Index>(rows.size());
  s.coords.resize(n, 3);
  s.weight.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) s.coords(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    s.weight(i) = rows[static_cast<std::size_t>(i)][3];
  }
  s.entity = std::move(entity);
  s.chain = std::move(chain);
  s.bonds = std::move(bonds);
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), text.size());
  }
  return s;
}

Structure read_structure(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open structure file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_structure(ss.str());
}

void write_structure(const std::string& path, const Structure& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write structure file " + path);
  out << to_text(s);
}

}  // namespace fewstep
