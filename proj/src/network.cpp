#include "bimatch/network.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "bimatch/error.hpp"

namespace bimatch {

namespace {

std::uint64_t pair_key(std::size_t w, std::size_t f) {
  return (static_cast<std::uint64_t>(w) << 32) | static_cast<std::uint64_t>(f);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

// Splits one line into fields. Double-quoted fields may contain the delimiter;
// a doubled quote inside quotes is a literal quote.
bool split_fields(std::string_view line, char delim, std::vector<std::string>& out) {
  out.clear();
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && trim(field).empty()) {
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == delim) {
      out.push_back(was_quoted ? field : std::string(trim(field)));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) return false;
  out.push_back(was_quoted ? field : std::string(trim(field)));
  return true;
}

bool parse_real(std::string_view text, double& value) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

[[noreturn]] void parse_fail(std::string_view source, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << source << ":" << line << ": " << what;
  throw Error(ErrorCode::kParse, msg.str());
}

// Reads logical lines, strips a UTF-8 BOM and CR, skips blank lines.
class LineReader {
 public:
  LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (number_ == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!trim(line).empty()) return true;
    }
    return false;
  }

  std::size_t number() const { return number_; }

 private:
  std::istream& in_;
  std::size_t number_ = 0;
};

void expect_header(LineReader& reader, std::string_view source, char delim,
                   std::initializer_list<std::string_view> names) {
  std::string line;
  std::string expected;
  for (auto n : names) expected += (expected.empty() ? "" : std::string(1, delim)) + std::string(n);
  if (!reader.next(line)) parse_fail(source, reader.number(), "missing header `" + expected + "`");
  std::vector<std::string> fields;
  bool ok = split_fields(line, delim, fields) && fields.size() == names.size();
  if (ok) {
    std::size_t k = 0;
    for (auto n : names) ok = ok && lower(fields[k++]) == n;
  }
  if (!ok) parse_fail(source, reader.number(), "expected header `" + expected + "`, got `" + line + "`");
}

std::string quote_if_needed(const std::string& key, char delim) {
  if (key.find(delim) == std::string::npos && key.find('"') == std::string::npos &&
      (key.empty() || (key.front() != ' ' && key.back() != ' '))) {
    return key;
  }
  std::string out = "\"";
  for (char c : key) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// MatchingNetwork

std::optional<std::size_t> MatchingNetwork::find_worker(std::string_view key) const {
  auto it = worker_index_.find(std::string(key));
  if (it == worker_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> MatchingNetwork::find_firm(std::string_view key) const {
  auto it = firm_index_.find(std::string(key));
  if (it == firm_index_.end()) return std::nullopt;
  return it->second;
}

std::size_t MatchingNetwork::require_worker(std::string_view key) const {
  if (auto w = find_worker(key)) return *w;
  throw Error(ErrorCode::kInvalidArgument, "unknown worker `" + std::string(key) + "`");
}

std::size_t MatchingNetwork::require_firm(std::string_view key) const {
  if (auto f = find_firm(key)) return *f;
  throw Error(ErrorCode::kInvalidArgument, "unknown firm `" + std::string(key) + "`");
}

std::optional<std::size_t> MatchingNetwork::find_match(std::size_t worker, std::size_t firm) const {
  if (worker >= worker_adj_.size() || firm >= firm_adj_.size()) return std::nullopt;
  const auto& adj = worker_adj_[worker];
  const auto& fkeys = firm_keys_;
  auto it = std::lower_bound(adj.begin(), adj.end(), firm, [&](const Incidence& inc, std::size_t f) {
    return fkeys[inc.node] < fkeys[f];
  });
  if (it != adj.end() && it->node == firm) return it->match;
  return std::nullopt;
}

double MatchingNetwork::outcome(std::size_t worker, std::size_t firm) const {
  if (auto e = find_match(worker, firm)) return matches_[*e].outcome;
  throw Error(ErrorCode::kInconsistentCycle,
              "no match between worker `" + worker_key(worker) + "` and firm `" + firm_key(firm) + "`");
}

std::vector<double> MatchingNetwork::outcomes() const {
  std::vector<double> out(matches_.size());
  for (std::size_t e = 0; e < matches_.size(); ++e) out[e] = matches_[e].outcome;
  return out;
}

MatchingNetwork MatchingNetwork::with_outcomes(std::span<const double> outcomes) const {
  if (outcomes.size() != matches_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "outcome vector length " + std::to_string(outcomes.size()) +
                                                 " does not match " + std::to_string(matches_.size()) +
                                                 " matches");
  }
  MatchingNetwork copy = *this;
  for (std::size_t e = 0; e < matches_.size(); ++e) copy.matches_[e].outcome = outcomes[e];
  return copy;
}

MatchingNetwork MatchingNetwork::subnetwork(std::span<const std::size_t> workers,
                                            std::span<const std::size_t> firms) const {
  std::vector<std::size_t> ws(workers.begin(), workers.end());
  std::vector<std::size_t> fs(firms.begin(), firms.end());
  std::sort(ws.begin(), ws.end());
  ws.erase(std::unique(ws.begin(), ws.end()), ws.end());
  std::sort(fs.begin(), fs.end());
  fs.erase(std::unique(fs.begin(), fs.end()), fs.end());

  constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
  std::vector<std::size_t> wmap(num_workers(), kAbsent), fmap(num_firms(), kAbsent);
  MatchingNetwork sub;
  for (std::size_t w : ws) {
    wmap.at(w) = sub.worker_keys_.size();
    sub.worker_index_.emplace(worker_keys_[w], sub.worker_keys_.size());
    sub.worker_keys_.push_back(worker_keys_[w]);
  }
  for (std::size_t f : fs) {
    fmap.at(f) = sub.firm_keys_.size();
    sub.firm_index_.emplace(firm_keys_[f], sub.firm_keys_.size());
    sub.firm_keys_.push_back(firm_keys_[f]);
  }
  for (const Match& m : matches_) {
    if (wmap[m.worker] == kAbsent || fmap[m.firm] == kAbsent) continue;
    sub.matches_.push_back({wmap[m.worker], fmap[m.firm], m.outcome, m.multiplicity});
  }
  sub.finalize();
  return sub;
}

void MatchingNetwork::finalize() {
  const std::size_t nw = worker_keys_.size();
  const std::size_t nf = firm_keys_.size();

  workers_sorted_.resize(nw);
  std::iota(workers_sorted_.begin(), workers_sorted_.end(), std::size_t{0});
  std::sort(workers_sorted_.begin(), workers_sorted_.end(),
            [&](std::size_t a, std::size_t b) { return worker_keys_[a] < worker_keys_[b]; });
  firms_sorted_.resize(nf);
  std::iota(firms_sorted_.begin(), firms_sorted_.end(), std::size_t{0});
  std::sort(firms_sorted_.begin(), firms_sorted_.end(),
            [&](std::size_t a, std::size_t b) { return firm_keys_[a] < firm_keys_[b]; });
  worker_rank_.assign(nw, 0);
  for (std::size_t r = 0; r < nw; ++r) worker_rank_[workers_sorted_[r]] = r;
  firm_rank_.assign(nf, 0);
  for (std::size_t r = 0; r < nf; ++r) firm_rank_[firms_sorted_[r]] = r;

  worker_adj_.assign(nw, {});
  firm_adj_.assign(nf, {});
  for (std::size_t e = 0; e < matches_.size(); ++e) {
    worker_adj_[matches_[e].worker].push_back({matches_[e].firm, e});
    firm_adj_[matches_[e].firm].push_back({matches_[e].worker, e});
  }
  for (auto& adj : worker_adj_) {
    std::sort(adj.begin(), adj.end(),
              [&](const Incidence& a, const Incidence& b) { return firm_rank_[a.node] < firm_rank_[b.node]; });
  }
  for (auto& adj : firm_adj_) {
    std::sort(adj.begin(), adj.end(),
              [&](const Incidence& a, const Incidence& b) { return worker_rank_[a.node] < worker_rank_[b.node]; });
  }
}

bool same_content(const MatchingNetwork& a, const MatchingNetwork& b) {
  if (a.num_workers() != b.num_workers() || a.num_firms() != b.num_firms() ||
      a.num_matches() != b.num_matches()) {
    return false;
  }
  std::vector<std::size_t> wmap(a.num_workers()), fmap(a.num_firms());
  for (std::size_t w = 0; w < a.num_workers(); ++w) {
    auto other = b.find_worker(a.worker_key(w));
    if (!other) return false;
    wmap[w] = *other;
  }
  for (std::size_t f = 0; f < a.num_firms(); ++f) {
    auto other = b.find_firm(a.firm_key(f));
    if (!other) return false;
    fmap[f] = *other;
  }
  for (const Match& m : a.matches()) {
    auto e = b.find_match(wmap[m.worker], fmap[m.firm]);
    if (!e || b.match(*e).outcome != m.outcome) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// NetworkBuilder

std::size_t NetworkBuilder::declare_worker(std::string_view key) {
  std::string k(key);
  auto [it, inserted] = net_.worker_index_.emplace(k, net_.worker_keys_.size());
  if (inserted) net_.worker_keys_.push_back(std::move(k));
  return it->second;
}

std::size_t NetworkBuilder::declare_firm(std::string_view key) {
  std::string k(key);
  auto [it, inserted] = net_.firm_index_.emplace(k, net_.firm_keys_.size());
  if (inserted) net_.firm_keys_.push_back(std::move(k));
  return it->second;
}

void NetworkBuilder::add(std::string_view worker, std::string_view firm, double outcome) {
  const std::size_t w = declare_worker(worker);
  const std::size_t f = declare_firm(firm);
  auto [it, inserted] = pair_index_.emplace(pair_key(w, f), net_.matches_.size());
  if (inserted) {
    net_.matches_.push_back({w, f, 0.0, 0});
    accum_.push_back({});
  }
  accum_[it->second].sum += outcome;
  accum_[it->second].count += 1;
}

MatchingNetwork NetworkBuilder::build() {
  for (std::size_t e = 0; e < net_.matches_.size(); ++e) {
    net_.matches_[e].multiplicity = accum_[e].count;
    net_.matches_[e].outcome =
        accum_[e].count == 1 ? accum_[e].sum : accum_[e].sum / static_cast<double>(accum_[e].count);
  }
  net_.finalize();
  MatchingNetwork out = std::move(net_);
  net_ = MatchingNetwork();
  accum_.clear();
  pair_index_.clear();
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion

MatchingNetwork load_network(std::span<const EdgeRow> rows) {
  if (rows.empty()) throw Error(ErrorCode::kEmptyNetwork, "edge list contains no rows");
  NetworkBuilder builder;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const EdgeRow& row = rows[r];
    if (row.worker.empty() || row.firm.empty()) {
      throw Error(ErrorCode::kParse, "row " + std::to_string(r + 1) + ": empty node key");
    }
    if (!std::isfinite(row.outcome)) {
      throw Error(ErrorCode::kParse, "row " + std::to_string(r + 1) + ": outcome is not finite");
    }
    builder.add(row.worker, row.firm, row.outcome);
  }
  return builder.build();
}

std::vector<EdgeRow> read_edge_rows(std::istream& in, std::string_view source, char delimiter) {
  LineReader reader(in);
  expect_header(reader, source, delimiter, {"worker", "firm", "outcome"});
  std::vector<EdgeRow> rows;
  std::vector<std::string> fields;
  std::string line;
  while (reader.next(line)) {
    const std::string row_tag = "row " + std::to_string(rows.size() + 1) + ": ";
    if (!split_fields(line, delimiter, fields)) parse_fail(source, reader.number(), row_tag + "unterminated quote");
    if (fields.size() != 3) {
      parse_fail(source, reader.number(),
                 row_tag + "expected 3 fields, found " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) parse_fail(source, reader.number(), row_tag + "missing worker key");
    if (fields[1].empty()) parse_fail(source, reader.number(), row_tag + "missing firm key");
    EdgeRow row{fields[0], fields[1], 0.0};
    if (!parse_real(fields[2], row.outcome)) {
      parse_fail(source, reader.number(), row_tag + "non-numeric outcome `" + fields[2] + "`");
    }
    if (!std::isfinite(row.outcome)) parse_fail(source, reader.number(), row_tag + "outcome is not finite");
    rows.push_back(std::move(row));
  }
  if (in.bad()) throw Error(ErrorCode::kIo, std::string(source) + ": read error");
  return rows;
}

MatchingNetwork read_edge_list(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open edge list `" + path.string() + "`");
  const auto rows = read_edge_rows(in, path.string(), delimiter);
  if (rows.empty()) throw Error(ErrorCode::kEmptyNetwork, path.string() + ": edge list contains no rows");
  return load_network(rows);
}

std::unordered_map<std::string, double> read_id_values(std::istream& in, std::string_view source,
                                                       char delimiter) {
  LineReader reader(in);
  expect_header(reader, source, delimiter, {"id", "value"});
  std::unordered_map<std::string, double> values;
  std::vector<std::string> fields;
  std::string line;
  std::size_t row = 0;
  while (reader.next(line)) {
    ++row;
    const std::string row_tag = "row " + std::to_string(row) + ": ";
    if (!split_fields(line, delimiter, fields)) parse_fail(source, reader.number(), row_tag + "unterminated quote");
    if (fields.size() != 2) {
      parse_fail(source, reader.number(), row_tag + "expected 2 fields, found " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) parse_fail(source, reader.number(), row_tag + "missing id");
    double v = 0.0;
    if (!parse_real(fields[1], v) || !std::isfinite(v)) {
      parse_fail(source, reader.number(), row_tag + "invalid value `" + fields[1] + "`");
    }
    if (!values.emplace(fields[0], v).second) {
      parse_fail(source, reader.number(), row_tag + "duplicate id `" + fields[0] + "`");
    }
  }
  if (in.bad()) throw Error(ErrorCode::kIo, std::string(source) + ": read error");
  return values;
}

std::unordered_map<std::string, double> read_id_value_file(const std::filesystem::path& path,
                                                           char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open `" + path.string() + "`");
  return read_id_values(in, path.string(), delimiter);
}

std::string format_real(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

void write_edge_list(std::ostream& out, const MatchingNetwork& net, char delimiter) {
  out << "worker" << delimiter << "firm" << delimiter << "outcome\n";
  for (std::size_t w : net.workers_by_key()) {
    for (const Incidence& inc : net.worker_neighbors(w)) {
      out << quote_if_needed(net.worker_key(w), delimiter) << delimiter
          << quote_if_needed(net.firm_key(inc.node), delimiter) << delimiter
          << format_real(net.match(inc.match).outcome) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Productivity assignments

ResolvedProductivity resolve(const ProductivityAssignment& prod, const MatchingNetwork& net) {
  ResolvedProductivity out;
  out.beta = prod.beta;
  out.alpha.resize(net.num_workers());
  out.psi.resize(net.num_firms());
  for (std::size_t w = 0; w < net.num_workers(); ++w) {
    auto it = prod.alpha.find(net.worker_key(w));
    if (it == prod.alpha.end()) {
      throw Error(ErrorCode::kIncompleteAssignment, "no alpha for worker `" + net.worker_key(w) + "`");
    }
    out.alpha[w] = it->second;
  }
  for (std::size_t f = 0; f < net.num_firms(); ++f) {
    auto it = prod.psi.find(net.firm_key(f));
    if (it == prod.psi.end()) {
      throw Error(ErrorCode::kIncompleteAssignment, "no psi for firm `" + net.firm_key(f) + "`");
    }
    out.psi[f] = it->second;
  }
  return out;
}

ProductivityAssignment to_assignment(const ResolvedProductivity& prod, const MatchingNetwork& net) {
  ProductivityAssignment out;
  out.beta = prod.beta;
  for (std::size_t w = 0; w < net.num_workers(); ++w) out.alpha[net.worker_key(w)] = prod.alpha.at(w);
  for (std::size_t f = 0; f < net.num_firms(); ++f) out.psi[net.firm_key(f)] = prod.psi.at(f);
  return out;
}

MatchingNetwork synthesize_outcomes(const MatchingNetwork& net, const ResolvedProductivity& prod,
                                    std::span<const double> noise) {
  if (prod.alpha.size() != net.num_workers() || prod.psi.size() != net.num_firms()) {
    throw Error(ErrorCode::kIncompleteAssignment, "productivity vectors do not cover the network");
  }
  if (!noise.empty() && noise.size() != net.num_matches()) {
    throw Error(ErrorCode::kInvalidArgument, "noise vector length does not match the number of matches");
  }
  std::vector<double> y(net.num_matches());
  for (std::size_t e = 0; e < y.size(); ++e) {
    const Match& m = net.match(e);
    const double a = prod.alpha[m.worker];
    const double p = prod.psi[m.firm];
    double theta = a + p;
    if (prod.beta != 0.0) theta += prod.beta * a * p;
    y[e] = noise.empty() ? theta : theta + noise[e];
  }
  return net.with_outcomes(y);
}

MatchingNetwork synthesize_outcomes(const MatchingNetwork& net, const ProductivityAssignment& prod,
                                    std::span<const double> noise) {
  return synthesize_outcomes(net, resolve(prod, net), noise);
}

}  // namespace bimatch
