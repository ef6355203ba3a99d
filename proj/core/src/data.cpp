#include "grkt/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "grkt/errors.hpp"

namespace grkt {

std::uint32_t IdMap::intern(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it != index_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> IdMap::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Dataset::num_responses() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.valid_len;
  return n;
}

Dataset Dataset::subset(std::span<const std::size_t> sequence_indices) const {
  Dataset out;
  out.question_kcs = question_kcs;
  out.students = students;
  out.questions = questions;
  out.kcs = kcs;
  out.sequences.reserve(sequence_indices.size());
  for (auto i : sequence_indices) out.sequences.push_back(sequences.at(i));
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// RFC 4180 style: quoted fields may contain the delimiter and doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line, char delim, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  fields.push_back(std::move(cur));
  return fields;
}

std::int64_t parse_int(std::string_view s, std::size_t line_no, const char* what) {
  s = trim(s);
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && p == s.data() + s.size()) return v;
  // Accept integral values written as reals, e.g. "17.0".
  double d = 0;
  auto [p2, ec2] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec2 == std::errc() && p2 == s.data() + s.size() && d == static_cast<double>(static_cast<std::int64_t>(d)))
    return static_cast<std::int64_t>(d);
  throw ParseError(std::string("invalid ") + what + " '" + std::string(s) + "'", line_no);
}

std::uint8_t parse_correct(std::string_view s, std::size_t line_no) {
  s = trim(s);
  if (s == "1" || s == "1.0" || s == "true" || s == "True") return 1;
  if (s == "0" || s == "0.0" || s == "false" || s == "False") return 0;
  throw ParseError("unknown correctness value '" + std::string(s) + "'", line_no);
}

struct RawRow {
  std::int64_t timestamp;
  std::size_t order;
  QuestionId question;
  std::vector<KcId> kcs;
  std::uint8_t correct;
};

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (trim(header[i]) == name) return i;
  throw ParseError("missing column '" + name + "' in header", 1);
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else out.push_back(c);
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char n = s[++i];
      out.push_back(n == 't' ? '\t' : n == 'n' ? '\n' : n);
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::vector<KcId> parse_id_list(std::string_view s, std::size_t line_no) {
  std::vector<KcId> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(';', start);
    if (end == std::string_view::npos) end = s.size();
    out.push_back(static_cast<KcId>(parse_int(s.substr(start, end - start), line_no, "id")));
    start = end + 1;
  }
  return out;
}

std::string join_ids(const std::vector<KcId>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(';');
    out += std::to_string(ids[i]);
  }
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto end = line.find('\t', start);
    out.push_back(line.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

Dataset ingest_csv(std::istream& in, const ColumnSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line, schema.delimiter, line_no);
      break;
    }
  }
  if (header.empty()) throw ParseError("no responses: empty input");

  const auto c_student = column_index(header, schema.student);
  const auto c_question = column_index(header, schema.question);
  const auto c_kcs = column_index(header, schema.kcs);
  const auto c_correct = column_index(header, schema.correct);
  const auto c_time = column_index(header, schema.timestamp);
  const auto needed = std::max({c_student, c_question, c_kcs, c_correct, c_time}) + 1;

  Dataset ds;
  std::vector<std::vector<RawRow>> per_student;
  std::size_t order = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line, schema.delimiter, line_no);
    if (f.size() < needed)
      throw ParseError("malformed row: expected at least " + std::to_string(needed) + " fields, got " +
                           std::to_string(f.size()),
                       line_no);
    auto kc_field = trim(f[c_kcs]);
    std::vector<std::string_view> kc_names;
    std::size_t start = 0;
    while (start <= kc_field.size()) {
      auto end = kc_field.find(schema.kc_delimiter, start);
      if (end == std::string_view::npos) end = kc_field.size();
      auto name = trim(kc_field.substr(start, end - start));
      if (!name.empty()) kc_names.push_back(name);
      start = end + 1;
    }
    if (kc_names.empty()) {
      if (schema.skip_rows_without_kcs) continue;
      throw ParseError("malformed row: empty KC list", line_no);
    }
    auto student_name = trim(f[c_student]);
    auto question_name = trim(f[c_question]);
    if (student_name.empty() || question_name.empty())
      throw ParseError("malformed row: empty student or question", line_no);

    RawRow row;
    row.correct = parse_correct(f[c_correct], line_no);
    row.timestamp = parse_int(f[c_time], line_no, "timestamp");
    row.order = order++;
    auto sid = ds.students.intern(student_name);
    row.question = ds.questions.intern(question_name);
    for (auto n : kc_names) row.kcs.push_back(ds.kcs.intern(n));
    std::sort(row.kcs.begin(), row.kcs.end());
    row.kcs.erase(std::unique(row.kcs.begin(), row.kcs.end()), row.kcs.end());
    if (ds.question_kcs.size() <= row.question) ds.question_kcs.resize(row.question + 1);
    if (ds.question_kcs[row.question].empty()) ds.question_kcs[row.question] = row.kcs;
    if (per_student.size() <= sid) per_student.resize(sid + 1);
    per_student[sid].push_back(std::move(row));
  }
  if (order == 0) throw ParseError("no responses");

  ds.sequences.reserve(per_student.size());
  for (std::size_t s = 0; s < per_student.size(); ++s) {
    auto& rows = per_student[s];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const RawRow& a, const RawRow& b) { return a.timestamp < b.timestamp; });
    ResponseSequence seq;
    seq.student = static_cast<StudentId>(s);
    seq.responses.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto ts = schema.timestamp_is_order ? static_cast<std::int64_t>(i) : rows[i].timestamp;
      seq.responses.push_back({rows[i].question, std::move(rows[i].kcs), rows[i].correct, ts});
    }
    seq.valid_len = seq.responses.size();
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

Dataset ingest_csv(const std::filesystem::path& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return ingest_csv(in, schema);
}

Dataset preprocess(const Dataset& ds, std::size_t seq_len, std::size_t min_len) {
  if (seq_len == 0) throw ConfigError("seq_len must be positive");
  Dataset out;
  out.question_kcs = ds.question_kcs;
  out.students = ds.students;
  out.questions = ds.questions;
  out.kcs = ds.kcs;
  const Response pad_template{ds.pad_question(), {ds.pad_kc()}, 0, 0};
  for (const auto& seq : ds.sequences) {
    auto real = seq.real();
    for (std::size_t start = 0; start < real.size(); start += seq_len) {
      auto n = std::min(seq_len, real.size() - start);
      if (n < min_len) continue;
      ResponseSequence sub;
      sub.student = seq.student;
      sub.valid_len = n;
      sub.responses.assign(real.begin() + static_cast<std::ptrdiff_t>(start),
                           real.begin() + static_cast<std::ptrdiff_t>(start + n));
      Response pad = pad_template;
      pad.timestamp = sub.responses.back().timestamp;
      sub.responses.resize(seq_len, pad);
      out.sequences.push_back(std::move(sub));
    }
  }
  return out;
}

std::vector<FoldSplit> make_folds(std::size_t n, std::size_t k, double val_frac, std::uint64_t seed) {
  if (k < 2) throw ConfigError("number of folds must be at least 2");
  if (n < k) throw ConfigError("fewer sequences (" + std::to_string(n) + ") than folds (" + std::to_string(k) + ")");
  if (!(val_frac >= 0.0 && val_frac < 1.0)) throw ConfigError("validation fraction must be in [0, 1)");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<FoldSplit> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    auto lo = f * n / k, hi = (f + 1) * n / k;
    auto& split = folds[f];
    split.fold = f;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < n; ++i) (i >= lo && i < hi ? split.test : pool).push_back(perm[i]);
    auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(pool.size())));
    split.validation.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_val), pool.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
  }
  return folds;
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  out << "grkt-dataset\t" << kDatasetFormatVersion << '\n';
  out << "students\t" << ds.students.size() << '\n';
  for (const auto& n : ds.students.names()) out << escape(n) << '\n';
  out << "kcs\t" << ds.kcs.size() << '\n';
  for (const auto& n : ds.kcs.names()) out << escape(n) << '\n';
  out << "questions\t" << ds.questions.size() << '\n';
  for (std::size_t q = 0; q < ds.questions.size(); ++q)
    out << escape(ds.questions.name(static_cast<QuestionId>(q))) << '\t'
        << (q < ds.question_kcs.size() ? join_ids(ds.question_kcs[q]) : "") << '\n';
  out << "sequences\t" << ds.sequences.size() << '\n';
  for (const auto& s : ds.sequences) out << s.student << '\t' << s.valid_len << '\t' << s.responses.size() << '\n';
  out << "responses\t" << ds.num_responses() << '\n';
  for (std::size_t i = 0; i < ds.sequences.size(); ++i)
    for (const auto& r : ds.sequences[i].real())
      out << i << '\t' << r.question << '\t' << join_ids(r.kcs) << '\t' << int(r.correct) << '\t' << r.timestamp
          << '\n';
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_dataset(out, ds);
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string {
    if (!std::getline(in, line)) throw ParseError("unexpected end of dataset file", line_no);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  auto section = [&](const std::string& name) -> std::size_t {
    auto f = split_tabs(next());
    if (f.size() != 2 || f[0] != name) throw ParseError("expected section '" + name + "'", line_no);
    return static_cast<std::size_t>(parse_int(f[1], line_no, "count"));
  };

  auto head = split_tabs(next());
  if (head.size() != 2 || head[0] != "grkt-dataset") throw ParseError("not a dataset file", line_no);
  if (parse_int(head[1], line_no, "version") != kDatasetFormatVersion)
    throw ParseError("unsupported dataset format version " + head[1], line_no);

  Dataset ds;
  for (std::size_t i = 0, n = section("students"); i < n; ++i) ds.students.intern(unescape(next()));
  for (std::size_t i = 0, n = section("kcs"); i < n; ++i) ds.kcs.intern(unescape(next()));
  auto nq = section("questions");
  ds.question_kcs.resize(nq);
  for (std::size_t q = 0; q < nq; ++q) {
    auto f = split_tabs(next());
    if (f.size() != 2) throw ParseError("malformed question row", line_no);
    ds.questions.intern(unescape(f[0]));
    if (!f[1].empty()) ds.question_kcs[q] = parse_id_list(f[1], line_no);
  }
  if (ds.questions.size() != nq) throw ParseError("duplicate question name", line_no);

  auto ns = section("sequences");
  std::vector<std::size_t> total_len(ns);
  ds.sequences.resize(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    auto f = split_tabs(next());
    if (f.size() != 3) throw ParseError("malformed sequence row", line_no);
    ds.sequences[i].student = static_cast<StudentId>(parse_int(f[0], line_no, "student"));
    ds.sequences[i].valid_len = static_cast<std::size_t>(parse_int(f[1], line_no, "valid_len"));
    total_len[i] = static_cast<std::size_t>(parse_int(f[2], line_no, "length"));
    if (ds.sequences[i].valid_len > total_len[i] || ds.sequences[i].student >= ds.students.size())
      throw ParseError("inconsistent sequence row", line_no);
  }
  auto nr = section("responses");
  for (std::size_t i = 0; i < nr; ++i) {
    auto f = split_tabs(next());
    if (f.size() != 5) throw ParseError("malformed response row", line_no);
    auto s = static_cast<std::size_t>(parse_int(f[0], line_no, "sequence"));
    if (s >= ns) throw ParseError("response references unknown sequence", line_no);
    Response r;
    r.question = static_cast<QuestionId>(parse_int(f[1], line_no, "question"));
    r.kcs = parse_id_list(f[2], line_no);
    r.correct = parse_correct(f[3], line_no);
    r.timestamp = parse_int(f[4], line_no, "timestamp");
    if (r.question >= nq) throw ParseError("unknown question id", line_no);
    for (auto c : r.kcs)
      if (c >= ds.kcs.size()) throw ParseError("unknown KC id", line_no);
    ds.sequences[s].responses.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < ns; ++i) {
    auto& seq = ds.sequences[i];
    if (seq.responses.size() != seq.valid_len) throw ParseError("sequence " + std::to_string(i) + " response count mismatch");
    if (total_len[i] > seq.valid_len) {
      Response pad{ds.pad_question(), {ds.pad_kc()}, 0, seq.valid_len ? seq.responses.back().timestamp : 0};
      seq.responses.resize(total_len[i], pad);
    }
  }
  return ds;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_dataset(in);
}

Dataset load_any(const std::filesystem::path& path, const ColumnSchema& schema) {
  if (path.extension() == ".csv") return ingest_csv(path, schema);
  return read_dataset(path);
}

}  // namespace grkt
