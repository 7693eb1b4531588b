#include "pfr/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace pfr {

namespace {

struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

[[noreturn]] void fail(std::size_t line, std::size_t column, const std::string& what) {
  std::ostringstream msg;
  msg << "line " << line;
  if (column > 0) msg << ", column " << column;
  msg << ": " << what;
  throw ParseError(msg.str());
}

std::vector<Record> read_records(std::istream& in) {
  std::vector<Record> records;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);

  Record current;
  std::string field;
  std::size_t line = 1;
  current.line = 1;
  bool quoted = false;
  bool field_was_quoted = false;
  bool record_has_content = false;

  auto end_field = [&] {
    current.fields.push_back(field);
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    // blank lines are skipped
    if (record_has_content || current.fields.size() > 1) records.push_back(current);
    current = Record{};
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty() || field_was_quoted) fail(line, current.fields.size() + 1, "unexpected quote inside field");
      quoted = true;
      field_was_quoted = true;
      record_has_content = true;
    } else if (c == ',') {
      end_field();
      record_has_content = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
      ++line;
      current.line = line;
    } else {
      if (field_was_quoted) fail(line, current.fields.size() + 1, "characters after closing quote");
      field.push_back(c);
      if (c != ' ' && c != '\t') record_has_content = true;
    }
  }
  if (quoted) fail(line, current.fields.size() + 1, "unterminated quoted field");
  if (!field.empty() || !current.fields.empty() || record_has_content) end_record();
  return records;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool looks_like_header(const Record& r) {
  for (const auto& f : r.fields) {
    if (!trim(f).empty() && !parse_number(f)) return true;
  }
  return false;
}

}  // namespace

DataMatrix ingest_csv(std::istream& in, const CsvOptions& options) {
  std::vector<Record> records = read_records(in);
  if (records.empty()) throw ParseError("empty input: no rows");

  std::vector<std::string> header;
  std::size_t first_data = 0;
  if (looks_like_header(records.front())) {
    for (const auto& f : records.front().fields) header.push_back(trim(f));
    first_data = 1;
  }
  const std::size_t width = records.front().fields.size();
  if (records.size() == first_data) throw ParseError("empty input: header but no data rows");

  std::optional<std::size_t> response;
  if (options.response_column) {
    const std::string& want = *options.response_column;
    if (!header.empty()) {
      for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == want) response = c;
      if (!response) throw ParseError("response column '" + want + "' not found in header");
    } else {
      const auto idx = parse_number(want);
      if (!idx || *idx < 0 || *idx != std::floor(*idx) || *idx >= static_cast<double>(width)) {
        throw ParseError("response column '" + want + "' is not a valid column index");
      }
      response = static_cast<std::size_t>(*idx);
    }
  } else {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == "y") response = c;
  }

  const Index n = static_cast<Index>(records.size() - first_data);
  const Index p = static_cast<Index>(width) - (response ? 1 : 0);
  Matrix X(n, p);
  Vector y;
  if (response) y.resize(n);
  for (std::size_t r = first_data; r < records.size(); ++r) {
    const Record& rec = records[r];
    if (rec.fields.size() != width) {
      fail(rec.line, 0, "expected " + std::to_string(width) + " fields, found " + std::to_string(rec.fields.size()));
    }
    const Index i = static_cast<Index>(r - first_data);
    Index j = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const auto value = parse_number(rec.fields[c]);
      if (response && c == *response) {
        if (!value && !trim(rec.fields[c]).empty()) fail(rec.line, c + 1, "non-numeric response '" + rec.fields[c] + "'");
        y(i) = value ? *value : std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      if (!value) fail(rec.line, c + 1, "non-numeric value '" + rec.fields[c] + "'");
      X(i, j++) = *value;
    }
  }
  DataMatrix data = response ? make_data(std::move(X), std::move(y)) : make_data(std::move(X));
  if (options.center) data.center();
  return data;
}

DataMatrix ingest_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return ingest_csv(in, options);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void emit_csv(std::ostream& out, const DataMatrix& data) {
  for (Index j = 0; j < data.cols(); ++j) out << (j ? "," : "") << 'x' << j + 1;
  if (data.y) out << (data.cols() ? "," : "") << 'y';
  out << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) out << (j ? "," : "") << format_double(data.X(i, j));
    if (data.y) {
      out << (data.cols() ? "," : "");
      if (!std::isnan((*data.y)(i))) out << format_double((*data.y)(i));
    }
    out << '\n';
  }
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace pfr
