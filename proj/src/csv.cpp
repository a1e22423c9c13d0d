#include "gpcm/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <system_error>

#include "gpcm/errors.hpp"

namespace gpcm {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw invalid_input_error("cannot open '" + path.string() +
                              "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw invalid_input_error("cannot open '" + path.string() +
                              "' for reading");
  return in;
}

// Minimal CSV quoting: fields containing a comma, quote, or newline are
// wrapped in double quotes with embedded quotes doubled.
std::string escape_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_line(const std::string& line, long row) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          i += 2;
          continue;
        }
        quoted = false;
        ++i;
        continue;
      }
      cur += c;
      ++i;
      continue;
    }
    if (c == '"' && cur.empty()) {
      quoted = true;
      ++i;
      continue;
    }
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
      ++i;
      continue;
    }
    cur += c;
    ++i;
  }
  if (quoted)
    throw parse_error("unterminated quoted field", row,
                      static_cast<long>(fields.size()) + 1);
  fields.push_back(cur);
  return fields;
}

// Reads all lines, strips CR, drops trailing blank lines.
std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

double parse_double_cell(const std::string& cell, long row, long col) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw parse_error("expected a number, got '" + cell + "'", row, col);
  return v;
}

long parse_long_cell(const std::string& cell, long row, long col) {
  long v = 0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw parse_error("expected an integer, got '" + cell + "'", row, col);
  return v;
}

void expect_width(const std::vector<std::string>& fields, size_t width,
                  long row) {
  if (fields.size() != width)
    throw parse_error("expected " + std::to_string(width) + " fields, got " +
                          std::to_string(fields.size()),
                      row, static_cast<long>(fields.size()));
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

ParsedResponses parse_response_csv(const std::filesystem::path& path,
                                   const std::vector<int>* m_per_item) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw parse_error("empty response file", 0, 0);

  ParsedResponses out;
  out.item_names = split_line(lines[0], 0);
  const int nj = static_cast<int>(out.item_names.size());
  if (nj < 1 || (nj == 1 && out.item_names[0].empty()))
    throw parse_error("response header has no item columns", 0, 1);
  if (m_per_item && static_cast<int>(m_per_item->size()) != nj)
    throw invalid_input_error(
        "m_per_item length does not match the response header");

  const int n = static_cast<int>(lines.size()) - 1;
  if (n < 1) throw parse_error("response file has no data rows", 1, 1);

  out.data = ResponseMatrix(n, nj);
  out.m_inferred.assign(nj, 0);
  for (int i = 0; i < n; ++i) {
    long row = i + 1;
    std::vector<std::string> fields = split_line(lines[i + 1], row);
    expect_width(fields, static_cast<size_t>(nj), row);
    for (int j = 0; j < nj; ++j) {
      long v = parse_long_cell(fields[j], row, j + 1);
      if (v < 0)
        throw parse_error("negative category", row, j + 1);
      if (m_per_item && v >= (*m_per_item)[j])
        throw parse_error("category " + std::to_string(v) +
                              " out of range for item with " +
                              std::to_string((*m_per_item)[j]) + " categories",
                          row, j + 1);
      out.data(i, j) = static_cast<int>(v);
      out.m_inferred[j] = std::max(out.m_inferred[j], static_cast<int>(v) + 1);
    }
  }
  if (m_per_item) out.m_inferred = *m_per_item;

  out.category_counts.resize(nj);
  for (int j = 0; j < nj; ++j) out.category_counts[j].assign(out.m_inferred[j], 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < nj; ++j) ++out.category_counts[j][out.data(i, j)];
  return out;
}

void write_response_csv(const std::filesystem::path& path,
                        const ResponseMatrix& data,
                        const std::vector<std::string>& item_names) {
  if (static_cast<int>(item_names.size()) != data.n_items)
    throw invalid_input_error("item name count does not match the data");
  std::ofstream out = open_out(path);
  for (int j = 0; j < data.n_items; ++j)
    out << (j ? "," : "") << escape_field(item_names[j]);
  out << "\n";
  for (int i = 0; i < data.n_persons; ++i) {
    for (int j = 0; j < data.n_items; ++j)
      out << (j ? "," : "") << data(i, j);
    out << "\n";
  }
}

void write_item_csv(const std::filesystem::path& path, const ItemBank& bank) {
  bank.validate();
  int m_max = 0;
  for (const auto& it : bank.items) m_max = std::max(m_max, it.n_categories());
  std::ofstream out = open_out(path);
  out << "item,a";
  for (int k = 2; k <= m_max; ++k) out << ",b" << k;
  out << "\n";
  for (int j = 0; j < bank.n_items(); ++j) {
    const auto& it = bank.items[j];
    out << (j + 1) << "," << format_double(it.discrimination);
    for (int k = 2; k <= m_max; ++k) {
      out << ",";
      if (k - 2 < static_cast<int>(it.steps.size()))
        out << format_double(it.steps[k - 2]);
    }
    out << "\n";
  }
}

ItemBank parse_item_csv(const std::filesystem::path& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw parse_error("empty item file", 0, 0);

  std::vector<std::string> header = split_line(lines[0], 0);
  if (header.size() < 3 || header[0] != "item" || header[1] != "a")
    throw parse_error("item header must start with item,a,b2", 0, 1);
  for (size_t c = 2; c < header.size(); ++c)
    if (header[c] != "b" + std::to_string(c))
      throw parse_error("expected column b" + std::to_string(c) + ", got '" +
                            header[c] + "'",
                        0, static_cast<long>(c) + 1);

  ItemBank bank;
  for (size_t r = 1; r < lines.size(); ++r) {
    long row = static_cast<long>(r);
    std::vector<std::string> fields = split_line(lines[r], row);
    expect_width(fields, header.size(), row);
    ItemParams item;
    item.discrimination = parse_double_cell(fields[1], row, 2);
    bool ended = false;
    for (size_t c = 2; c < fields.size(); ++c) {
      if (fields[c].empty()) {
        ended = true;
        continue;
      }
      if (ended)
        throw parse_error("step value after a blank step cell", row,
                          static_cast<long>(c) + 1);
      item.steps.push_back(
          parse_double_cell(fields[c], row, static_cast<long>(c) + 1));
    }
    if (item.steps.empty())
      throw parse_error("item needs at least one step column", row, 3);
    if (!std::isfinite(item.discrimination) || item.discrimination <= 0.0)
      throw parse_error("discrimination must be finite and > 0", row, 2);
    for (double s : item.steps)
      if (!std::isfinite(s))
        throw parse_error("step value is not finite", row, 3);
    bank.items.push_back(std::move(item));
  }
  if (bank.items.empty()) throw parse_error("item file has no rows", 1, 1);
  bank.validate();
  return bank;
}

void write_ability_csv(const std::filesystem::path& path,
                       const ThetaVector& theta,
                       const std::vector<double>* sd) {
  if (sd && sd->size() != theta.size())
    throw invalid_input_error("sd vector length does not match theta");
  std::ofstream out = open_out(path);
  out << "person,estimate,sd\n";
  for (size_t i = 0; i < theta.size(); ++i) {
    out << (i + 1) << "," << format_double(theta[i]) << ",";
    if (sd) out << format_double((*sd)[i]);
    out << "\n";
  }
}

ThetaVector parse_ability_csv(const std::filesystem::path& path,
                              std::vector<double>* sd_out) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw parse_error("empty ability file", 0, 0);
  std::vector<std::string> header = split_line(lines[0], 0);
  if (header.size() != 3 || header[0] != "person" ||
      header[1] != "estimate" || header[2] != "sd")
    throw parse_error("ability header must be person,estimate,sd", 0, 1);
  ThetaVector out;
  if (sd_out) sd_out->clear();
  for (size_t r = 1; r < lines.size(); ++r) {
    long row = static_cast<long>(r);
    std::vector<std::string> f = split_line(lines[r], row);
    expect_width(f, 3, row);
    long person = parse_long_cell(f[0], row, 1);
    if (person != static_cast<long>(r))
      throw parse_error("person ids must run 1..n in order", row, 1);
    out.push_back(parse_double_cell(f[1], row, 2));
    if (sd_out)
      sd_out->push_back(f[2].empty()
                            ? std::numeric_limits<double>::quiet_NaN()
                            : parse_double_cell(f[2], row, 3));
  }
  if (out.empty()) throw parse_error("ability file has no rows", 1, 1);
  return out;
}

void write_theta_csv(const std::filesystem::path& path,
                     const ThetaVector& theta) {
  std::ofstream out = open_out(path);
  out << "theta\n";
  for (double t : theta) out << format_double(t) << "\n";
}

ThetaVector parse_theta_csv(const std::filesystem::path& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw parse_error("empty theta file", 0, 0);
  std::vector<std::string> header = split_line(lines[0], 0);
  if (header.size() != 1 || header[0] != "theta")
    throw parse_error("theta header must be a single 'theta' column", 0, 1);
  ThetaVector out;
  for (size_t r = 1; r < lines.size(); ++r) {
    long row = static_cast<long>(r);
    std::vector<std::string> fields = split_line(lines[r], row);
    expect_width(fields, 1, row);
    out.push_back(parse_double_cell(fields[0], row, 1));
  }
  if (out.empty()) throw parse_error("theta file has no rows", 1, 1);
  return out;
}

void write_tidy_csv(const std::filesystem::path& path,
                    const RecoveryReport& report) {
  std::ofstream out = open_out(path);
  out << "condition_id,distribution,sample_size,test_length,replication,"
         "estimator,param_class,param_name,truth,estimate\n";
  const std::string prefix = report.condition.id() + "," +
                             report.condition.distribution.name() + "," +
                             std::to_string(report.condition.sample_size) +
                             "," +
                             std::to_string(report.condition.test_length);
  for (const auto& rec : report.records)
    out << prefix << "," << rec.replication << "," << rec.estimator << ","
        << rec.param_class << "," << escape_field(rec.param_name) << ","
        << format_double(rec.truth) << "," << format_double(rec.estimate)
        << "\n";
}

std::vector<RecoveryReport> parse_tidy_csv(const std::filesystem::path& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw parse_error("empty records file", 0, 0);
  std::vector<std::string> header = split_line(lines[0], 0);
  const std::vector<std::string> want = {
      "condition_id", "distribution", "sample_size", "test_length",
      "replication",  "estimator",    "param_class", "param_name",
      "truth",        "estimate"};
  if (header != want)
    throw parse_error("unexpected records header", 0, 1);

  std::vector<RecoveryReport> reports;
  std::map<std::string, size_t> index;
  for (size_t r = 1; r < lines.size(); ++r) {
    long row = static_cast<long>(r);
    std::vector<std::string> f = split_line(lines[r], row);
    expect_width(f, want.size(), row);

    auto it = index.find(f[0]);
    if (it == index.end()) {
      RecoveryReport rep;
      rep.condition.distribution = LatentDistribution::from_name(f[1]);
      rep.condition.sample_size =
          static_cast<int>(parse_long_cell(f[2], row, 3));
      rep.condition.test_length =
          static_cast<int>(parse_long_cell(f[3], row, 4));
      rep.condition.n_replications = 1;
      index.emplace(f[0], reports.size());
      reports.push_back(std::move(rep));
      it = index.find(f[0]);
    }
    RecoveryReport& rep = reports[it->second];
    if (rep.condition.distribution.name() != f[1] ||
        rep.condition.sample_size != parse_long_cell(f[2], row, 3) ||
        rep.condition.test_length != parse_long_cell(f[3], row, 4))
      throw parse_error("condition fields changed within condition_id '" +
                            f[0] + "'",
                        row, 2);

    ReplicationRecord rec;
    rec.replication = static_cast<int>(parse_long_cell(f[4], row, 5));
    if (rec.replication < 1)
      throw parse_error("replication must be >= 1", row, 5);
    rec.estimator = f[5];
    rec.param_class = f[6];
    rec.param_name = f[7];
    rec.truth = parse_double_cell(f[8], row, 9);
    rec.estimate = parse_double_cell(f[9], row, 10);
    rep.condition.n_replications =
        std::max(rep.condition.n_replications, rec.replication);
    rep.records.push_back(std::move(rec));
  }
  for (auto& rep : reports) rep.recompute_summaries();
  return reports;
}

void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<RecoveryReport>& reports) {
  std::ofstream out = open_out(path);
  out << "condition_id,distribution,sample_size,test_length,estimator,"
         "param_class,n_parameters,n_replications,bias_mean,bias_sd,"
         "rmse_mean,rmse_sd,mse_mean,mse_sd\n";
  for (const auto& rep : reports)
    for (const auto& [est, classes] : rep.summaries)
      for (const auto& [cls, cs] : classes)
        out << rep.condition.id() << "," << rep.condition.distribution.name()
            << "," << rep.condition.sample_size << ","
            << rep.condition.test_length << "," << est << "," << cls << ","
            << cs.n_parameters << "," << cs.n_replications << ","
            << format_double(cs.bias_mean) << "," << format_double(cs.bias_sd)
            << "," << format_double(cs.rmse_mean) << ","
            << format_double(cs.rmse_sd) << "," << format_double(cs.mse_mean)
            << "," << format_double(cs.mse_sd) << "\n";
}

void write_draws_csv(const std::filesystem::path& path,
                     const PosteriorDraws& draws) {
  std::ofstream out = open_out(path);
  out << "chain,iteration,parameter,value\n";
  for (int c = 0; c < draws.n_chains; ++c)
    for (int t = 0; t < draws.n_retained; ++t)
      for (int p = 0; p < draws.n_params(); ++p)
        out << (c + 1) << "," << (t + 1) << ","
            << escape_field(draws.names[p]) << ","
            << format_double(draws.at(c, t, p)) << "\n";
}

void write_mcmc_summary_csv(const std::filesystem::path& path,
                            const std::vector<SummaryRow>& rows,
                            const std::vector<double>& psrf) {
  if (!psrf.empty() && psrf.size() != rows.size())
    throw invalid_input_error("psrf length does not match the summary rows");
  std::ofstream out = open_out(path);
  out << "parameter,mean,sd,q5,q95,psrf\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    out << escape_field(rows[i].name) << "," << format_double(rows[i].mean)
        << "," << format_double(rows[i].sd) << ","
        << format_double(rows[i].q5) << "," << format_double(rows[i].q95)
        << ",";
    if (!psrf.empty()) out << format_double(psrf[i]);
    out << "\n";
  }
}

void write_compare_csv(const std::filesystem::path& path,
                       const CompareReport& report) {
  std::ofstream out = open_out(path);
  out << "name,value_a,value_b\n";
  for (const auto& d : report.item_params)
    out << escape_field(d.name) << "," << format_double(d.value_a) << ","
        << format_double(d.value_b) << "\n";
  out << "ability_mean_diff," << format_double(report.ability_mean_diff)
      << ",\n";
  out << "ability_sd_diff," << format_double(report.ability_sd_diff) << ",\n";
  out << "ability_max_abs_diff," << format_double(report.ability_max_abs_diff)
      << ",\n";
  out << "ability_correlation," << format_double(report.ability_correlation)
      << ",\n";
}

}  // namespace gpcm
