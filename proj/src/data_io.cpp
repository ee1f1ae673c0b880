#include "interpnn/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string_view>
#include <tuple>

#include "interpnn/random.hpp"

namespace interpnn {

ParseError::ParseError(const std::filesystem::path &path, std::size_t line, const std::string &message)
    : std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + message), line_(line) {}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_double(std::string_view field, double &out) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') {
    field.remove_prefix(1);
  }
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc{} && ptr == field.data() + field.size() && !field.empty();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  while (true) {
    const auto comma = line.find(',');
    fields.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) {
      break;
    }
    line.remove_prefix(comma + 1);
  }
  return fields;
}

std::ofstream open_output(const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

void finish_output(std::ofstream &out, const std::filesystem::path &path) {
  out.flush();
  if (!out) {
    throw std::runtime_error("failed writing '" + path.string() + "'");
  }
}

} // namespace

CsvTable read_csv(const std::filesystem::path &path, const CsvSchema &schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path.string() + "'");
  }

  CsvTable table;
  std::optional<std::size_t> width = schema.n_features;
  if (width && *width == 0) {
    throw std::invalid_argument("CsvSchema: n_features must be positive");
  }
  std::vector<double> row;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) {
      view.remove_prefix(3);
    }
    if (trim(view).empty()) {
      continue;
    }
    if (schema.header && line_no == 1) {
      continue;
    }
    const auto fields = split_fields(view);
    const std::size_t label_cols = schema.has_label ? 1 : 0;
    if (!width) {
      if (fields.size() <= label_cols) {
        throw ParseError(path, line_no, "row has no feature columns");
      }
      width = fields.size() - label_cols;
    }
    if (fields.size() != *width + label_cols) {
      throw ParseError(path, line_no,
                       "expected " + std::to_string(*width + label_cols) + " fields, found " +
                           std::to_string(fields.size()));
    }
    row.resize(*width);
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double value = 0.0;
      if (!parse_double(fields[j], value) || !std::isfinite(value)) {
        throw ParseError(path, line_no,
                         "field " + std::to_string(j + 1) + " is not a finite number: '" +
                             std::string(trim(fields[j])) + "'");
      }
      if (j < *width) {
        row[j] = value;
      } else {
        if (schema.task == Task::Classification && value != 0.0 && value != 1.0) {
          throw ParseError(path, line_no, "class label must be 0 or 1");
        }
        table.responses.push_back(value);
      }
    }
    table.features.push_row(row);
  }
  return table;
}

Dataset load_csv(const std::filesystem::path &path, const CsvSchema &schema) {
  if (!schema.has_label) {
    throw std::invalid_argument("load_csv: a dataset needs a response column");
  }
  CsvTable table = read_csv(path, schema);
  return Dataset(std::move(table.features), std::move(table.responses), schema.task);
}

void write_dataset(const Dataset &dataset, const std::filesystem::path &path, bool header) {
  auto out = open_output(path);
  if (header) {
    for (std::size_t j = 0; j < dataset.d(); ++j) {
      out << 'x' << j << ',';
    }
    out << "y\n";
  }
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    for (double v : dataset.row(i)) {
      out << format_double(v) << ',';
    }
    out << format_double(dataset.response(i)) << '\n';
  }
  finish_output(out, path);
}

Split split_normalize(const Dataset &dataset, const SplitSpec &spec) {
  const std::size_t n = dataset.n();
  // Both halves become Datasets, which need two rows each.
  if (spec.test_size < 2 || spec.test_size >= n) {
    throw std::invalid_argument("split: test size must satisfy 2 <= test_size < n (n = " +
                                std::to_string(n) + ")");
  }
  if (n - spec.test_size < 2) {
    throw std::invalid_argument("split: training side needs at least 2 rows");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(spec.seed);
  // Partial Fisher-Yates: the first test_size slots become the test set.
  for (std::size_t i = 0; i < spec.test_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<std::size_t> test_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.test_size));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(spec.test_size), order.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());

  const std::size_t d = dataset.d();
  NormalizationStats stats;
  stats.mean.assign(d, 0.0);
  stats.sd.assign(d, 1.0);
  stats.constant.assign(d, false);
  if (spec.normalize == Normalization::ZScoreFromTrain) {
    const auto count = static_cast<double>(train_rows.size());
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t r : train_rows) {
        mean += dataset.row(r)[j];
      }
      mean /= count;
      double ss = 0.0;
      for (std::size_t r : train_rows) {
        const double dev = dataset.row(r)[j] - mean;
        ss += dev * dev;
      }
      const double sd = std::sqrt(ss / count);
      if (sd > 0.0) {
        stats.mean[j] = mean;
        stats.sd[j] = sd;
      } else {
        stats.mean[j] = 0.0;
        stats.sd[j] = 1.0;
        stats.constant[j] = true;
      }
    }
  }

  auto take = [&](const std::vector<std::size_t> &rows) {
    Matrix x(rows.size(), d);
    std::vector<double> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto src = dataset.row(rows[i]);
      for (std::size_t j = 0; j < d; ++j) {
        x(i, j) = (src[j] - stats.mean[j]) / stats.sd[j];
      }
      y[i] = dataset.response(rows[i]);
    }
    return std::make_pair(std::move(x), std::move(y));
  };
  auto [train_x, train_y] = take(train_rows);
  auto [test_x, test_y] = take(test_rows);
  return Split{Dataset(std::move(train_x), std::move(train_y), dataset.task()),
               Dataset(std::move(test_x), std::move(test_y), dataset.task()),
               std::move(train_rows), std::move(test_rows), std::move(stats)};
}

void write_results(std::vector<SweepRow> rows, const std::filesystem::path &path) {
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow &a, const SweepRow &b) {
    return std::tie(a.n, a.scheme, a.k, a.repetition, a.metric_name) <
           std::tie(b.n, b.scheme, b.k, b.repetition, b.metric_name);
  });
  auto out = open_output(path);
  out << kResultsHeader << '\n';
  for (const auto &r : rows) {
    out << r.n << ',' << r.k << ',' << r.scheme << ',' << r.repetition << ',' << r.metric_name
        << ',' << format_double(r.metric_value) << ','
        << (r.bias_proxy ? format_double(*r.bias_proxy) : "") << ','
        << (r.variance_proxy ? format_double(*r.variance_proxy) : "") << '\n';
  }
  finish_output(out, path);
}

void write_summary(std::vector<SweepSummary> rows, const std::filesystem::path &path) {
  std::stable_sort(rows.begin(), rows.end(), [](const SweepSummary &a, const SweepSummary &b) {
    return std::tie(a.n, a.scheme) < std::tie(b.n, b.scheme);
  });
  auto out = open_output(path);
  out << kSummaryHeader << '\n';
  for (const auto &r : rows) {
    out << r.n << ',' << r.scheme << ',';
    if (r.optimal_k > 0) {
      out << r.optimal_k;
    }
    out << ',' << format_double(r.optimal_metric) << '\n';
  }
  finish_output(out, path);
}

} // namespace interpnn
