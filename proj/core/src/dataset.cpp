#include "ramtsf/dataset.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ramtsf {

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

void SeriesDataset::segment(Split s, int64_t& begin, int64_t& end) const {
  switch (s) {
    case Split::train: begin = 0; end = train_end; return;
    case Split::val: begin = train_end; end = val_end; return;
    case Split::test: begin = val_end; end = steps; return;
  }
  throw ValueError("segment: bad split");
}

void SeriesDataset::validate() const {
  if (steps <= 0 || nodes <= 0 || channels <= 0) {
    throw DataError("dataset: steps/nodes/channels must be positive");
  }
  size_t n_vals = static_cast<size_t>(steps * nodes * channels);
  if (values.size() != n_vals || raw_values.size() != n_vals) {
    throw DataError("dataset: value buffer size mismatch");
  }
  if (missing.size() != static_cast<size_t>(steps * nodes)) {
    throw DataError("dataset: missing-mask size mismatch");
  }
  if (epoch_seconds.size() != static_cast<size_t>(steps) ||
      tod.size() != static_cast<size_t>(steps) || dow.size() != static_cast<size_t>(steps)) {
    throw DataError("dataset: calendar size mismatch");
  }
  if (train_end < 0 || train_end > val_end || val_end > steps) {
    throw DataError("dataset: split boundaries out of order");
  }
}

void set_splits(SeriesDataset& ds, double train_ratio, double val_ratio) {
  if (!(train_ratio > 0.0) || val_ratio < 0.0 || train_ratio + val_ratio > 1.0) {
    throw ValueError("set_splits: need train_ratio > 0, val_ratio >= 0, sum <= 1");
  }
  ds.train_end = static_cast<int64_t>(std::floor(train_ratio * static_cast<double>(ds.steps)));
  ds.val_end = ds.train_end +
               static_cast<int64_t>(std::floor(val_ratio * static_cast<double>(ds.steps)));
}

int64_t tod_index(int64_t epoch, int64_t steps_per_day) {
  if (steps_per_day <= 0) throw ValueError("tod_index: steps_per_day must be positive");
  int64_t sec = ((epoch % 86400) + 86400) % 86400;
  int64_t idx = sec / (86400 / steps_per_day);
  return idx < steps_per_day ? idx : steps_per_day - 1;
}

int64_t dow_index(int64_t epoch) {
  int64_t day = epoch >= 0 ? epoch / 86400 : (epoch - 86399) / 86400;
  return ((day + 3) % 7 + 7) % 7;  // 1970-01-01 was a Thursday; 0 = Monday
}

namespace {

bool civil_to_epoch(int64_t y, int64_t m, int64_t d, int64_t hh, int64_t mm, int64_t ss,
                    int64_t& out) {
  if (m < 1 || m > 12 || d < 1 || d > 31 || hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 ||
      ss > 60) {
    return false;
  }
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const int64_t yoe = y - era * 400;
  const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  const int64_t days = era * 146097 + doe - 719468;
  out = days * 86400 + hh * 3600 + mm * 60 + ss;
  return true;
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  size_t i = (s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool is_nan_token(const std::string& s) {
  return s.empty() || s == "nan" || s == "NaN" || s == "NAN";
}

}  // namespace

int64_t parse_timestamp(const std::string& text) {
  if (all_digits(text)) {
    return std::strtoll(text.c_str(), nullptr, 10);
  }
  int64_t y, mo, d, hh, mm, ss, epoch;
  if (std::sscanf(text.c_str(), "%lld-%lld-%lld %lld:%lld:%lld",
                  reinterpret_cast<long long*>(&y), reinterpret_cast<long long*>(&mo),
                  reinterpret_cast<long long*>(&d), reinterpret_cast<long long*>(&hh),
                  reinterpret_cast<long long*>(&mm), reinterpret_cast<long long*>(&ss)) == 6 &&
      civil_to_epoch(y, mo, d, hh, mm, ss, epoch)) {
    return epoch;
  }
  throw DataError("cannot parse timestamp \"" + text + "\"");
}

SeriesDataset load_csv(const std::string& path, const CsvLayout& layout) {
  std::ifstream f(path);
  if (!f) throw IoError(path + ": cannot open for reading");
  std::string line;
  if (!std::getline(f, line)) throw DataError(path + ": empty file");
  std::vector<std::string> header = split_fields(line);
  size_t time_col = header.size();
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == layout.time_column) {
      time_col = i;
      break;
    }
  }
  if (time_col == header.size()) {
    throw DataError(path + ": no \"" + layout.time_column + "\" column in the header");
  }
  SeriesDataset ds;
  ds.channels = 1;
  ds.steps_per_day = layout.steps_per_day;
  for (size_t i = 0; i < header.size(); ++i) {
    if (i != time_col) ds.node_names.push_back(header[i]);
  }
  ds.nodes = static_cast<int64_t>(ds.node_names.size());
  if (ds.nodes == 0) throw DataError(path + ": no node columns");

  int64_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    int64_t epoch;
    try {
      epoch = parse_timestamp(fields[time_col]);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!ds.epoch_seconds.empty() && epoch <= ds.epoch_seconds.back()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": timestamps must be strictly increasing");
    }
    ds.epoch_seconds.push_back(epoch);
    ds.tod.push_back(tod_index(epoch, layout.steps_per_day));
    ds.dow.push_back(dow_index(epoch));
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i == time_col) continue;
      const std::string& s = fields[i];
      double v;
      bool miss = false;
      if (is_nan_token(s)) {
        v = std::nan("");
        miss = true;
      } else {
        char* end = nullptr;
        v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0') {
          throw DataError(path + ":" + std::to_string(line_no) + ": bad number \"" + s + "\"");
        }
        if (!std::isfinite(v)) miss = true;
        if (layout.missing_sentinel.has_value() && v == *layout.missing_sentinel) miss = true;
      }
      ds.values.push_back(v);
      ds.missing.push_back(miss ? 1 : 0);
    }
  }
  ds.steps = static_cast<int64_t>(ds.epoch_seconds.size());
  if (ds.steps == 0) throw DataError(path + ": no data rows");
  ds.raw_values = ds.values;
  ds.train_end = ds.steps;
  ds.val_end = ds.steps;
  ds.validate();
  return ds;
}

void write_csv(const SeriesDataset& ds, const std::string& path) {
  ds.validate();
  if (ds.channels != 1) throw DataError("write_csv: only single-channel series");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(path + ": cannot open for writing");
  f << "timestamp";
  for (int64_t n = 0; n < ds.nodes; ++n) {
    f << ',';
    if (n < static_cast<int64_t>(ds.node_names.size())) {
      f << ds.node_names[static_cast<size_t>(n)];
    } else {
      f << "n" << n;
    }
  }
  f << '\n';
  char buf[64];
  for (int64_t t = 0; t < ds.steps; ++t) {
    f << ds.epoch_seconds[static_cast<size_t>(t)];
    for (int64_t n = 0; n < ds.nodes; ++n) {
      double v = ds.value(t, n, 0);
      if (std::isnan(v)) {
        f << ",nan";
      } else {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        f << ',' << buf;
      }
    }
    f << '\n';
  }
  if (!f) throw IoError(path + ": write failed");
}

NormStats fit_zscore(const SeriesDataset& ds) {
  ds.validate();
  if (ds.normalized) throw StateError("fit_zscore: dataset is already normalized");
  if (ds.train_end <= 0) throw DataError("fit_zscore: empty training segment");
  NormStats st;
  st.mean.assign(static_cast<size_t>(ds.channels), 0.0);
  st.stddev.assign(static_cast<size_t>(ds.channels), 0.0);
  for (int64_t c = 0; c < ds.channels; ++c) {
    double sum = 0.0, sum_sq = 0.0;
    int64_t count = 0;
    for (int64_t t = 0; t < ds.train_end; ++t) {
      for (int64_t n = 0; n < ds.nodes; ++n) {
        if (ds.is_missing(t, n)) continue;
        double v = ds.value(t, n, c);
        sum += v;
        sum_sq += v * v;
        ++count;
      }
    }
    if (count == 0) {
      throw DataError("fit_zscore: channel " + std::to_string(c) +
                      " has no observed training values");
    }
    double mean = sum / static_cast<double>(count);
    double var = sum_sq / static_cast<double>(count) - mean * mean;
    if (var < 0.0) var = 0.0;
    double sd = std::sqrt(var);
    if (sd == 0.0) {
      throw DataError("fit_zscore: channel " + std::to_string(c) +
                      " has zero variance on the training segment");
    }
    st.mean[static_cast<size_t>(c)] = mean;
    st.stddev[static_cast<size_t>(c)] = sd;
  }
  return st;
}

SeriesDataset apply_zscore(const SeriesDataset& ds, const NormStats& stats) {
  ds.validate();
  if (ds.normalized) throw StateError("apply_zscore: dataset is already normalized");
  if (stats.mean.size() != static_cast<size_t>(ds.channels) ||
      stats.stddev.size() != static_cast<size_t>(ds.channels)) {
    throw ValueError("apply_zscore: stats do not match the channel count");
  }
  SeriesDataset out = ds;
  for (int64_t t = 0; t < out.steps; ++t) {
    for (int64_t n = 0; n < out.nodes; ++n) {
      for (int64_t c = 0; c < out.channels; ++c) {
        size_t i = static_cast<size_t>((t * out.nodes + n) * out.channels + c);
        double v = out.values[i];
        if (std::isnan(v)) continue;
        out.values[i] = (v - stats.mean[static_cast<size_t>(c)]) /
                        stats.stddev[static_cast<size_t>(c)];
      }
    }
  }
  out.normalized = true;
  out.stats = stats;
  return out;
}

double inverse_zscore_value(double v, const NormStats& stats, int64_t channel) {
  return v * stats.stddev[static_cast<size_t>(channel)] + stats.mean[static_cast<size_t>(channel)];
}

Tensor inverse_zscore(const Tensor& y, const NormStats& stats) {
  if (!y.defined() || y.dim() < 1) throw ShapeError("inverse_zscore: undefined input");
  int64_t c = y.size(y.dim() - 1);
  if (stats.mean.size() != static_cast<size_t>(c)) {
    throw ValueError("inverse_zscore: stats do not match the channel count");
  }
  std::vector<double> out(y.data().begin(), y.data().end());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = inverse_zscore_value(out[i], stats, static_cast<int64_t>(i % static_cast<size_t>(c)));
  }
  return Tensor::from_data(y.shape(), std::move(out));
}

WindowSet make_windows(const SeriesDataset& ds, Split split, int64_t lookback, int64_t horizon) {
  ds.validate();
  if (lookback <= 0 || horizon <= 0) {
    throw ValueError("make_windows: lookback/horizon must be positive");
  }
  int64_t begin, end;
  ds.segment(split, begin, end);
  WindowSet ws;
  int64_t len = end - begin;
  if (len < lookback + horizon) {
    ws.warnings.push_back(std::string(split_name(split)) + " segment too short (" +
                          std::to_string(len) + " steps) for lookback " +
                          std::to_string(lookback) + " + horizon " + std::to_string(horizon));
    return ws;
  }
  const int64_t n = ds.nodes, c = ds.channels;
  for (int64_t s = begin; s + lookback + horizon <= end; ++s) {
    WindowSample w;
    w.start = s;
    // Masked entries are zero-filled so tensors stay finite; the loss and
    // the metrics both exclude them through the window masks.
    auto slab = [&](const std::vector<double>& src, int64_t from, int64_t count) {
      std::vector<double> d(src.begin() + from * n * c, src.begin() + (from + count) * n * c);
      for (int64_t t = 0; t < count; ++t) {
        for (int64_t nn = 0; nn < n; ++nn) {
          if (!ds.is_missing(from + t, nn)) continue;
          for (int64_t cc = 0; cc < c; ++cc) d[static_cast<size_t>((t * n + nn) * c + cc)] = 0.0;
        }
      }
      return Tensor::from_data({count, n, c}, std::move(d));
    };
    w.x = slab(ds.values, s, lookback);
    w.y = slab(ds.values, s + lookback, horizon);
    w.y_raw = slab(ds.raw_values, s + lookback, horizon);
    w.cal.tod.assign(ds.tod.begin() + s, ds.tod.begin() + s + lookback);
    w.cal.dow.assign(ds.dow.begin() + s, ds.dow.begin() + s + lookback);
    w.x_missing.assign(ds.missing.begin() + s * n, ds.missing.begin() + (s + lookback) * n);
    w.y_missing.assign(ds.missing.begin() + (s + lookback) * n,
                       ds.missing.begin() + (s + lookback + horizon) * n);
    ws.samples.push_back(std::move(w));
  }
  return ws;
}

}  // namespace ramtsf
