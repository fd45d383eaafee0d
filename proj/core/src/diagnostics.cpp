// SPDX-License-Identifier: Apache-2.0
#include "prunelab/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "prunelab/errors.hpp"

namespace prunelab::diagnostics {

namespace {

constexpr const char* kLogHeader = "model_id,method,pruning,sparsity,sample_id,predicted_class,true_label";

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view cell, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError("bad numeric cell '" + std::string(cell) + "' in prediction log", line);
  }
  return value;
}

}  // namespace

void write_prediction_log(const PredictionLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write prediction log '" + path.string() + "'");
  }
  out << kLogHeader << '\n';
  for (const auto& r : log) {
    out << r.model_id << ',' << to_string(r.method) << ',' << to_string(r.pruning) << ','
        << format_double(r.sparsity) << ',' << r.sample_id << ',' << r.predicted_class << ',' << r.true_label
        << '\n';
  }
}

PredictionLog read_prediction_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open prediction log '" + path.string() + "'", 0);
  }
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || (++lineno, line != kLogHeader)) {
    throw ParseError("prediction log '" + path.string() + "' lacks the expected header", 1);
  }
  PredictionLog log;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) {
        break;
      }
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() != 7) {
      throw ParseError("prediction log row needs 7 columns", lineno);
    }
    try {
      log.push_back(PredictionRecord{parse_number<std::uint32_t>(cells[0], lineno), parse_method(cells[1]),
                                     parse_pruning(cells[2]), parse_number<double>(cells[3], lineno),
                                     parse_number<std::uint64_t>(cells[4], lineno),
                                     parse_number<std::uint32_t>(cells[5], lineno),
                                     parse_number<std::uint32_t>(cells[6], lineno)});
    } catch (const ParameterError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return log;
}

std::uint32_t modal_class(std::span<const std::uint32_t> predictions) {
  if (predictions.empty()) {
    throw ParameterError("modal_class needs at least one prediction");
  }
  std::map<std::uint32_t, std::size_t> counts;
  for (auto p : predictions) {
    ++counts[p];
  }
  // std::map iterates in ascending class order, so '>' keeps the lowest on ties.
  std::uint32_t best = counts.begin()->first;
  std::size_t best_count = 0;
  for (const auto& [cls, n] : counts) {
    if (n > best_count) {
      best = cls;
      best_count = n;
    }
  }
  return best;
}

namespace {

struct Cohort {
  std::map<std::uint64_t, std::vector<std::uint32_t>> predictions;
  std::map<std::uint64_t, std::uint32_t> labels;
};

Cohort group_cohort(const PredictionLog& log, const char* which) {
  Cohort c;
  std::set<std::pair<std::uint32_t, std::uint64_t>> seen;
  std::map<std::uint32_t, std::set<std::uint64_t>> per_model;
  for (const auto& r : log) {
    if (!seen.emplace(r.model_id, r.sample_id).second) {
      throw CohortError(std::string(which) + " cohort repeats model " + std::to_string(r.model_id) + " on a sample",
                        {r.sample_id});
    }
    c.predictions[r.sample_id].push_back(r.predicted_class);
    c.labels.emplace(r.sample_id, r.true_label);
    per_model[r.model_id].insert(r.sample_id);
  }
  for (const auto& [model, samples] : per_model) {
    if (samples.size() != c.predictions.size()) {
      std::vector<std::uint64_t> missing;
      for (const auto& [id, _] : c.predictions) {
        if (!samples.contains(id)) {
          missing.push_back(id);
        }
      }
      throw CohortError(std::string(which) + " cohort model " + std::to_string(model) +
                            " does not cover every sample",
                        missing);
    }
  }
  return c;
}

template <typename MapA, typename MapB>
std::vector<std::uint64_t> key_mismatch(const MapA& a, const MapB& b) {
  std::vector<std::uint64_t> out;
  for (const auto& [id, _] : a) {
    if (!b.contains(id)) {
      out.push_back(id);
    }
  }
  for (const auto& [id, _] : b) {
    if (!a.contains(id)) {
      out.push_back(id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<PieRecord> identify_pies(const PredictionLog& dense, const PredictionLog& pruned) {
  const Cohort d = group_cohort(dense, "dense");
  const Cohort p = group_cohort(pruned, "pruned");
  if (auto bad = key_mismatch(d.predictions, p.predictions); !bad.empty()) {
    throw CohortError("dense and pruned cohorts cover different samples", bad);
  }
  std::vector<PieRecord> out;
  out.reserve(d.predictions.size());
  for (const auto& [id, preds] : d.predictions) {
    PieRecord r;
    r.sample_id = id;
    r.modal_dense = modal_class(preds);
    r.modal_pruned = modal_class(p.predictions.at(id));
    r.is_pie = r.modal_dense != r.modal_pruned;
    r.true_label = d.labels.at(id);
    out.push_back(r);
  }
  return out;
}

namespace {

template <typename T>
QScoreRecord qscore_impl(std::span<const T> h, std::uint64_t sample_id) {
  if (h.empty()) {
    throw DegenerateInputError("qscore of an empty representation");
  }
  double sq = 0.0;
  for (T v : h) {
    sq += static_cast<double>(v) * v;
  }
  if (!(sq > 0.0)) {
    throw DegenerateInputError("qscore of a zero representation");
  }
  const double norm = std::sqrt(sq);
  const auto n = static_cast<double>(h.size());
  std::vector<double> u(h.size());
  double sum = 0.0;
  double l1 = 0.0;
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < h.size(); ++i) {
    u[i] = h[i] / norm;
    sum += u[i];
    l1 += std::abs(u[i]);
    mx = std::max(mx, u[i]);
  }
  const double mu = sum / n;
  double var = 0.0;
  for (double v : u) {
    var += (v - mu) * (v - mu);
  }
  const double sigma = std::sqrt(var / n);
  if (!(sigma > 0.0)) {
    throw DegenerateInputError("qscore of a constant representation");
  }
  QScoreRecord r;
  r.sample_id = sample_id;
  r.z = (mx - mu) / sigma;
  r.l1 = l1;
  r.q = r.z / r.l1;
  return r;
}

}  // namespace

QScoreRecord qscore(std::span<const float> h, std::uint64_t sample_id) { return qscore_impl(h, sample_id); }

QScoreRecord qscore(std::span<const double> h, std::uint64_t sample_id) { return qscore_impl(h, sample_id); }

std::uint32_t knn_classify(const Tensor& train, std::span<const std::uint32_t> train_labels,
                           std::span<const float> query, std::size_t k) {
  const std::size_t n = train_labels.size();
  if (k < 1 || n == 0) {
    throw ParameterError("kNN needs k >= 1 and a nonempty training set");
  }
  if (train.rank() != 2 || train.dim(0) != n || train.dim(1) != query.size()) {
    throw ShapeError("kNN train representations do not match the query");
  }
  const std::size_t kk = std::min(k, n);
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto row = train.row(j);
    double acc = 0.0;
    for (std::size_t d = 0; d < query.size(); ++d) {
      const double diff = static_cast<double>(row[d]) - query[d];
      acc += diff * diff;
    }
    dist[j] = {acc, j};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  std::vector<std::uint32_t> votes;
  votes.reserve(kk);
  for (std::size_t j = 0; j < kk; ++j) {
    votes.push_back(train_labels[dist[j].second]);
  }
  return modal_class(votes);
}

std::vector<PdRecord> pd_score(const ProbeSet& train, const ProbeSet& query, std::size_t k) {
  if (k < 1 || train.size() == 0) {
    throw ParameterError("pd_score needs k >= 1 and a nonempty training set");
  }
  if (k > train.size()) {
    throw ParameterError("pd_score: k exceeds the training set size");
  }
  const std::size_t probes = train.probes.size();
  if (probes == 0 || query.probes.size() != probes) {
    throw ShapeError("pd_score: train and query must use the same probe layers");
  }
  for (std::size_t d = 0; d < probes; ++d) {
    if (train.probes[d].rank() != 2 || train.probes[d].dim(0) != train.size() || query.probes[d].rank() != 2 ||
        query.probes[d].dim(0) != query.size() || train.probes[d].dim(1) != query.probes[d].dim(1)) {
      throw ShapeError("pd_score: probe " + std::to_string(d) + " shapes disagree");
    }
  }
  std::vector<PdRecord> out;
  out.reserve(query.size());
  for (std::size_t q = 0; q < query.size(); ++q) {
    auto depth = static_cast<std::uint32_t>(probes + 1);
    for (std::size_t d = probes; d-- > 0;) {
      const auto pred = knn_classify(train.probes[d], train.labels, query.probes[d].row(q), k);
      if (pred != query.labels[q]) {
        break;
      }
      depth = static_cast<std::uint32_t>(d + 1);
    }
    out.push_back(PdRecord{query.sample_ids.empty() ? q : query.sample_ids[q], depth});
  }
  return out;
}

std::vector<std::size_t> per_class_pie_distribution(std::span<const PieRecord> records, std::uint32_t class_count) {
  std::vector<std::size_t> counts(class_count, 0);
  for (const auto& r : records) {
    if (!r.is_pie) {
      continue;
    }
    if (r.true_label >= class_count) {
      throw ParameterError("PIE record label exceeds the class count");
    }
    ++counts[r.true_label];
  }
  return counts;
}

PieOverlap pie_overlap(std::span<const PieRecord> a, std::span<const PieRecord> b, std::uint32_t class_count) {
  std::map<std::uint64_t, const PieRecord*> ma;
  std::map<std::uint64_t, const PieRecord*> mb;
  for (const auto& r : a) {
    ma[r.sample_id] = &r;
  }
  for (const auto& r : b) {
    mb[r.sample_id] = &r;
  }
  if (auto bad = key_mismatch(ma, mb); !bad.empty()) {
    throw CohortError("PIE overlap needs both record sets over the same samples", bad);
  }
  PieOverlap out;
  out.shared_per_class.assign(class_count, 0);
  out.unique_a_per_class.assign(class_count, 0);
  out.unique_b_per_class.assign(class_count, 0);
  for (const auto& [id, ra] : ma) {
    const PieRecord* rb = mb.at(id);
    if (ra->true_label >= class_count) {
      throw ParameterError("PIE record label exceeds the class count");
    }
    if (ra->is_pie && rb->is_pie) {
      out.shared.push_back(id);
      ++out.shared_per_class[ra->true_label];
    } else if (ra->is_pie) {
      out.unique_a.push_back(id);
      ++out.unique_a_per_class[ra->true_label];
    } else if (rb->is_pie) {
      out.unique_b.push_back(id);
      ++out.unique_b_per_class[ra->true_label];
    }
  }
  return out;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.count = values.size();
  if (values.empty()) {
    return out;
  }
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) {
      ss += (v - out.mean) * (v - out.mean);
    }
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

AccuracyStats accuracy_stats(const PredictionLog& log) {
  std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> hits;
  for (const auto& r : log) {
    auto& [correct, total] = hits[r.model_id];
    correct += r.predicted_class == r.true_label;
    ++total;
  }
  AccuracyStats out;
  for (const auto& [model, ct] : hits) {
    out.per_model.push_back(static_cast<double>(ct.first) / static_cast<double>(ct.second));
  }
  const MeanStd ms = mean_std(out.per_model);
  out.mean = ms.mean;
  out.std = ms.std;
  out.model_count = ms.count;
  out.std_defined = ms.count >= 2;
  return out;
}

}  // namespace prunelab::diagnostics
