#pragma once

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "falldet/common.hpp"

namespace falldet {

/// Row = true class, column = predicted class.
class ConfusionMatrix {
public:
  explicit ConfusionMatrix(int n_classes = kNumClasses) : k_(n_classes) {
    if (n_classes < 1) throw ValueError("confusion matrix needs at least one class");
    cells_.assign(static_cast<size_t>(k_) * k_, 0);
  }

  static ConfusionMatrix from(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                              int n_classes = kNumClasses) {
    if (y_true.size() != y_pred.size()) {
      throw ValueError(cat("confusion: ", y_true.size(), " true labels vs ", y_pred.size(),
                           " predictions"));
    }
    ConfusionMatrix cm(n_classes);
    for (size_t i = 0; i < y_true.size(); ++i) cm.add(y_true[i], y_pred[i]);
    return cm;
  }

  void add(int t, int p) {
    if (t < 0 || t >= k_ || p < 0 || p >= k_) {
      throw ValueError(cat("confusion: label pair (", t, ",", p, ") out of range [0,", k_, ")"));
    }
    ++cells_[static_cast<size_t>(t) * k_ + p];
  }

  int n_classes() const { return k_; }
  long long count(int t, int p) const { return cells_[static_cast<size_t>(t) * k_ + p]; }

  long long total() const {
    long long n = 0;
    for (auto c : cells_) n += c;
    return n;
  }

  long long support(int t) const {
    long long n = 0;
    for (int p = 0; p < k_; ++p) n += count(t, p);
    return n;
  }

  long long predicted(int p) const {
    long long n = 0;
    for (int t = 0; t < k_; ++t) n += count(t, p);
    return n;
  }

  long long trace() const {
    long long n = 0;
    for (int i = 0; i < k_; ++i) n += count(i, i);
    return n;
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (int t = 0; t < k_; ++t) {
      nlohmann::json row = nlohmann::json::array();
      for (int p = 0; p < k_; ++p) row.push_back(count(t, p));
      rows.push_back(row);
    }
    return rows;
  }

  static ConfusionMatrix from_json(const nlohmann::json& j) {
    ConfusionMatrix cm(static_cast<int>(j.size()));
    for (int t = 0; t < cm.k_; ++t) {
      for (int p = 0; p < cm.k_; ++p) {
        cm.cells_[static_cast<size_t>(t) * cm.k_ + p] = j.at(t).at(p).get<long long>();
      }
    }
    return cm;
  }

private:
  int k_;
  std::vector<long long> cells_;
};

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  long long support = 0;
};

struct EvalReport {
  int n_classes = kNumClasses;
  double accuracy = 0;
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;
  bool zero_support_warning = false;  // some class had no true samples
  std::string config_tag;             // S, C1, C2, C1+C2, S+C1+C2
  std::vector<std::vector<long long>> confusion;

  nlohmann::json to_json() const {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& c : per_class) {
      per.push_back({{"precision", c.precision},
                     {"recall", c.recall},
                     {"f1", c.f1},
                     {"support", c.support}});
    }
    return nlohmann::json{{"configuration", config_tag},
                          {"n_classes", n_classes},
                          {"accuracy", accuracy},
                          {"per_class", per},
                          {"macro", {{"precision", macro_precision}, {"recall", macro_recall}, {"f1", macro_f1}}},
                          {"weighted",
                           {{"precision", weighted_precision},
                            {"recall", weighted_recall},
                            {"f1", weighted_f1}}},
                          {"zero_support_warning", zero_support_warning},
                          {"confusion", confusion}};
  }

  static EvalReport from_json(const nlohmann::json& j) {
    EvalReport r;
    r.config_tag = j.value("configuration", "");
    r.n_classes = j.at("n_classes").get<int>();
    r.accuracy = j.at("accuracy").get<double>();
    for (const auto& c : j.at("per_class")) {
      ClassMetrics m;
      m.precision = c.at("precision").get<double>();
      m.recall = c.at("recall").get<double>();
      m.f1 = c.at("f1").get<double>();
      m.support = c.at("support").get<long long>();
      r.per_class.push_back(m);
    }
    r.macro_precision = j.at("macro").at("precision").get<double>();
    r.macro_recall = j.at("macro").at("recall").get<double>();
    r.macro_f1 = j.at("macro").at("f1").get<double>();
    r.weighted_precision = j.at("weighted").at("precision").get<double>();
    r.weighted_recall = j.at("weighted").at("recall").get<double>();
    r.weighted_f1 = j.at("weighted").at("f1").get<double>();
    r.zero_support_warning = j.value("zero_support_warning", false);
    r.confusion = j.at("confusion").get<std::vector<std::vector<long long>>>();
    return r;
  }
};

/// Per-class precision/recall/F1 with macro and support-weighted averages.
/// Zero denominators yield 0; a zero-support class flips the warning flag and
/// contributes 0 to the macro means.
inline EvalReport report(const ConfusionMatrix& cm, const std::string& config_tag = "") {
  if (cm.total() == 0) throw ValueError("report: empty confusion matrix");
  EvalReport r;
  r.n_classes = cm.n_classes();
  r.config_tag = config_tag;
  long long total = cm.total();
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  double mp = 0, mr = 0, mf = 0, wp = 0, wr = 0, wf = 0;
  for (int c = 0; c < cm.n_classes(); ++c) {
    ClassMetrics m;
    long long tp = cm.count(c, c);
    long long pred = cm.predicted(c);
    long long sup = cm.support(c);
    m.support = sup;
    m.precision = pred > 0 ? static_cast<double>(tp) / pred : 0.0;
    m.recall = sup > 0 ? static_cast<double>(tp) / sup : 0.0;
    m.f1 = (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
    if (sup == 0) r.zero_support_warning = true;
    mp += m.precision;
    mr += m.recall;
    mf += m.f1;
    double w = static_cast<double>(sup) / static_cast<double>(total);
    wp += w * m.precision;
    wr += w * m.recall;
    wf += w * m.f1;
    r.per_class.push_back(m);
  }
  int k = cm.n_classes();
  r.macro_precision = mp / k;
  r.macro_recall = mr / k;
  r.macro_f1 = mf / k;
  r.weighted_precision = wp;
  r.weighted_recall = wr;
  r.weighted_f1 = wf;
  r.confusion.assign(static_cast<size_t>(k), std::vector<long long>(static_cast<size_t>(k), 0));
  for (int t = 0; t < k; ++t) {
    for (int p = 0; p < k; ++p) r.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)] = cm.count(t, p);
  }
  return r;
}

/// One result row rendered like the comparison tables: percentages with two
/// decimals, weighted averages as the headline.
inline std::string render_report_row(const std::string& data_tag, const std::string& model,
                                     const EvalReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(10) << data_tag << std::setw(14) << model << std::right
     << std::fixed << std::setprecision(2) << std::setw(10) << 100 * r.accuracy << std::setw(11)
     << 100 * r.weighted_precision << std::setw(8) << 100 * r.weighted_recall << std::setw(10)
     << 100 * r.weighted_f1;
  return os.str();
}

inline std::string render_report_header() {
  std::ostringstream os;
  os << std::left << std::setw(10) << "Data" << std::setw(14) << "Model" << std::right
     << std::setw(10) << "Accuracy" << std::setw(11) << "Precision" << std::setw(8) << "Recall"
     << std::setw(10) << "F1-Score";
  return os.str();
}

inline std::string render_report_text(const EvalReport& r, const std::string& model) {
  std::ostringstream os;
  os << render_report_header() << "\n"
     << render_report_row(r.config_tag.empty() ? "-" : r.config_tag, model, r) << "\n\n";
  os << "per-class (precision / recall / f1 / support):\n";
  for (size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    os << "  class " << std::setw(2) << c << ": " << std::fixed << std::setprecision(4)
       << m.precision << " / " << m.recall << " / " << m.f1 << " / " << m.support << "\n";
  }
  os << "macro avg: " << std::fixed << std::setprecision(4) << r.macro_precision << " / "
     << r.macro_recall << " / " << r.macro_f1 << "\n";
  if (r.zero_support_warning) os << "warning: at least one class has zero support\n";
  return os.str();
}

}  // namespace falldet
