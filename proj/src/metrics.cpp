#include "genfeat/metrics.hpp"

#include <string>

#include "genfeat/errors.hpp"

namespace genfeat {

Confusion confusion_matrix(const std::vector<int>& truth, const std::vector<int>& pred,
                           std::size_t classes) {
  if (truth.size() != pred.size()) {
    throw DataError("confusion_matrix: " + std::to_string(truth.size()) + " labels vs " +
                    std::to_string(pred.size()) + " predictions");
  }
  if (classes == 0) throw DataError("confusion_matrix: zero classes");
  Confusion c(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    int t = truth[i], p = pred[i];
    if (t < 0 || static_cast<std::size_t>(t) >= classes || p < 0 ||
        static_cast<std::size_t>(p) >= classes) {
      throw DataError("confusion_matrix: label out of range at row " + std::to_string(i));
    }
    c[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] += 1;
  }
  return c;
}

PrfReport macro_prf(const Confusion& confusion) {
  std::size_t k = confusion.size();
  if (k == 0) throw DataError("macro_prf: empty confusion matrix");
  for (const auto& row : confusion) {
    if (row.size() != k) throw DataError("macro_prf: confusion matrix is not square");
  }
  PrfReport report;
  report.per_class.resize(k);
  std::size_t correct = 0, total = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = confusion[c][c];
    std::size_t row_sum = 0, col_sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row_sum += confusion[c][j];
      col_sum += confusion[j][c];
    }
    correct += tp;
    total += row_sum;
    Prf& prf = report.per_class[c];
    prf.precision = col_sum > 0 ? static_cast<double>(tp) / static_cast<double>(col_sum) : 0.0;
    prf.recall = row_sum > 0 ? static_cast<double>(tp) / static_cast<double>(row_sum) : 0.0;
    double denom = prf.precision + prf.recall;
    prf.f1 = denom > 0 ? 2.0 * prf.precision * prf.recall / denom : 0.0;
    report.macro.precision += prf.precision;
    report.macro.recall += prf.recall;
    report.macro.f1 += prf.f1;
  }
  report.macro.precision /= static_cast<double>(k);
  report.macro.recall /= static_cast<double>(k);
  report.macro.f1 /= static_cast<double>(k);
  report.accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return report;
}

}  // namespace genfeat
