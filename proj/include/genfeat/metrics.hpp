#pragma once

#include <cstddef>
#include <vector>

namespace genfeat {

// confusion[i][j] counts documents of true class i predicted as class j.
using Confusion = std::vector<std::vector<std::size_t>>;

Confusion confusion_matrix(const std::vector<int>& truth, const std::vector<int>& pred,
                           std::size_t classes);

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct PrfReport {
  std::vector<Prf> per_class;
  Prf macro;
  double accuracy = 0;
};

// Macro-averaged precision/recall/F1. Any zero denominator contributes 0 for
// that class, so empty rows or columns stay defined.
PrfReport macro_prf(const Confusion& confusion);

}  // namespace genfeat
