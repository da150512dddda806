#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace genfeat {

struct AnovaResult {
  std::size_t groups = 0;
  std::size_t total = 0;
  double ss_between = 0;
  double ss_within = 0;
  double df_between = 0;
  double df_within = 0;
  double ms_between = 0;
  double ms_within = 0;
  double f_stat = 0;
  double p_value = 0;
};

// One-way fixed-effects ANOVA. Needs at least two groups and at least one
// within-group degree of freedom.
AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

struct TukeyRow {
  std::size_t a = 0;  // group indices, a < b
  std::size_t b = 0;
  double diff = 0;    // |mean(b) - mean(a)|
  double q = 0;       // diff / sqrt(ms_within / n)
  double p = 0;       // studentized-range survival probability
  bool reject = false;
};

// All pairwise comparisons ordered (0,1), (0,2), ..., (k-2,k-1). Groups must
// be balanced (equal sizes).
std::vector<TukeyRow> tukey_hsd(const std::vector<std::vector<double>>& groups,
                                double alpha = 0.05);

// Special functions backing the tests above. All throw NumericError when the
// inputs leave their domains or iteration fails to converge.
double normal_cdf(double z);
double regularized_incomplete_beta(double a, double b, double x);
double f_distribution_sf(double f, double df1, double df2);

// Distribution of the studentized range statistic for k groups and df
// error degrees of freedom, evaluated with nested Gauss-Legendre panels.
double studentized_range_cdf(double q, std::size_t k, double df);
double studentized_range_sf(double q, std::size_t k, double df);

// Rendering helpers shared by the command-line surface.
std::string anova_table_text(const AnovaResult& r);
std::string tukey_table_text(const std::vector<TukeyRow>& rows,
                             const std::vector<std::string>& names);

}  // namespace genfeat
