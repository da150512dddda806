#include "genfeat/stats.hpp"

#include <cmath>
#include <sstream>

#include "genfeat/errors.hpp"

namespace genfeat {

namespace {

// Nodes/weights for n-point Gauss-Legendre on [-1, 1], by Newton iteration
// on the Legendre recurrence.
struct GaussLegendre {
  std::vector<double> x, w;
  explicit GaussLegendre(std::size_t n) : x(n), w(n) {
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
      double z = std::cos(3.14159265358979323846 * (static_cast<double>(i) + 0.75) /
                          (static_cast<double>(n) + 0.5));
      double pp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        pp = n * (z * p0 - p1) / (z * z - 1.0);
        double dz = p0 / pp;
        z -= dz;
        if (std::abs(dz) < 1e-15) break;
      }
      x[i] = -z;
      x[n - 1 - i] = z;
      w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
      w[n - 1 - i] = w[i];
    }
  }
};

const GaussLegendre& panel128() {
  static const GaussLegendre gl(128);
  return gl;
}

template <typename F>
double integrate(const GaussLegendre& gl, double lo, double hi, F f) {
  double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  double acc = 0.0;
  for (std::size_t i = 0; i < gl.x.size(); ++i) acc += gl.w[i] * f(mid + half * gl.x[i]);
  return acc * half;
}

double betacf(double a, double b, double x) {
  const int max_iter = 400;
  const double eps = 3e-14, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

// Probability that the range of k standard normals is at most r.
double normal_range_cdf(double r, std::size_t k) {
  if (r <= 0.0) return 0.0;
  const GaussLegendre& gl = panel128();
  double v = integrate(gl, -8.5, 8.5, [r, k](double z) {
    double phi = std::exp(-0.5 * z * z) * 0.3989422804014327;
    double span = normal_cdf(z + r) - normal_cdf(z);
    return phi * std::pow(span, static_cast<double>(k - 1));
  });
  return std::min(1.0, static_cast<double>(k) * v);
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865476); }

double regularized_incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw NumericError("incomplete beta: parameters must be positive");
  if (x < 0.0 || x > 1.0) throw NumericError("incomplete beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                       b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double f_distribution_sf(double f, double df1, double df2) {
  if (df1 <= 0.0 || df2 <= 0.0) throw NumericError("F distribution: degrees of freedom must be positive");
  if (f <= 0.0) return 1.0;
  return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f));
}

double studentized_range_cdf(double q, std::size_t k, double df) {
  if (k < 2) throw NumericError("studentized range: needs at least two groups");
  if (df < 1.0) throw NumericError("studentized range: needs at least one degree of freedom");
  if (q <= 0.0) return 0.0;

  // Outer integral over s ~ sqrt(chi^2_df / df); the density concentrates
  // around 1 with spread ~ 1/sqrt(2 df).
  double spread = 10.0 / std::sqrt(2.0 * df);
  double lo = std::max(0.0, 1.0 - spread);
  double hi = 1.0 + spread;
  double log_c = 0.5 * df * std::log(df) - std::lgamma(0.5 * df) -
                 (0.5 * df - 1.0) * std::log(2.0);
  const GaussLegendre& gl = panel128();
  double v = integrate(gl, lo, hi, [&](double s) {
    if (s <= 0.0) return 0.0;
    double log_density = log_c + (df - 1.0) * std::log(s) - 0.5 * df * s * s;
    return std::exp(log_density) * normal_range_cdf(q * s, k);
  });
  if (v < 0.0) v = 0.0;
  return std::min(1.0, v);
}

double studentized_range_sf(double q, std::size_t k, double df) {
  return 1.0 - studentized_range_cdf(q, k, df);
}

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw DataError("anova: needs at least two groups");
  AnovaResult r;
  r.groups = groups.size();
  double grand_sum = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw DataError("anova: every group needs at least two values");
    r.total += g.size();
    for (double v : g) grand_sum += v;
  }
  double grand_mean = grand_sum / static_cast<double>(r.total);

  for (const auto& g : groups) {
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());
    r.ss_between += static_cast<double>(g.size()) * (mean - grand_mean) * (mean - grand_mean);
    for (double v : g) r.ss_within += (v - mean) * (v - mean);
  }
  r.df_between = static_cast<double>(r.groups - 1);
  r.df_within = static_cast<double>(r.total - r.groups);
  r.ms_between = r.ss_between / r.df_between;
  r.ms_within = r.ss_within / r.df_within;
  if (r.ms_within <= 0.0) throw NumericError("anova: zero within-group variance");
  r.f_stat = r.ms_between / r.ms_within;
  r.p_value = f_distribution_sf(r.f_stat, r.df_between, r.df_within);
  return r;
}

std::vector<TukeyRow> tukey_hsd(const std::vector<std::vector<double>>& groups, double alpha) {
  if (alpha <= 0.0 || alpha >= 1.0) throw NumericError("tukey: alpha outside (0,1)");
  std::size_t n = groups.empty() ? 0 : groups[0].size();
  for (const auto& g : groups) {
    if (g.size() != n) throw DataError("tukey: groups must be balanced");
  }
  AnovaResult r = one_way_anova(groups);
  std::vector<double> means(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    double m = 0.0;
    for (double v : groups[i]) m += v;
    means[i] = m / static_cast<double>(n);
  }
  double se = std::sqrt(r.ms_within / static_cast<double>(n));
  std::vector<TukeyRow> rows;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      TukeyRow row;
      row.a = i;
      row.b = j;
      row.diff = std::abs(means[j] - means[i]);
      row.q = row.diff / se;
      row.p = studentized_range_sf(row.q, groups.size(), r.df_within);
      row.reject = row.p < alpha;
      rows.push_back(row);
    }
  }
  return rows;
}

namespace {

std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(prec);
  ss << v;
  return ss.str();
}

}  // namespace

std::string anova_table_text(const AnovaResult& r) {
  std::ostringstream ss;
  ss << "source       df        SS        MS         F    p-value\n";
  ss << "between  " << fmt(r.df_between, 0) << "  " << fmt(r.ss_between) << "  "
     << fmt(r.ms_between) << "  " << fmt(r.f_stat) << "  " << fmt(r.p_value, 6) << "\n";
  ss << "within   " << fmt(r.df_within, 0) << "  " << fmt(r.ss_within) << "  "
     << fmt(r.ms_within) << "\n";
  return ss.str();
}

std::string tukey_table_text(const std::vector<TukeyRow>& rows,
                             const std::vector<std::string>& names) {
  std::ostringstream ss;
  ss << "group a      group b      diff        q         p\n";
  for (const TukeyRow& row : rows) {
    std::string na = row.a < names.size() ? names[row.a] : std::to_string(row.a);
    std::string nb = row.b < names.size() ? names[row.b] : std::to_string(row.b);
    na.resize(12, ' ');
    nb.resize(12, ' ');
    ss << na << " " << nb << " " << fmt(row.diff) << "  " << fmt(row.q) << "  " << fmt(row.p, 6)
       << "\n";
  }
  return ss.str();
}

}  // namespace genfeat
