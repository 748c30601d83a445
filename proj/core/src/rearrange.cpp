#include "dynrisk/rearrange.hpp"

#include <algorithm>
#include <cmath>

#include "dynrisk/assignment.hpp"
#include "dynrisk/error.hpp"

namespace dynrisk {

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

bool close_paths(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!close(a[i], b[i])) return false;
  return true;
}

// Distinct paths of x in lexicographic order and the id of each outcome's path.
struct DistinctPaths {
  std::vector<std::vector<double>> paths;
  std::vector<std::size_t> id_of;
};

DistinctPaths distinct_paths(const AdaptedProcess& x) {
  const std::size_t m = x.space().outcome_count();
  DistinctPaths d;
  std::vector<std::size_t> raw(m);
  for (std::size_t w = 0; w < m; ++w) {
    auto p = x.path(w);
    std::size_t id = 0;
    while (id < d.paths.size() && !close_paths(d.paths[id], p)) ++id;
    if (id == d.paths.size()) d.paths.push_back(std::move(p));
    raw[w] = id;
  }
  std::vector<std::size_t> order(d.paths.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d.paths[a] < d.paths[b]; });
  std::vector<std::size_t> rank(order.size());
  std::vector<std::vector<double>> sorted;
  for (std::size_t r = 0; r < order.size(); ++r) {
    rank[order[r]] = r;
    sorted.push_back(d.paths[order[r]]);
  }
  d.paths = std::move(sorted);
  d.id_of.resize(m);
  for (std::size_t w = 0; w < m; ++w) d.id_of[w] = rank[raw[w]];
  return d;
}

// probability level of each outcome; throws on mixed levels unless grouping
std::vector<std::size_t> probability_levels(const FiniteFilteredSpace& sp, bool group_by_level, std::size_t& count) {
  std::vector<double> levels;
  std::vector<std::size_t> lv(sp.outcome_count());
  for (std::size_t w = 0; w < sp.outcome_count(); ++w) {
    std::size_t l = 0;
    while (l < levels.size() && !close(levels[l], sp.prob(w))) ++l;
    if (l == levels.size()) levels.push_back(sp.prob(w));
    lv[w] = l;
  }
  if (levels.size() > 1 && !group_by_level) {
    throw InputError("rearrangement: probabilities are not uniform; enable grouping by probability level");
  }
  count = levels.size();
  return lv;
}

class ClassSearch {
 public:
  ClassSearch(const AdaptedProcess& x, const ClassOptions& opts)
      : x_(x), sp_(x.space()), opts_(opts), paths_(distinct_paths(x)) {
    std::size_t n_levels = 0;
    level_ = probability_levels(sp_, opts.group_by_level, n_levels);
    remaining_.assign(n_levels, std::vector<std::size_t>(paths_.paths.size(), 0));
    for (std::size_t w = 0; w < level_.size(); ++w) ++remaining_[level_[w]][paths_.id_of[w]];
    for (int s = x.t_start(); s <= x.t_end(); ++s) {
      owners_.emplace_back(sp_.atom_count(s), 0);
      fixed_.emplace_back(sp_.atom_count(s), 0.0);
    }
    assign_.assign(sp_.outcome_count(), 0);
  }

  RearrangementClass run() {
    RearrangementClass cls{x_, {}, 0, opts_.group_by_level};
    recurse(0, cls);
    return cls;
  }

 private:
  void recurse(std::size_t w, RearrangementClass& cls) {
    if (++nodes_ > opts_.node_cap) throw CapExceeded("rearrangement: search node cap exceeded");
    if (w == assign_.size()) {
      emit(cls);
      return;
    }
    const int t0 = x_.t_start();
    auto& rem = remaining_[level_[w]];
    for (std::size_t id = 0; id < rem.size(); ++id) {
      if (rem[id] == 0) continue;
      const auto& p = paths_.paths[id];
      bool ok = true;
      for (std::size_t k = 0; k < p.size() && ok; ++k) {
        const std::size_t atom = sp_.atom_of(t0 + static_cast<int>(k), w);
        ok = owners_[k][atom] == 0 || close(fixed_[k][atom], p[k]);
      }
      if (!ok) continue;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const std::size_t atom = sp_.atom_of(t0 + static_cast<int>(k), w);
        if (owners_[k][atom]++ == 0) fixed_[k][atom] = p[k];
      }
      --rem[id];
      assign_[w] = id;
      recurse(w + 1, cls);
      ++rem[id];
      for (std::size_t k = 0; k < p.size(); ++k) --owners_[k][sp_.atom_of(t0 + static_cast<int>(k), w)];
    }
  }

  void emit(RearrangementClass& cls) {
    if (cls.members.size() >= opts_.cap) {
      throw CapExceeded("rearrangement: class larger than " + std::to_string(opts_.cap));
    }
    std::vector<std::vector<double>> rows(x_.length(), std::vector<double>(assign_.size()));
    for (std::size_t w = 0; w < assign_.size(); ++w)
      for (std::size_t k = 0; k < rows.size(); ++k) rows[k][w] = paths_.paths[assign_[w]][k];
    if (assign_ == paths_.id_of) cls.representative_index = cls.members.size();
    cls.members.emplace_back(x_.space_ptr(), x_.t_start(), std::move(rows));
  }

  const AdaptedProcess& x_;
  const FiniteFilteredSpace& sp_;
  ClassOptions opts_;
  DistinctPaths paths_;
  std::vector<std::size_t> level_;
  std::vector<std::vector<std::size_t>> remaining_;
  std::vector<std::vector<std::size_t>> owners_;
  std::vector<std::vector<double>> fixed_;
  std::vector<std::size_t> assign_;
  std::size_t nodes_ = 0;
};

}  // namespace

bool PathLaw::approx_equal(const PathLaw& other, double tol) const {
  if (paths.size() != other.paths.size()) return false;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (paths[i].size() != other.paths[i].size()) return false;
    for (std::size_t k = 0; k < paths[i].size(); ++k)
      if (std::abs(paths[i][k] - other.paths[i][k]) > tol) return false;
    if (std::abs(masses[i] - other.masses[i]) > tol) return false;
  }
  return true;
}

PathLaw path_law(const AdaptedProcess& x) {
  const auto d = distinct_paths(x);
  PathLaw law{d.paths, std::vector<double>(d.paths.size(), 0.0)};
  for (std::size_t w = 0; w < d.id_of.size(); ++w) law.masses[d.id_of[w]] += x.space().prob(w);
  return law;
}

RearrangementClass enumerate_class(const AdaptedProcess& x, const ClassOptions& opts) {
  return ClassSearch(x, opts).run();
}

MaxCorrelation max_correlation(const DensityProcess& a, const RearrangementClass& cls, int t) {
  if (cls.representative.t_start() != t) throw InputError("max_correlation: class window must start at t");
  const int te = cls.representative.t_end();
  const std::size_t na = a.space().atom_count(t);
  std::vector<double> best(na, kNegInf);
  std::vector<std::size_t> arg(na, 0);
  for (std::size_t i = 0; i < cls.members.size(); ++i) {
    const auto p = pairing(cls.members[i], a, t, te);
    for (std::size_t k = 0; k < na; ++k) {
      if (p[k] > best[k]) {
        best[k] = p[k];
        arg[k] = i;
      }
    }
  }
  return {ConditionalValue(t, std::move(best)), std::move(arg)};
}

MaxCorrelation max_correlation(const DensityProcess& a, const AdaptedProcess& x, int t, const ClassOptions& opts) {
  return max_correlation(a, enumerate_class(x.restrict(t, x.t_end()), opts), t);
}

ConditionalValue lap_upper_bound(const DensityProcess& a, const AdaptedProcess& x, int t, const ClassOptions& opts) {
  const auto xr = x.restrict(t, x.t_end());
  const auto& sp = xr.space();
  if (!(a.space() == sp)) throw InputError("lap_upper_bound: different spaces");
  const int te = xr.t_end();
  if (a.t_start() > t || a.t_end() < te) throw InputError("lap_upper_bound: density window does not cover [t, T]");
  std::size_t n_levels = 0;
  const auto level = probability_levels(sp, opts.group_by_level, n_levels);
  const std::size_t m = sp.outcome_count();

  std::vector<double> out;
  for (std::size_t k = 0; k < sp.atom_count(t); ++k) {
    const auto& rows = sp.atoms(t)[k];
    const double pk = sp.atom_prob(t, k);
    std::vector<std::vector<double>> weight(rows.size(), std::vector<double>(m, 0.0));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t w = rows[r];
      for (std::size_t j = 0; j < m; ++j) {
        if (level[w] != level[j]) {
          weight[r][j] = kNegInf;
          continue;
        }
        double v = 0.0;
        for (int s = t; s <= te; ++s) v += xr(s, j) * a.delta(s, w);
        weight[r][j] = sp.prob(w) / pk * v;
      }
    }
    out.push_back(solve_assignment_max(weight).value);
  }
  return ConditionalValue(t, std::move(out));
}

ComonotoneCertificate is_comonotone(const DensityProcess& a0, const std::vector<AdaptedProcess>& family, double tol,
                                    const ClassOptions& opts) {
  if (family.empty()) throw InputError("is_comonotone: empty family");
  const int t = family.front().t_start();
  ComonotoneCertificate cert;
  auto sum = family.front();
  for (std::size_t i = 0; i < family.size(); ++i) {
    if (i > 0) sum += family[i];
    const auto psi = max_correlation(a0, family[i], t, opts).value;
    const auto p = pairing(family[i], a0, t, family[i].t_end());
    std::vector<double> res(psi.size());
    for (std::size_t k = 0; k < res.size(); ++k) {
      res[k] = psi[k] - p[k];
      if (std::abs(res[k]) > tol * std::max(1.0, std::abs(p[k]))) cert.members_attain = false;
    }
    cert.member_residuals.push_back(std::move(res));
  }
  const auto psi = max_correlation(a0, sum, t, opts).value;
  const auto p = pairing(sum, a0, t, sum.t_end());
  for (std::size_t k = 0; k < psi.size(); ++k) {
    cert.sum_residuals.push_back(psi[k] - p[k]);
    if (std::abs(psi[k] - p[k]) > tol * std::max(1.0, std::abs(p[k]))) cert.sum_attains = false;
  }
  cert.comonotone = cert.members_attain && cert.sum_attains;
  return cert;
}

}  // namespace dynrisk
