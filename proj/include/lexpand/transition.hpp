#pragma once

#include "lexpand/partition.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

namespace lexpand {

/// Sparse 0-1 matrix over the retained indices, stored by rows.
struct TransitionMatrix {
  std::vector<std::vector<std::size_t>> rows;  // sorted column indices

  TransitionMatrix() = default;
  explicit TransitionMatrix(std::vector<std::vector<std::size_t>> r) : rows(std::move(r)) {
    for (auto& row : rows) {
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
    }
  }

  static TransitionMatrix from_dense(const std::vector<std::vector<int>>& dense) {
    std::vector<std::vector<std::size_t>> r(dense.size());
    for (std::size_t i = 0; i < dense.size(); ++i)
      for (std::size_t j = 0; j < dense[i].size(); ++j)
        if (dense[i][j]) r[i].push_back(j);
    return TransitionMatrix(std::move(r));
  }

  std::size_t size() const { return rows.size(); }
  bool operator()(std::size_t i, std::size_t j) const { return std::binary_search(rows[i].begin(), rows[i].end(), j); }
  std::size_t nonzeros() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.size();
    return n;
  }

  std::vector<std::vector<std::size_t>> columns() const {
    std::vector<std::vector<std::size_t>> cols(size());
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j : rows[i]) cols[j].push_back(i);
    return cols;
  }

  std::size_t distinct_rows() const {
    std::set<std::vector<std::size_t>> s(rows.begin(), rows.end());
    return s.size();
  }

  bool no_empty_rows_or_columns() const {
    std::vector<char> hit(size(), 0);
    for (const auto& r : rows) {
      if (r.empty()) return false;
      for (std::size_t j : r) hit[j] = 1;
    }
    return std::all_of(hit.begin(), hit.end(), [](char c) { return c != 0; });
  }
};

/// t_ij = 1 iff M_j lies in the closure of the image ball B_{j_i}; by the
/// component structure this is exactly int(M_i) meeting h_i^{-1}(int M_j).
inline TransitionMatrix transition_matrix(const CountableMarkovPartition& part) {
  std::vector<std::vector<std::size_t>> members(part.base.size());
  for (std::size_t e = 0; e < part.size(); ++e)
    for (std::size_t j : part.components[part[e].component].balls) members[j].push_back(e);
  std::vector<std::vector<std::size_t>> rows(part.size());
  for (std::size_t i = 0; i < part.size(); ++i) rows[i] = members[part[i].image];
  return TransitionMatrix(std::move(rows));
}

struct FipReport {
  bool ok = true;
  std::vector<std::size_t> images;  // distinct image balls used
  std::vector<std::size_t> offending;
};

/// Images of all elements are balls of the base cover (and each element's
/// image arc really is that ball: checked on lengths and endpoints).
inline FipReport check_fip(const CountableMarkovPartition& part, const GeneratorSystem* system = nullptr) {
  FipReport rep;
  std::set<std::size_t> imgs;
  for (std::size_t i = 0; i < part.size(); ++i) {
    const auto& e = part[i];
    bool good = e.image < part.base.size();
    if (good && system) {
      auto p = push_offset(*system, e.word, e.left, e.right - e.left);
      double target = part.base.left(e.image);
      good = std::fabs(p.delta - 2.0 * part.base.eps()) <= 1e-9 && circle_distance(p.base, target) <= 1e-9;
    }
    if (good) imgs.insert(e.image);
    else {
      rep.ok = false;
      rep.offending.push_back(i);
    }
  }
  rep.images.assign(imgs.begin(), imgs.end());
  return rep;
}

struct FcpReport {
  bool ok = true;
  std::optional<std::size_t> witness;  // retained index with no cycle in/out edge
};

/// For every retained l there are cycle indices b, b' with t_{b l} = t_{l b'} = 1.
inline FcpReport check_fcp(const TransitionMatrix& t, const std::vector<std::size_t>& cycle) {
  FcpReport rep;
  std::vector<char> in(t.size(), 0), out(t.size(), 0);
  std::vector<char> is_cycle(t.size(), 0);
  for (std::size_t b : cycle)
    if (b < t.size()) is_cycle[b] = 1;
  for (std::size_t b : cycle) {
    if (b >= t.size()) continue;
    for (std::size_t l : t.rows[b]) in[l] = 1;
  }
  for (std::size_t l = 0; l < t.size(); ++l)
    for (std::size_t j : t.rows[l])
      if (is_cycle[j]) {
        out[l] = 1;
        break;
      }
  for (std::size_t l = 0; l < t.size(); ++l)
    if (!in[l] || !out[l]) {
      rep.ok = false;
      rep.witness = l;
      return rep;
    }
  return rep;
}

/// Big images and preimages for the candidate set: same test as FCP.
inline bool check_bip(const TransitionMatrix& t, const std::vector<std::size_t>& bset) {
  return check_fcp(t, bset).ok;
}

struct ShiftMixingReport {
  bool mixing = false;
  bool inconclusive = false;
  std::size_t power = 0;  // n with t^n and t^{n+1} all positive
};

/// Primitive test on the truncated matrix: is there n <= horizon with every
/// entry of t^n and t^{n+1} positive? Rows of t^n are reachability sets,
/// propagated with bitsets over the distinct rows of t.
inline ShiftMixingReport check_shift_mixing(const TransitionMatrix& t, std::size_t horizon) {
  ShiftMixingReport rep;
  const std::size_t n = t.size();
  if (n == 0) {
    rep.inconclusive = true;
    return rep;
  }
  const std::size_t words = (n + 63) / 64;
  using Bits = std::vector<std::uint64_t>;
  auto full = [&](const Bits& b) {
    for (std::size_t i = 0; i < n; ++i)
      if (!((b[i / 64] >> (i % 64)) & 1u)) return false;
    return true;
  };
  // distinct rows of t and the class of each index
  std::map<std::vector<std::size_t>, std::size_t> classes;
  std::vector<std::size_t> cls(n);
  std::vector<const std::vector<std::size_t>*> reps;
  for (std::size_t i = 0; i < n; ++i) {
    auto it = classes.find(t.rows[i]);
    if (it == classes.end()) {
      it = classes.emplace(t.rows[i], reps.size()).first;
      reps.push_back(&t.rows[i]);
    }
    cls[i] = it->second;
  }
  // reach[c] = set reachable in exactly k steps from any index of class c
  std::vector<Bits> reach(reps.size(), Bits(words, 0));
  for (std::size_t c = 0; c < reps.size(); ++c)
    for (std::size_t j : *reps[c]) reach[c][j / 64] |= std::uint64_t(1) << (j % 64);
  bool prev_full = false;
  for (std::size_t k = 1; k <= horizon + 1; ++k) {
    bool all_full = true;
    for (const auto& b : reach)
      if (!full(b)) {
        all_full = false;
        break;
      }
    if (all_full && prev_full) {
      rep.mixing = true;
      rep.power = k - 1;
      return rep;
    }
    prev_full = all_full;
    if (k == horizon + 1) break;
    // one more step: union over j in reach of the class rows of j
    std::vector<Bits> next(reps.size(), Bits(words, 0));
    std::vector<Bits> class_bits(reps.size(), Bits(words, 0));
    for (std::size_t c = 0; c < reps.size(); ++c)
      for (std::size_t j : *reps[c]) class_bits[c][j / 64] |= std::uint64_t(1) << (j % 64);
    for (std::size_t c = 0; c < reps.size(); ++c) {
      std::vector<char> seen(reps.size(), 0);
      for (std::size_t i = 0; i < n; ++i)
        if ((reach[c][i / 64] >> (i % 64)) & 1u) seen[cls[i]] = 1;
      for (std::size_t d = 0; d < reps.size(); ++d)
        if (seen[d])
          for (std::size_t w = 0; w < words; ++w) next[c][w] |= class_bits[d][w];
    }
    reach = std::move(next);
  }
  rep.inconclusive = true;
  return rep;
}

struct MarkovReport {
  bool ok = true;
  std::size_t checked_pairs = 0;
  std::optional<std::pair<std::size_t, std::size_t>> witness;
};

/// For every pair with t_ij = 1, M_j lies in the closed image ball of M_i;
/// pairs with t_ij = 0 have disjoint interiors. Exact for exact partitions,
/// else with tolerance 1e-10.
inline MarkovReport verify_markov_property(const CountableMarkovPartition& part, const TransitionMatrix& t) {
  MarkovReport rep;
  const auto& base = part.base;
  for (std::size_t i = 0; i < part.size(); ++i) {
    std::size_t b = part[i].image;
    for (std::size_t j : t.rows[i]) {
      ++rep.checked_pairs;
      bool inside;
      if (part.exact && part[j].exact_left) {
        Rational off = reduce(*part[j].exact_left - base.exact_left(b));
        inside = off + (*part[j].exact_right - *part[j].exact_left) <= 2 * base.epsilon;
      } else {
        inside = base.ball(b).contains(part[j].arc(), 1e-10);
      }
      if (!inside) {
        rep.ok = false;
        rep.witness = std::make_pair(i, j);
        return rep;
      }
    }
  }
  // elements outside the row must not meet the ball's interior
  std::vector<std::vector<char>> in_row(base.size());
  for (std::size_t b = 0; b < base.size(); ++b) in_row[b].assign(part.size(), 0);
  for (std::size_t i = 0; i < part.size(); ++i)
    for (std::size_t j : t.rows[i]) in_row[part[i].image][j] = 1;
  std::vector<char> image_used(base.size(), 0);
  for (std::size_t i = 0; i < part.size(); ++i) image_used[part[i].image] = 1;
  for (std::size_t b = 0; b < base.size(); ++b) {
    if (!image_used[b]) continue;
    for (std::size_t j = 0; j < part.size(); ++j)
      if (!in_row[b][j] && interiors_intersect(base.ball(b), part[j].arc(), 1e-10)) {
        rep.ok = false;
        for (std::size_t i = 0; i < part.size(); ++i)
          if (part[i].image == b) rep.witness = std::make_pair(i, j);
        return rep;
      }
  }
  return rep;
}

struct PartitionAudit {
  bool disjoint = true;
  bool inside_components = true;
  bool images_exact = true;
  double mass = 0.0;
  std::optional<std::pair<std::size_t, std::size_t>> overlap_witness;
};

/// Disjointness, containment in components, exact images and covered mass;
/// in rational arithmetic when the partition is exact.
inline PartitionAudit audit_partition(const CountableMarkovPartition& part, const GeneratorSystem& system) {
  PartitionAudit a;
  std::vector<std::size_t> idx(part.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
    if (part.exact && part[x].exact_left && part[y].exact_left) return *part[x].exact_left < *part[y].exact_left;
    return part[x].left < part[y].left;
  });
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& e = part[idx[k]];
    const auto& c = part.components[e.component];
    if (part.exact && e.exact_left) {
      Rational off = reduce(*e.exact_left - c.lo);
      if (!(off + (*e.exact_right - *e.exact_left) <= c.hi - c.lo) || !(*e.exact_right > *e.exact_left))
        a.inside_components = false;
      detail::ExactGeometry geom(system);
      auto [y0, len] = geom.image(e.word, *e.exact_left, *e.exact_right);
      if (len != 2 * part.base.epsilon || reduce(y0 - part.base.exact_left(e.image)) != 0) a.images_exact = false;
    } else {
      Arc comp = Arc::from_lift(to_double(c.lo), to_double(c.hi));
      if (!comp.contains(e.arc(), 1e-12)) a.inside_components = false;
      auto p = push_offset(system, e.word, e.left, e.right - e.left);
      if (std::fabs(p.delta - 2.0 * part.base.eps()) > 1e-9 || circle_distance(p.base, part.base.left(e.image)) > 1e-9)
        a.images_exact = false;
    }
  }
  // sweep for overlaps on the circle (sorted by left endpoint, with wrap)
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& e = part[idx[k]];
    std::size_t next = idx[(k + 1) % idx.size()];
    if (idx.size() < 2) break;
    const auto& f = part[next];
    bool overlap;
    if (part.exact && e.exact_left && f.exact_left) {
      Rational gap = reduce(*f.exact_left - *e.exact_left);
      overlap = gap < *e.exact_right - *e.exact_left;
    } else {
      double gap = reduce(f.left - e.left);
      overlap = gap < e.length() - 1e-12;
    }
    if (overlap) {
      a.disjoint = false;
      a.overlap_witness = std::make_pair(idx[k], next);
    }
  }
  if (part.exact) {
    Rational m = 0;
    for (const auto& e : part.elements) m += *e.exact_right - *e.exact_left;
    a.mass = to_double(m);
  } else {
    a.mass = part.covered_mass();
  }
  return a;
}

}  // namespace lexpand
