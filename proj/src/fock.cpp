#include "bqkd/fock.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace bqkd {

long basis_size_for(int max_total_photons) {
  long total = 0;
  for (int k = 0; k <= max_total_photons; ++k) {
    total += static_cast<long>(k + 1) * (k + 2) * (k + 3) / 6;
  }
  return total;
}

SubspaceBasis SubspaceBasis::enumerate(int max_total_photons) {
  if (max_total_photons < 0) {
    throw std::invalid_argument("enumerate_basis: negative photon cutoff");
  }
  SubspaceBasis basis;
  basis.max_total_ = max_total_photons;
  for (int n = 0; n <= max_total_photons; ++n) {
    std::vector<ModeOccupation> layer;
    for (int bh = 0; bh <= n; ++bh) {
      for (int bv = 0; bv + bh <= n; ++bv) {
        for (int fh = 0; fh + bv + bh <= n; ++fh) {
          int fv = n - bh - bv - fh;
          layer.push_back({bh, bv, fh, fv});
        }
      }
    }
    std::sort(layer.begin(), layer.end(), std::greater<ModeOccupation>());
    for (const auto& occ : layer) {
      basis.index_[occ] = static_cast<int>(basis.states_.size());
      basis.states_.push_back(occ);
    }
  }
  return basis;
}

std::optional<int> SubspaceBasis::index_of(const ModeOccupation& occ) const {
  auto it = index_.find(occ);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> SubspaceBasis::layer(int n) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (states_[i].total() == n) out.push_back(i);
  }
  return out;
}

std::vector<FOccupation> SubspaceBasis::f_support() const {
  std::set<FOccupation> seen;
  for (const auto& occ : states_) seen.insert({occ.n_fh, occ.n_fv});
  std::vector<FOccupation> out(seen.begin(), seen.end());
  std::sort(out.begin(), out.end(), [](const FOccupation& a, const FOccupation& b) {
    int ta = a.n_fh + a.n_fv, tb = b.n_fh + b.n_fv;
    if (ta != tb) return ta < tb;
    return b < a;
  });
  return out;
}

Vec apply_creation(const SubspaceBasis& basis, const Vec& in,
                   const std::array<Complex, 4>& coeffs,
                   bool allow_overflow_drop) {
  Vec out = Vec::Zero(basis.size());
  for (int i = 0; i < basis.size(); ++i) {
    if (in[i] == Complex(0.0, 0.0)) continue;
    ModeOccupation occ = basis.at(i);
    for (int m = 0; m < 4; ++m) {
      if (coeffs[m] == Complex(0.0, 0.0)) continue;
      ModeOccupation raised = occ;
      int* counts[4] = {&raised.n_bh, &raised.n_bv, &raised.n_fh, &raised.n_fv};
      *counts[m] += 1;
      auto j = basis.index_of(raised);
      if (!j) {
        if (allow_overflow_drop) continue;
        throw std::out_of_range("apply_creation: truncation overflow");
      }
      out[*j] += in[i] * coeffs[m] * std::sqrt(static_cast<double>(*counts[m]));
    }
  }
  return out;
}

namespace {

double occupation_norm_factor(const ModeOccupation& occ) {
  auto fact = [](int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
  };
  return std::sqrt(fact(occ.n_bh) * fact(occ.n_bv) * fact(occ.n_fh) * fact(occ.n_fv));
}

}  // namespace

Mat beam_splitter(const SubspaceBasis& basis, double eta, BsConvention conv) {
  if (eta < 0.0 || eta > 1.0) {
    throw std::invalid_argument("beam_splitter: eta outside [0,1]");
  }
  const double t = std::sqrt(eta);
  const double r = std::sqrt(1.0 - eta);
  // Images of the four creation operators, per convention, as coefficient
  // rows over (bH+, bV+, fH+, fV+).
  std::array<std::array<Complex, 4>, 4> image{};
  if (conv == BsConvention::U1) {
    image[0] = {t, 0.0, r, 0.0};    // bH+
    image[1] = {0.0, t, 0.0, r};    // bV+
    image[2] = {r, 0.0, -t, 0.0};   // fH+
    image[3] = {0.0, r, 0.0, -t};   // fV+
  } else {
    image[0] = {-t, 0.0, r, 0.0};
    image[1] = {0.0, -t, 0.0, r};
    image[2] = {r, 0.0, t, 0.0};
    image[3] = {0.0, r, 0.0, t};
  }

  Mat u = Mat::Zero(basis.size(), basis.size());
  for (int col = 0; col < basis.size(); ++col) {
    ModeOccupation occ = basis.at(col);
    Vec v = Vec::Zero(basis.size());
    v[*basis.index_of({0, 0, 0, 0})] = 1.0;
    const int counts[4] = {occ.n_bh, occ.n_bv, occ.n_fh, occ.n_fv};
    for (int m = 0; m < 4; ++m) {
      for (int k = 0; k < counts[m]; ++k) {
        v = apply_creation(basis, v, image[m]);
      }
    }
    u.col(col) = v / occupation_norm_factor(occ);
  }
  return u;
}

Mat photon_projector(const SubspaceBasis& basis, std::optional<int> k_b,
                     std::optional<int> k_f) {
  if ((k_b && *k_b > basis.max_total()) || (k_f && *k_f > basis.max_total())) {
    throw std::invalid_argument("photon_projector: count exceeds truncation");
  }
  if ((k_b && *k_b < 0) || (k_f && *k_f < 0)) {
    throw std::invalid_argument("photon_projector: negative photon count");
  }
  Mat p = Mat::Zero(basis.size(), basis.size());
  for (int i = 0; i < basis.size(); ++i) {
    const ModeOccupation& occ = basis.at(i);
    bool match = (!k_b || occ.b_total() == *k_b) && (!k_f || occ.f_total() == *k_f);
    if (match) p(i, i) = 1.0;
  }
  return p;
}

Vec photon_block_state(int n, Polarization pol, double eta_ae,
                       const SubspaceBasis& basis) {
  if (n > basis.max_total()) {
    throw std::out_of_range("photon_block_state: truncation overflow");
  }
  const double t = std::sqrt(eta_ae);
  const double r = std::sqrt(1.0 - eta_ae);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  std::array<Complex, 4> op{};
  switch (pol) {
    case Polarization::H: op = {t, 0.0, r, 0.0}; break;
    case Polarization::V: op = {0.0, t, 0.0, r}; break;
    case Polarization::Plus:
      op = {t * inv_sqrt2, t * inv_sqrt2, r * inv_sqrt2, r * inv_sqrt2};
      break;
    case Polarization::Minus:
      op = {t * inv_sqrt2, -t * inv_sqrt2, r * inv_sqrt2, -r * inv_sqrt2};
      break;
  }
  Vec v = Vec::Zero(basis.size());
  v[*basis.index_of({0, 0, 0, 0})] = 1.0;
  double norm = 1.0;
  for (int k = 1; k <= n; ++k) norm *= k;
  for (int k = 0; k < n; ++k) v = apply_creation(basis, v, op);
  return v / std::sqrt(norm);
}

double trace_norm(const Mat& op, double herm_tol) {
  double herm_err = (op - op.adjoint()).cwiseAbs().maxCoeff();
  if (herm_err > herm_tol) {
    throw std::invalid_argument("trace_norm: input not Hermitian within tolerance");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es((op + op.adjoint()) / 2.0,
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

PartialTraceB::PartialTraceB(const SubspaceBasis& basis, int dim_a)
    : dim_a_(dim_a), dim_bf_(basis.size()) {
  f_basis_ = basis.f_support();
  dim_f_ = static_cast<int>(f_basis_.size());
  for (int k = 0; k < dim_f_; ++k) f_index_[f_basis_[k]] = k;
  // Pairs (s, s') sharing the same B occupation contribute to the F-pair
  // (k, l) formed by their F occupations.
  for (int s = 0; s < basis.size(); ++s) {
    for (int sp = 0; sp < basis.size(); ++sp) {
      const ModeOccupation& a = basis.at(s);
      const ModeOccupation& b = basis.at(sp);
      if (a.n_bh == b.n_bh && a.n_bv == b.n_bv) {
        int k = f_index_.at({a.n_fh, a.n_fv});
        int l = f_index_.at({b.n_fh, b.n_fv});
        kernel_.push_back({s, sp, k, l});
      }
    }
  }
}

Mat PartialTraceB::apply(const Mat& op) const {
  if (op.rows() != dim_in() || op.cols() != dim_in()) {
    throw std::invalid_argument("partial_trace_B: basis mismatch");
  }
  Mat out = Mat::Zero(dim_out(), dim_out());
  for (int i = 0; i < dim_a_; ++i) {
    for (int j = 0; j < dim_a_; ++j) {
      for (const auto& e : kernel_) {
        out(i * dim_f_ + e.k, j * dim_f_ + e.l) +=
            op(i * dim_bf_ + e.s, j * dim_bf_ + e.sp);
      }
    }
  }
  return out;
}

Mat PartialTraceB::adjoint(const Mat& op_af) const {
  if (op_af.rows() != dim_out() || op_af.cols() != dim_out()) {
    throw std::invalid_argument("partial_trace_B adjoint: basis mismatch");
  }
  Mat out = Mat::Zero(dim_in(), dim_in());
  for (int i = 0; i < dim_a_; ++i) {
    for (int j = 0; j < dim_a_; ++j) {
      for (const auto& e : kernel_) {
        out(i * dim_bf_ + e.s, j * dim_bf_ + e.sp) +=
            op_af(i * dim_f_ + e.k, j * dim_f_ + e.l);
      }
    }
  }
  return out;
}

}  // namespace bqkd
