#include "bqkd/keyrate.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace bqkd {

namespace {

Mat psd_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es((m + m.adjoint()) / 2.0);
  RVec vals = es.eigenvalues();
  for (int i = 0; i < vals.size(); ++i) {
    if (vals[i] < -1e-10) {
      throw std::runtime_error("key map: indefinite click operator");
    }
    vals[i] = std::sqrt(std::max(vals[i], 0.0));
  }
  return es.eigenvectors() * vals.cast<Complex>().asDiagonal() *
         es.eigenvectors().adjoint();
}

// -tr[rho log2 rho] for PSD rho, eigenvalues clamped away from zero
double entropy_bits(const Mat& rho) {
  Eigen::SelfAdjointEigenSolver<Mat> es((rho + rho.adjoint()) / 2.0,
                                        Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double l = std::max(es.eigenvalues()[i], 1e-300);
    s -= es.eigenvalues()[i] > 0 ? l * std::log2(l) : 0.0;
  }
  return s;
}

Mat log2m(const Mat& rho) {
  Eigen::SelfAdjointEigenSolver<Mat> es((rho + rho.adjoint()) / 2.0);
  RVec vals = es.eigenvalues();
  Vec logs(vals.size());
  for (int i = 0; i < vals.size(); ++i) {
    logs[i] = std::log2(std::max(vals[i], 1e-300));
  }
  return es.eigenvectors() * logs.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

KeyMapBundle build_key_maps(const Scenario& sc) {
  KeyMapBundle kb;
  kb.epsilon = sc.epsilon;
  kb.dim_bf = sc.basis.size();
  kb.dim_abf = 4 * kb.dim_bf;
  kb.dim_prime = 2 * kb.dim_abf;
  int m = kb.dim_bf;

  Mat u2 = beam_splitter(sc.basis, sc.bypass.eta_t, BsConvention::U2);
  for (int x = 0; x < 2; ++x) {
    kb.p[x] = u2.adjoint() * psd_sqrt(sc.bob.n[0][x] + sc.bob.n[1][x]) * u2;

    kb.v[x] = Mat::Zero(kb.dim_prime, kb.dim_abf);
    kb.t[x] = Mat::Zero(2 * m, kb.dim_abf);
    for (int a = 0; a < 2; ++a) {
      int ia = 2 * a + x;  // A index selected by M_{a,x}
      for (int s = 0; s < m; ++s) {
        // V_x places |a,x>_A population under key value a
        kb.v[x]((a * 4 + ia) * m + s, ia * m + s) = 1.0;
        for (int sp = 0; sp < m; ++sp) {
          kb.t[x](a * m + s, ia * m + sp) = kb.p[x](s, sp);
        }
      }
    }
  }
  // sanity: the key isometries resolve the identity
  Mat sum = Mat::Zero(kb.dim_abf, kb.dim_abf);
  for (int x = 0; x < 2; ++x) sum += kb.v[x].adjoint() * kb.v[x];
  if ((sum - Mat::Identity(kb.dim_abf, kb.dim_abf)).cwiseAbs().maxCoeff() >
      1e-10) {
    throw std::runtime_error("key map: isometry completeness violated");
  }
  return kb;
}

ObjectiveValue f_eps(const Mat& rho, const KeyMapBundle& kb) {
  double tr = rho.trace().real();
  if (tr <= 0.0 || tr > 1.0 + 1e-9) {
    throw std::invalid_argument("f_eps: trace outside (0,1]");
  }
  ObjectiveValue out;
  out.floor_before = 1e300;
  out.floor_after = 1e300;
  double eps = kb.epsilon;
  int m = kb.dim_bf;
  for (int x = 0; x < 2; ++x) {
    Mat sigma = kb.t[x] * rho * kb.t[x].adjoint();
    double ts = sigma.trace().real();
    if (ts <= 0.0) continue;
    Eigen::SelfAdjointEigenSolver<Mat> pre(sigma, Eigen::EigenvaluesOnly);
    out.floor_before = std::min(out.floor_before, pre.eigenvalues().minCoeff());

    double c = eps * ts / kb.dim_prime;
    Mat sig_eps = (1.0 - eps) * sigma +
                  c * Mat::Identity(2 * m, 2 * m);
    Eigen::SelfAdjointEigenSolver<Mat> post(sig_eps, Eigen::EigenvaluesOnly);
    double branch_floor = post.eigenvalues().minCoeff();
    out.floor_after = std::min(out.floor_after, branch_floor);
    if (eps > 0 && branch_floor < c - 1e-13) {
      throw std::runtime_error("f_eps: spectral floor violated");
    }

    // pinched reference is block diagonal over the key value; the portion of
    // the depolarized output outside the compact support is pinching-fixed
    // and cancels in the relative entropy
    double term = -entropy_bits(sig_eps);
    for (int a = 0; a < 2; ++a) {
      term += entropy_bits(sig_eps.block(a * m, a * m, m, m));
    }
    out.per_basis[x] = term;
    out.value += term;
  }
  if (out.value < -1e-9) {
    throw std::runtime_error("f_eps: negative relative entropy");
  }
  out.value = std::max(out.value, 0.0);
  return out;
}

Mat grad_f_eps(const Mat& rho, const KeyMapBundle& kb) {
  double tr = rho.trace().real();
  if (tr <= 0.0 || tr > 1.0 + 1e-9) {
    throw std::invalid_argument("grad_f_eps: trace outside (0,1]");
  }
  double eps = kb.epsilon;
  int m = kb.dim_bf;
  Mat grad = Mat::Zero(kb.dim_abf, kb.dim_abf);
  for (int x = 0; x < 2; ++x) {
    Mat sigma = kb.t[x] * rho * kb.t[x].adjoint();
    double ts = sigma.trace().real();
    double c = eps * std::max(ts, 0.0) / kb.dim_prime;
    Mat sig_eps = (1.0 - eps) * sigma + c * Mat::Identity(2 * m, 2 * m);

    Mat log_tau = Mat::Zero(2 * m, 2 * m);
    for (int a = 0; a < 2; ++a) {
      log_tau.block(a * m, a * m, m, m) =
          log2m(sig_eps.block(a * m, a * m, m, m));
    }
    Mat ell = log2m(sig_eps) - log_tau;
    double tr_ell = ell.trace().real();
    grad += (1.0 - eps) * (kb.t[x].adjoint() * ell * kb.t[x]) +
            (eps * tr_ell / kb.dim_prime) * (kb.t[x].adjoint() * kb.t[x]);
  }
  // transposed pairing convention
  return grad.transpose();
}

double zeta_eps(double eps, int d_prime) {
  if (d_prime < 2 || eps <= 0.0 || eps >= 1.0 / (d_prime - 1)) {
    throw std::invalid_argument("zeta_eps: domain violation");
  }
  double w = eps * (d_prime - 1);
  return 2.0 * w * std::log2(d_prime / w);
}

}  // namespace bqkd
