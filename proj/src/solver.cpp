#include "rgbpose/solver.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rgbpose/rng.hpp"

namespace rgbpose::pnp {

using geom::Intrinsics;
using geom::Mat3;
using geom::Vec2;
using geom::Vec3;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec3 bearing(const Vec2& px, const Intrinsics& K) {
  return Vec3((px.x() - K.cx) / K.fx, (px.y() - K.cy) / K.fy, 1.0).normalized();
}

// degree-2 * degree-2 and friends, ascending coefficients
std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

void poly_axpy(std::vector<double>& acc, const std::vector<double>& p, double c) {
  if (acc.size() < p.size()) acc.resize(p.size(), 0.0);
  for (size_t i = 0; i < p.size(); ++i) acc[i] += c * p[i];
}

double poly_eval(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (size_t i = c.size(); i-- > 0;) v = v * x + c[i];
  return v;
}

// Rigid transform X -> Y for exactly aligned correspondence sets (Kabsch).
bool kabsch(const std::vector<Vec3>& X, const std::vector<Vec3>& Y, Mat3& R, Vec3& t) {
  Vec3 mx = Vec3::Zero(), my = Vec3::Zero();
  const double n = static_cast<double>(X.size());
  for (size_t i = 0; i < X.size(); ++i) {
    mx += X[i];
    my += Y[i];
  }
  mx /= n;
  my /= n;
  Mat3 H = Mat3::Zero();
  for (size_t i = 0; i < X.size(); ++i) H += (X[i] - mx) * (Y[i] - my).transpose();
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 d = Vec3::Ones();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2) = -1.0;
  R = svd.matrixV() * d.asDiagonal() * svd.matrixU().transpose();
  t = my - R * mx;
  return R.allFinite() && t.allFinite();
}

}  // namespace

std::vector<double> real_polynomial_roots(const std::vector<double>& coeffs) {
  // trim negligible leading coefficients
  double maxc = 0.0;
  for (double c : coeffs) maxc = std::max(maxc, std::fabs(c));
  if (maxc == 0.0) return {};
  size_t deg = coeffs.size() - 1;
  while (deg > 0 && std::fabs(coeffs[deg]) < 1e-12 * maxc) --deg;
  if (deg == 0) return {};
  if (deg == 1) return {-coeffs[0] / coeffs[1]};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (size_t i = 0; i < deg; ++i) companion(i, deg - 1) = -coeffs[i] / coeffs[deg];
  for (size_t i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;

  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  std::vector<double> roots;
  for (long i = 0; i < es.eigenvalues().size(); ++i) {
    const auto ev = es.eigenvalues()(i);
    if (std::fabs(ev.imag()) > 1e-8 * (1.0 + std::fabs(ev.real()))) continue;
    double x = ev.real();
    // Newton polish on the original polynomial
    for (int it = 0; it < 3; ++it) {
      double f = 0.0, df = 0.0;
      for (size_t k = deg + 1; k-- > 1;) {
        df = df * x + f;
        f = f * x + coeffs[k];
      }
      df = df * x + f;
      f = f * x + coeffs[0];
      if (std::fabs(df) < 1e-300) break;
      x -= f / df;
    }
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

std::vector<std::pair<Mat3, Vec3>> pnp_minimal(const std::array<Vec2, 4>& pixels,
                                               const std::array<Vec3, 4>& points,
                                               const Intrinsics& K) {
  std::vector<std::pair<Mat3, Vec3>> out;

  const Vec3 e1 = points[1] - points[0];
  const Vec3 e2 = points[2] - points[0];
  const double span = std::max({e1.norm(), e2.norm(), (points[2] - points[1]).norm()});
  if (span < 1e-12 || e1.cross(e2).norm() < 1e-10 * span * span) return out;  // collinear

  const Vec3 f1 = bearing(pixels[0], K);
  const Vec3 f2 = bearing(pixels[1], K);
  const Vec3 f3 = bearing(pixels[2], K);

  // Grunert: sides opposite each vertex and the ray angles subtending them.
  const double a = (points[1] - points[2]).norm();
  const double b = (points[0] - points[2]).norm();
  const double c = (points[0] - points[1]).norm();
  const double cos_a = f2.dot(f3);
  const double cos_b = f1.dot(f3);
  const double cos_g = f1.dot(f2);
  if (b < 1e-12) return out;

  const double A = (a * a - c * c) / (b * b);
  const double B = (a * a + c * c) / (b * b);

  // u(v) = num(v)/den(v) obtained by eliminating u between the two law-of-
  // cosines ratios; substituting back yields the quartic in v.
  const std::vector<double> num = {1.0 + A, -2.0 * cos_b * A, A - 1.0};
  const std::vector<double> den = {2.0 * cos_g, -2.0 * cos_a};
  // residual (A-equation): u^2 - 2 u cos_g + q(v) = 0, q(v) below
  const double c2b2 = (c * c) / (b * b);
  const std::vector<double> q = {1.0 - c2b2, 2.0 * cos_b * c2b2, -c2b2};

  std::vector<double> quartic = poly_mul(num, num);
  poly_axpy(quartic, poly_mul(num, den), -2.0 * cos_g);
  poly_axpy(quartic, poly_mul(q, poly_mul(den, den)), 1.0);

  for (double v : real_polynomial_roots(quartic)) {
    if (!(v > 0.0) || !std::isfinite(v)) continue;
    const double den_v = poly_eval(den, v);
    if (std::fabs(den_v) < 1e-12) continue;
    const double u = poly_eval(num, v) / den_v;
    if (!(u > 0.0)) continue;
    const double s1_sq = 1.0 + v * v - 2.0 * v * cos_b;
    if (s1_sq <= 0.0) continue;
    const double s1 = b / std::sqrt(s1_sq);
    const double s2 = u * s1;
    const double s3 = v * s1;
    if (!(s1 > 0.0 && s2 > 0.0 && s3 > 0.0)) continue;

    const std::vector<Vec3> X{points[0], points[1], points[2]};
    const std::vector<Vec3> Y{s1 * f1, s2 * f2, s3 * f3};
    Mat3 R;
    Vec3 t;
    if (!kabsch(X, Y, R, t)) continue;

    bool ok = true;
    for (int i = 0; i < 4 && ok; ++i) ok = (R * points[i] + t).z() > 0.0;
    if (!ok) continue;
    out.emplace_back(R, t);
  }

  // disambiguate: best fourth-point reprojection first
  std::stable_sort(out.begin(), out.end(), [&](const auto& lhs, const auto& rhs) {
    const Vec3 pl = lhs.first * points[3] + lhs.second;
    const Vec3 pr = rhs.first * points[3] + rhs.second;
    const double el = (geom::project_point(pl, K) - pixels[3]).norm();
    const double er = (geom::project_point(pr, K) - pixels[3]).norm();
    return el < er;
  });
  return out;
}

double reproj_rmse(const Mat3& R, const Vec3& t, const std::vector<Vec3>& points,
                   const std::vector<Vec2>& pixels, const Intrinsics& K) {
  if (points.empty()) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    const Vec3 pc = R * points[i] + t;
    if (pc.z() <= 0.0) return kInf;
    acc += (geom::project_point(pc, K) - pixels[i]).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(points.size()));
}

bool refine_pose(Mat3& R, Vec3& t, const std::vector<Vec3>& points,
                 const std::vector<Vec2>& pixels, const Intrinsics& K,
                 int max_iterations) {
  if (points.size() < 4 || points.size() != pixels.size()) return false;
  const auto cost_of = [&](const Mat3& Rc, const Vec3& tc) {
    double acc = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
      const Vec3 pc = Rc * points[i] + tc;
      if (pc.z() <= 0.0) return kInf;
      acc += (geom::project_point(pc, K) - pixels[i]).squaredNorm();
    }
    return acc;
  };

  double cost = cost_of(R, t);
  if (!std::isfinite(cost)) return false;

  for (int iter = 0; iter < max_iterations; ++iter) {
    Eigen::Matrix<double, 6, 6> JtJ = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> Jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (size_t i = 0; i < points.size(); ++i) {
      const Vec3 pc = R * points[i] + t;
      const double z = pc.z(), iz = 1.0 / z;
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << K.fx * iz, 0.0, -K.fx * pc.x() * iz * iz, 0.0, K.fy * iz,
          -K.fy * pc.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dpc;
      dpc.block<3, 3>(0, 0) = -geom::skew(R * points[i]);
      dpc.block<3, 3>(0, 3) = Mat3::Identity();
      const Eigen::Matrix<double, 2, 6> J = dpi * dpc;
      const Vec2 r = geom::project_point(pc, K) - pixels[i];
      JtJ += J.transpose() * J;
      Jtr += J.transpose() * r;
    }
    Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(JtJ);
    if (ldlt.info() != Eigen::Success) return iter > 0;
    Eigen::Matrix<double, 6, 1> delta = ldlt.solve(-Jtr);
    if (!delta.allFinite()) return iter > 0;

    // step halving keeps the cost non-increasing
    bool accepted = false;
    for (int h = 0; h < 24; ++h) {
      const Mat3 Rn = geom::axis_angle_to_rotation(delta.head<3>()) * R;
      const Vec3 tn = t + delta.tail<3>();
      const double cn = cost_of(Rn, tn);
      if (cn <= cost) {
        R = Rn;
        t = tn;
        const double drop = cost - cn;
        cost = cn;
        accepted = true;
        if (drop < 1e-18 * (1.0 + cost)) return true;
        break;
      }
      delta *= 0.5;
    }
    if (!accepted) return true;  // local minimum within halving budget
  }
  return true;
}

PnPResult ransac_pnp(const std::vector<Vec2>& pixels, const std::vector<Vec3>& points,
                     const Intrinsics& K, const RansacConfig& cfg) {
  PnPResult res;
  const size_t n = pixels.size();
  res.inlier_flags.assign(n, 0);
  if (n != points.size() || n < 6 || n < static_cast<size_t>(cfg.min_inliers)) return res;

  // canonical order makes consensus a set property, independent of the
  // caller's correspondence ordering
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
    const double kl[5] = {pixels[lhs].x(), pixels[lhs].y(), points[lhs].x(),
                          points[lhs].y(), points[lhs].z()};
    const double kr[5] = {pixels[rhs].x(), pixels[rhs].y(), points[rhs].x(),
                          points[rhs].y(), points[rhs].z()};
    for (int k = 0; k < 5; ++k)
      if (kl[k] != kr[k]) return kl[k] < kr[k];
    return false;
  });
  std::vector<Vec2> px(n);
  std::vector<Vec3> pt(n);
  for (size_t i = 0; i < n; ++i) {
    px[i] = pixels[order[i]];
    pt[i] = points[order[i]];
  }

  Rng rng(cfg.seed);
  const double thr_sq = cfg.inlier_threshold_px * cfg.inlier_threshold_px;

  Mat3 best_R;
  Vec3 best_t;
  long best_count = 0;
  double best_err = kInf;
  int used = 0;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    used = iter + 1;
    // four distinct indices
    std::array<int, 4> idx{};
    int got = 0;
    while (got < 4) {
      const int cand = static_cast<int>(rng.uniform_index(n));
      bool dup = false;
      for (int j = 0; j < got; ++j) dup |= idx[j] == cand;
      if (!dup) idx[got++] = cand;
    }
    const std::array<Vec2, 4> spx{px[idx[0]], px[idx[1]], px[idx[2]], px[idx[3]]};
    const std::array<Vec3, 4> spt{pt[idx[0]], pt[idx[1]], pt[idx[2]], pt[idx[3]]};

    for (const auto& [Rc, tc] : pnp_minimal(spx, spt, K)) {
      long count = 0;
      double err = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const Vec3 pc = Rc * pt[i] + tc;
        if (pc.z() <= 0.0) continue;
        const double e2 = (geom::project_point(pc, K) - px[i]).squaredNorm();
        if (e2 < thr_sq) {
          ++count;
          err += e2;
        }
      }
      if (count > best_count || (count == best_count && err < best_err)) {
        best_count = count;
        best_err = err;
        best_R = Rc;
        best_t = tc;
      }
    }

    // adaptive termination
    const double w = static_cast<double>(best_count) / static_cast<double>(n);
    const double p_fail = std::pow(1.0 - w * w * w * w, used);
    if (p_fail < 1.0 - cfg.confidence) break;
  }
  res.iterations_used = used;

  if (best_count < cfg.min_inliers) return res;

  // refine on the consensus set
  std::vector<Vec3> in_pt;
  std::vector<Vec2> in_px;
  for (size_t i = 0; i < n; ++i) {
    const Vec3 pc = best_R * pt[i] + best_t;
    if (pc.z() <= 0.0) continue;
    if ((geom::project_point(pc, K) - px[i]).squaredNorm() < thr_sq) {
      in_pt.push_back(pt[i]);
      in_px.push_back(px[i]);
    }
  }
  refine_pose(best_R, best_t, in_pt, in_px, K, cfg.refine_iterations);

  // final inliers under the refined pose, mapped back to caller order
  long final_count = 0;
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Vec3 pc = best_R * pt[i] + best_t;
    if (pc.z() <= 0.0) continue;
    const double e2 = (geom::project_point(pc, K) - px[i]).squaredNorm();
    if (e2 < thr_sq) {
      res.inlier_flags[order[i]] = 1;
      ++final_count;
      acc += e2;
    }
  }
  if (final_count < cfg.min_inliers) {
    res.inlier_flags.assign(n, 0);
    return res;
  }
  res.success = true;
  res.R = best_R;
  res.t = best_t;
  res.reproj_rmse = std::sqrt(acc / static_cast<double>(final_count));
  return res;
}

}  // namespace rgbpose::pnp
