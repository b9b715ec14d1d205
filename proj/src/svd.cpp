#include <algorithm>
#include <cmath>
#include <iostream>

#include <Eigen/SVD>

#include "ehrgraph/model.hpp"

namespace ehrgraph {

namespace {

using ColMatrix = Eigen::MatrixXd;

// X * M for the binary patient x event matrix of g.
ColMatrix times_dense(const BipartiteGraph& g, const ColMatrix& m) {
  ColMatrix out = ColMatrix::Zero(static_cast<Eigen::Index>(g.num_patients()), m.cols());
  for (std::size_t i = 0; i < g.num_patients(); ++i) {
    for (const auto j : g.events_of(i)) {
      out.row(static_cast<Eigen::Index>(i)) += m.row(j);
    }
  }
  return out;
}

// X^T * M.
ColMatrix transpose_times_dense(const BipartiteGraph& g, const ColMatrix& m) {
  ColMatrix out = ColMatrix::Zero(static_cast<Eigen::Index>(g.num_events()), m.cols());
  for (std::size_t j = 0; j < g.num_events(); ++j) {
    for (const auto i : g.patients_of(j)) {
      out.row(static_cast<Eigen::Index>(j)) += m.row(i);
    }
  }
  return out;
}

ColMatrix orthonormal_basis(const ColMatrix& y) {
  Eigen::HouseholderQR<ColMatrix> qr(y);
  return qr.householderQ() * ColMatrix::Identity(y.rows(), y.cols());
}

}  // namespace

SvdEmbeddings init_event_embeddings_svd(const BipartiteGraph& train, std::size_t d, std::size_t power_iters,
                                        std::uint64_t seed) {
  const std::size_t m = train.num_patients();
  const std::size_t n = train.num_events();
  if (d == 0) {
    throw ConfigError("embedding dimension must be >= 1");
  }
  SvdEmbeddings out;
  out.embeddings = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  out.singular_values = Vector::Zero(static_cast<Eigen::Index>(std::min(d, std::min(m, n))));
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t full_rank = std::min(m, n);
  std::size_t kept = 0;
  if (full_rank > 0) {
    const auto width = static_cast<Eigen::Index>(std::min(d + 10, full_rank));
    ColMatrix omega(static_cast<Eigen::Index>(n), width);
    for (Eigen::Index k = 0; k < omega.size(); ++k) {
      omega.data()[k] = normal(rng);
    }
    ColMatrix q = orthonormal_basis(times_dense(train, omega));
    for (std::size_t it = 0; it < power_iters; ++it) {
      const ColMatrix z = orthonormal_basis(transpose_times_dense(train, q));
      q = orthonormal_basis(times_dense(train, z));
    }
    const ColMatrix b = transpose_times_dense(train, q).transpose();  // width x n
    Eigen::BDCSVD<ColMatrix> svd(b, Eigen::ComputeThinV);
    const auto& sigma = svd.singularValues();
    const ColMatrix& v = svd.matrixV();
    const double top = sigma.size() > 0 ? sigma[0] : 0.0;
    const std::size_t usable = std::min<std::size_t>(d, static_cast<std::size_t>(sigma.size()));
    for (std::size_t k = 0; k < usable; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      out.singular_values[kk] = sigma[kk];
      if (top <= 0.0 || sigma[kk] <= 1e-10 * top) {
        break;
      }
      // Fix the sign so the largest-magnitude entry is positive.
      Eigen::Index arg = 0;
      v.col(kk).cwiseAbs().maxCoeff(&arg);
      const double sign = v(arg, kk) < 0 ? -1.0 : 1.0;
      out.embeddings.col(kk) = sign * std::sqrt(sigma[kk]) * v.col(kk);
      ++kept;
    }
  }
  out.noise_columns = d - kept;
  if (out.noise_columns > 0) {
    std::cerr << "warning: train matrix has numerical rank " << kept << " < embedding dim " << d << "; "
              << out.noise_columns << " embedding columns initialised with noise\n";
    for (std::size_t k = kept; k < d; ++k) {
      for (std::size_t j = 0; j < n; ++j) {
        out.embeddings(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = 0.01 * normal(rng);
      }
    }
  }
  return out;
}

}  // namespace ehrgraph
