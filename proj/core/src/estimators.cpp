#include "refine/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "backprop.hpp"
#include "refine/rng.hpp"

namespace refine {

namespace {

void check_inputs(const Dataset& data, const Representation& rep) {
  data.validate();
  if (data.size() == 0) throw std::invalid_argument("fit: empty dataset");
  if (rep.input_dim() != data.input_dim) {
    throw std::invalid_argument("fit: representation/input dimension mismatch");
  }
}

// Representation rows for the whole dataset, n x p row-major.
std::vector<double> rep_matrix(const Representation& rep, const Dataset& data) {
  const std::size_t n = data.size();
  const std::size_t p = static_cast<std::size_t>(rep.rep_dim());
  std::vector<double> r(n * p);
  for (std::size_t i = 0; i < n; ++i) {
    rep.eval(data.row(i), {r.data() + i * p, p});
  }
  return r;
}

}  // namespace

ScratchModel fit_scratch(const Dataset& data, const Capacity& cap,
                         const TrainConfig& cfg, TrainLog* log) {
  data.validate();
  if (data.size() == 0) throw std::invalid_argument("fit: empty dataset");
  const NetworkSpec spec = network_spec(cap, data.input_dim, /*clip=*/true);
  const NetworkParams init =
      init_network(spec, mix_seed(cfg.seed, hash_tag("scratch-init")));
  TrainResult r = train_erm(init, data.xs, data.ys, cfg);
  if (log) log->epoch_loss = std::move(r.epoch_loss);
  return ScratchModel{std::move(r.params)};
}

std::vector<double> solve_probe(std::span<const double> feats,
                                std::span<const double> ys, int p) {
  if (p < 1) throw std::invalid_argument("probe: p must be >= 1");
  const std::size_t n = ys.size();
  if (n == 0) throw std::invalid_argument("probe: empty data");
  if (feats.size() != n * static_cast<std::size_t>(p)) {
    throw std::invalid_argument("probe: feature matrix size mismatch");
  }

  using RowMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMat> rmat(feats.data(), static_cast<Eigen::Index>(n), p);
  const Eigen::Map<const Eigen::VectorXd> y(ys.data(),
                                            static_cast<Eigen::Index>(n));
  const Eigen::MatrixXd gram = (rmat.transpose() * rmat) / static_cast<double>(n);
  const Eigen::VectorXd rhs = (rmat.transpose() * y) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("linear probe: eigensolver failed");
  }
  const Eigen::VectorXd lam = es.eigenvalues();
  const Eigen::MatrixXd q = es.eigenvectors();
  const Eigen::VectorXd c = q.transpose() * rhs;
  const double lam_max = std::max(0.0, lam.maxCoeff());
  const double tol = 1e-12 * std::max(1.0, lam_max);

  // Pseudo-inverse solution; rhs always lies in range(gram), so dropped
  // directions carry no coefficient mass.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < p; ++i) {
    if (lam[i] > tol) w += (c[i] / lam[i]) * q.col(i);
  }

  const auto norm_at = [&](double ridge) {
    double s = 0.0;
    for (int i = 0; i < p; ++i) {
      const double denom = std::max(lam[i], 0.0) + ridge;
      if (denom > 0.0) {
        const double wi = c[i] / denom;
        s += wi * wi;
      }
    }
    return std::sqrt(s);
  };

  if (w.norm() > 1.0 + 1e-12) {
    // ||w(ridge)|| decreases continuously to 0, and at ridge = ||rhs|| it
    // is already <= 1, so [0, ||rhs||] brackets the boundary.
    double lo = 0.0;
    double hi = std::max(rhs.norm(), 1e-12);
    for (int iter = 0; iter < 200; ++iter) {
      const double mid = 0.5 * (lo + hi);
      const double nm = norm_at(mid);
      if (std::abs(nm - 1.0) <= 1e-10) {
        lo = hi = mid;
        break;
      }
      (nm > 1.0 ? lo : hi) = mid;
    }
    const double ridge = 0.5 * (lo + hi);
    w.setZero();
    for (int i = 0; i < p; ++i) {
      const double denom = std::max(lam[i], 0.0) + ridge;
      if (denom > 0.0) w += (c[i] / denom) * q.col(i);
    }
  }

  return std::vector<double>(w.data(), w.data() + p);
}

ProbeModel fit_linear_probe(const Dataset& data, const Representation& rep) {
  check_inputs(data, rep);
  const std::vector<double> r = rep_matrix(rep, data);
  ProbeModel m;
  m.rep = rep;
  m.w = solve_probe(r, data.ys, rep.rep_dim());
  return m;
}

RefineModel fit_refine(const Dataset& data, const Representation& rep,
                       const Capacity& cap, const TrainConfig& cfg,
                       TrainLog* log) {
  check_inputs(data, rep);
  cfg.validate();
  const std::size_t n = data.size();
  const std::size_t p = static_cast<std::size_t>(rep.rep_dim());
  const std::vector<double> r = rep_matrix(rep, data);

  RefineModel model;
  model.rep = rep;
  model.v.assign(p, 0.0);
  model.u = 1.0;
  const NetworkSpec hspec = network_spec(cap, data.input_dim, /*clip=*/true);
  model.h = init_network(hspec, mix_seed(cfg.seed, hash_tag("refine-h")));

  Gradient grad_h = zero_gradient(model.h);
  Gradient vel_h = zero_gradient(model.h);
  std::vector<double> grad_v(p, 0.0), vel_v(p, 0.0);
  double grad_u = 0.0, vel_u = 0.0;
  detail::Workspace ws;
  ws.resize(model.h);

  Rng rng(mix_seed(cfg.seed, hash_tag("refine-shuffle")));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

  if (log) log->epoch_loss.clear();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sumsq = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t count = std::min(bs, n - start);
      std::fill(grad_v.begin(), grad_v.end(), 0.0);
      grad_u = 0.0;
      for (auto& layer : grad_h.layers) {
        std::fill(layer.w.begin(), layer.w.end(), 0.0);
        std::fill(layer.b.begin(), layer.b.end(), 0.0);
      }
      const double scale = 2.0 / static_cast<double>(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t row = order[start + i];
        const double* rrow = r.data() + row * p;
        const double raw = detail::forward_ws(model.h, data.row(row), ws);
        const double hbar = std::clamp(raw, -1.0, 1.0);
        double pred = model.u * hbar;
        for (std::size_t j = 0; j < p; ++j) pred += model.v[j] * rrow[j];
        const double err = pred - data.ys[row];
        epoch_sumsq += err * err;
        const double coef = scale * err;
        for (std::size_t j = 0; j < p; ++j) grad_v[j] += coef * rrow[j];
        grad_u += coef * hbar;
        const double gate = std::abs(raw) < 1.0 ? 1.0 : 0.0;
        const double dh = coef * model.u * gate;
        if (dh != 0.0) detail::backward_ws(model.h, dh, ws, grad_h);
      }

      for (std::size_t j = 0; j < p; ++j) {
        vel_v[j] = cfg.momentum * vel_v[j] - cfg.learning_rate * grad_v[j];
        model.v[j] += vel_v[j];
      }
      double vnorm = 0.0;
      for (double vj : model.v) vnorm += vj * vj;
      vnorm = std::sqrt(vnorm);
      if (vnorm > 1.0) {
        for (double& vj : model.v) vj /= vnorm;
      }
      vel_u = cfg.momentum * vel_u - cfg.learning_rate * grad_u;
      model.u = std::clamp(model.u + vel_u, -1.0, 1.0);
      sgd_step(model.h, grad_h, cfg, vel_h);
    }
    if (log) log->epoch_loss.push_back(epoch_sumsq / static_cast<double>(n));
  }
  return model;
}

AdapterModel fit_adapter(const Dataset& data, const Representation& rep,
                         const Capacity& cap, const TrainConfig& cfg,
                         TrainLog* log) {
  check_inputs(data, rep);
  const std::size_t p = static_cast<std::size_t>(rep.rep_dim());
  const std::vector<double> r = rep_matrix(rep, data);
  const NetworkSpec spec = network_spec(cap, static_cast<int>(p), /*clip=*/true);
  const NetworkParams init =
      init_network(spec, mix_seed(cfg.seed, hash_tag("adapter-init")));
  TrainResult t = train_erm(init, r, data.ys, cfg);
  if (log) log->epoch_loss = std::move(t.epoch_loss);
  AdapterModel m;
  m.rep = rep;
  m.net = std::move(t.params);
  return m;
}

RefineModel fit_multisource(const Dataset& data,
                            std::vector<Representation> sources,
                            const Capacity& cap, const TrainConfig& cfg,
                            TrainLog* log) {
  return fit_refine(data, Representation::multisource(std::move(sources)), cap,
                    cfg, log);
}

double predict(const RefineModel& m, std::span<const double> x) {
  const std::vector<double> r = m.rep.eval(x);
  double out = m.u * forward(m.h, x);
  for (std::size_t j = 0; j < r.size(); ++j) out += m.v[j] * r[j];
  return out;
}

double predict(const ScratchModel& m, std::span<const double> x) {
  return forward(m.net, x);
}

double predict(const ProbeModel& m, std::span<const double> x) {
  const std::vector<double> r = m.rep.eval(x);
  double out = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) out += m.w[j] * r[j];
  return out;
}

double predict(const AdapterModel& m, std::span<const double> x) {
  const std::vector<double> r = m.rep.eval(x);
  return forward(m.net, r);
}

RefineModel embed(const ScratchModel& m, const Representation& rep) {
  if (!m.net.spec.clip) {
    throw std::invalid_argument("embed: scratch network must be clipped");
  }
  if (rep.input_dim() != m.net.spec.input_dim) {
    throw std::invalid_argument("embed: representation/input dimension mismatch");
  }
  RefineModel r;
  r.rep = rep;
  r.v.assign(static_cast<std::size_t>(rep.rep_dim()), 0.0);
  r.u = 1.0;
  r.h = m.net;
  return r;
}

RefineModel embed(const ProbeModel& m) {
  RefineModel r;
  r.rep = m.rep;
  r.v = m.w;
  r.u = 0.0;
  NetworkSpec hspec;
  hspec.input_dim = m.rep.input_dim();
  hspec.width = 1;
  hspec.depth = 1;
  hspec.weight_bound = 1.0;
  hspec.clip = true;
  r.h = zero_network(hspec);
  return r;
}

}  // namespace refine
