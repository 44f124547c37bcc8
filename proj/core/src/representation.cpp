#include "refine/representation.hpp"

#include <cmath>
#include <stdexcept>

namespace refine {

Representation Representation::zero(int input_dim, int rep_dim) {
  if (input_dim < 1 || rep_dim < 1) {
    throw std::invalid_argument("representation dims must be >= 1");
  }
  Representation r;
  r.kind_ = Kind::zero;
  r.input_dim_ = input_dim;
  r.rep_dim_ = rep_dim;
  return r;
}

Representation Representation::from_task(SyntheticTask task) {
  Representation r;
  r.kind_ = Kind::task;
  r.input_dim_ = task.input_dim;
  r.rep_dim_ = task.rep_dim;
  r.task_.push_back(std::move(task));
  return r;
}

Representation Representation::pretrained(NetworkParams net) {
  net.spec.validate();
  if (net.spec.depth < 2) {
    throw std::invalid_argument("pretrained representation needs depth >= 2");
  }
  Representation r;
  r.kind_ = Kind::pretrained;
  r.input_dim_ = net.spec.input_dim;
  r.rep_dim_ = net.spec.width;
  r.net_.push_back(std::move(net));
  return r;
}

Representation Representation::multisource(std::vector<Representation> sources) {
  if (sources.empty()) {
    throw std::invalid_argument("multisource representation needs >= 1 source");
  }
  Representation r;
  r.kind_ = Kind::multisource;
  r.input_dim_ = sources.front().input_dim();
  r.rep_dim_ = 0;
  for (const auto& s : sources) {
    if (s.input_dim() != r.input_dim_) {
      throw std::invalid_argument("multisource: sources must share input_dim");
    }
    r.rep_dim_ += s.rep_dim();
  }
  r.sources_ = std::move(sources);
  return r;
}

const SyntheticTask& Representation::task() const {
  if (kind_ != Kind::task) throw std::logic_error("representation is not task-backed");
  return task_.front();
}

const NetworkParams& Representation::network() const {
  if (kind_ != Kind::pretrained) throw std::logic_error("representation is not pretrained");
  return net_.front();
}

void Representation::eval(std::span<const double> x, std::span<double> out) const {
  if (x.size() != static_cast<std::size_t>(input_dim_)) {
    throw std::invalid_argument("representation eval: input dimension mismatch");
  }
  if (out.size() != static_cast<std::size_t>(rep_dim_)) {
    throw std::invalid_argument("representation eval: output size mismatch");
  }
  switch (kind_) {
    case Kind::zero:
      std::fill(out.begin(), out.end(), 0.0);
      break;
    case Kind::task:
      eval_frep(task_.front(), x, out);
      break;
    case Kind::pretrained: {
      std::vector<double> act;
      penultimate(net_.front(), x, act);
      double norm_sq = 0.0;
      for (double v : act) norm_sq += v * v;
      const double scale = 1.0 / std::max(1.0, std::sqrt(norm_sq));
      for (std::size_t i = 0; i < act.size(); ++i) out[i] = scale * act[i];
      break;
    }
    case Kind::multisource: {
      const double scale = 1.0 / std::sqrt(static_cast<double>(sources_.size()));
      std::size_t offset = 0;
      for (const auto& s : sources_) {
        const std::size_t p = static_cast<std::size_t>(s.rep_dim());
        s.eval(x, out.subspan(offset, p));
        offset += p;
      }
      for (double& v : out) v *= scale;
      break;
    }
  }
}

std::vector<double> Representation::eval(std::span<const double> x) const {
  std::vector<double> out(static_cast<std::size_t>(rep_dim_));
  eval(x, out);
  return out;
}

std::string Representation::describe() const {
  switch (kind_) {
    case Kind::zero:
      return "zero(p=" + std::to_string(rep_dim_) + ")";
    case Kind::task:
      return "task(kind=" + to_string(task_.front().kind) +
             ",seed=" + std::to_string(task_.front().seed) + ")";
    case Kind::pretrained: {
      const auto& spec = net_.front().spec;
      return "pretrained(width=" + std::to_string(spec.width) +
             ",depth=" + std::to_string(spec.depth) + ")";
    }
    case Kind::multisource: {
      std::string s = "multisource[";
      for (std::size_t i = 0; i < sources_.size(); ++i) {
        if (i) s += ",";
        s += sources_[i].describe();
      }
      return s + "]";
    }
  }
  return "unknown";
}

}  // namespace refine
