#include "frwkv/revin.hpp"

#include <algorithm>
#include <cmath>

#include "frwkv/errors.hpp"

namespace frwkv::revin {

RevIN::RevIN(ParamStore& store, const std::string& name, std::size_t n_vars, bool affine) {
  if (affine) {
    gamma_ = store.add(name + ".gamma", Tensor({n_vars}, 1.0), false);
    beta_ = store.add(name + ".beta", Tensor({n_vars}), false);
  } else {
    gamma_ = constant(Tensor({n_vars}, 1.0));
    beta_ = constant(Tensor({n_vars}));
  }
}

std::pair<Var, RevinState> RevIN::normalize(const Var& x) const {
  const Shape& s = x.shape();
  if (s.size() != 3) throw DimensionError("RevIN expects [B,T,N], got " + frwkv::to_string(s));
  const std::size_t b = s[0], t = s[1], n = s[2];
  if (t < 2) throw DataError("RevIN needs at least 2 time steps, got " + std::to_string(t));
  if (gamma_.size() != n) throw DimensionError("RevIN built for " + std::to_string(gamma_.size()) + " variables, got " + std::to_string(n));

  RevinState st{Tensor({b, 1, n}), Tensor({b, 1, n}), kRevinEps};
  const Tensor& v = x.value();
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t c = 0; c < n; ++c) {
      double mu = 0.0;
      for (std::size_t k = 0; k < t; ++k) mu += v[(i * t + k) * n + c];
      mu /= static_cast<double>(t);
      double var = 0.0;
      for (std::size_t k = 0; k < t; ++k) {
        const double d = v[(i * t + k) * n + c] - mu;
        var += d * d;
      }
      var /= static_cast<double>(t);
      st.mu[i * n + c] = mu;
      st.sigma[i * n + c] = std::max(std::sqrt(var), st.eps);
    }
  }
  Var y = (x - constant(st.mu)) / constant(st.sigma) * gamma_ + beta_;
  return {y, std::move(st)};
}

Var RevIN::denormalize(const Var& y, const RevinState& state) const {
  for (double g : gamma_.value().vec()) {
    if (std::fabs(g) < 1e-12) throw NumericError("RevIN scale collapsed to zero; cannot denormalize");
  }
  const Shape& s = y.shape();
  if (s.size() != 3 || s[0] != state.mu.dim(0) || s[2] != state.mu.dim(2)) {
    throw DimensionError("denormalize shape " + frwkv::to_string(s) + " does not match state " + frwkv::to_string(state.mu.shape()));
  }
  return (y - beta_) / gamma_ * constant(state.sigma) + constant(state.mu);
}

Var token_embed(const Var& x, const Var& e) {
  const Shape& s = x.shape();
  if (s.size() != 3 || e.value().rank() != 1) throw DimensionError("token_embed expects x[B,T,N] and e[D]");
  Var xt = reshape(permute(x, {0, 2, 1}), {s[0], s[2], s[1], 1});
  return xt * e;
}

std::string to_string(HeadKind kind) { return kind == HeadKind::MeanLinear ? "mean_linear" : "flatten"; }

HeadKind parse_head(const std::string& text) {
  if (text == "mean_linear") return HeadKind::MeanLinear;
  if (text == "flatten") return HeadKind::Flatten;
  throw ConfigError("unknown projection method '" + text + "' (expected mean_linear or flatten)");
}

HorizonHead::HorizonHead(ParamStore& store, const std::string& name, HeadKind kind, std::size_t input_len,
                         std::size_t channels, std::size_t horizon, std::uint64_t seed)
    : kind_(kind),
      proj_(store, name, kind == HeadKind::MeanLinear ? input_len : input_len * channels, horizon, seed) {}

Var HorizonHead::operator()(const Var& x) const {
  const Shape& s = x.shape();
  if (s.size() != 4) throw DimensionError("horizon head expects [B,N,T,D], got " + frwkv::to_string(s));
  Var flat = kind_ == HeadKind::MeanLinear ? mean(x, -1) : reshape(x, {s[0], s[1], s[2] * s[3]});
  return permute(proj_(flat), {0, 2, 1});
}

std::size_t head_param_count(HeadKind kind, std::size_t input_len, std::size_t channels, std::size_t horizon) {
  const std::size_t in = kind == HeadKind::MeanLinear ? input_len : input_len * channels;
  return in * horizon + horizon;
}

}  // namespace frwkv::revin
