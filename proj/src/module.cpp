#include "frwkv/module.hpp"

#include <cmath>

#include "frwkv/errors.hpp"

namespace frwkv {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 14695981039346656037ull ^ seed;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  // splitmix64 finalizer
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

Var ParamStore::add(std::string name, Tensor init, bool decay) {
  if (find(name)) throw ContractError("duplicate parameter name " + name);
  Var v = parameter(std::move(init));
  params_.push_back({std::move(name), v, decay});
  return v;
}

const NamedParam* ParamStore::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

Var ParamStore::get(std::string_view name) const {
  const NamedParam* p = find(name);
  if (!p) throw ContractError("unknown parameter " + std::string(name));
  return p->var;
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

Tensor uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = rng.uniform(-bound, bound);
  return t;
}

Linear::Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, std::uint64_t seed,
               bool bias, Init init)
    : in_(in), out_(out) {
  Rng rng(derive_seed(seed, name));
  w_ = store.add(name + ".weight", init == Init::Zero ? Tensor({in, out}) : uniform_fan_in({in, out}, in, rng));
  if (bias) b_ = store.add(name + ".bias", Tensor({out}), false);
}

Var Linear::operator()(const Var& x) const {
  Var y = matmul(x, w_);
  return b_.defined() ? y + b_ : y;
}

Mlp2::Mlp2(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
           std::uint64_t seed, Linear::Init last_init)
    : first_(store, name + ".0", in, hidden, seed), second_(store, name + ".1", hidden, out, seed, true, last_init) {}

}  // namespace frwkv
