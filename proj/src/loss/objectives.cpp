#include "neurmap/loss/objectives.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "neurmap/diff/ops.hpp"

namespace neurmap::loss {

using diff::Shape;

void LossWeights::validate() const {
  if (!(lambda >= 0) || !(beta >= 0) || !(alpha >= 0))
    throw std::invalid_argument("loss weights must be nonnegative");
}

// ---- LossReport --------------------------------------------------------------

std::size_t LossReport::index_of(const std::string& name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (name == kNames[i]) return i;
  throw std::invalid_argument("unknown loss term " + name);
}

void LossReport::set(const std::string& name, double value) { values_[index_of(name)] = value; }

std::optional<double> LossReport::get(const std::string& name) const { return values_[index_of(name)]; }

std::vector<std::string> LossReport::present() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (values_[i]) out.emplace_back(kNames[i]);
  return out;
}

void LossReport::merge(const LossReport& other) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (other.values_[i]) values_[i] = other.values_[i];
}

bool LossReport::all_finite() const {
  for (const auto& v : values_)
    if (v && !std::isfinite(*v)) return false;
  return true;
}

std::string LossReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (values_[i]) os << (os.tellp() > 0 ? " " : "") << kNames[i] << "=" << *values_[i];
  return os.str();
}

std::string LossReport::csv_header() {
  std::string h = "step,lr";
  for (const char* n : kNames) h += std::string(",") + n;
  return h;
}

std::string LossReport::csv_row(long step, double lr) const {
  std::ostringstream os;
  os.precision(9);
  os << step << ',' << lr;
  for (const auto& v : values_) {
    os << ',';
    if (v) os << *v;
  }
  return os.str();
}

// ---- terms -------------------------------------------------------------------

namespace {

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + diff::shape_str(a.shape()) + " vs " +
                                diff::shape_str(b.shape()));
}

template <typename T>
Tensor<T> average(const std::vector<Tensor<T>>& terms) {
  if (terms.empty()) throw std::invalid_argument("average of an empty term list");
  Tensor<T> acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = diff::add(acc, terms[i]);
  return terms.size() == 1 ? acc : diff::scale(acc, static_cast<T>(1.0 / terms.size()));
}

template <typename T>
Tensor<T> weighted(const Tensor<T>& t, double w) {
  return w == 1.0 ? t : diff::scale(t, static_cast<T>(w));
}

template <typename T>
double value_of(const Tensor<T>& t) {
  return static_cast<double>(t.item());
}

}  // namespace

template <typename T>
Tensor<T> loss_reblur(const Tensor<T>& b, const Tensor<T>& s_hat, const Motion<T>& m_rel, int n_steps) {
  require_same_shape("loss_reblur", b, s_hat);
  return diff::mean(diff::square(diff::sub(b, blur::reblur(s_hat, m_rel, n_steps))));
}

template <typename T>
Tensor<T> loss_magnitude_prior(const Motion<T>& m_b, double alpha) {
  const auto v = m_b.field.values();
  std::vector<T> target(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) target[i] = static_cast<T>(v[i] >= 0 ? alpha : -alpha);
  return diff::mean(diff::abs(diff::sub(m_b.field, Tensor<T>(m_b.field.shape(), std::move(target)))));
}

template <typename T>
Tensor<T> KernelPriorTerms<T>::total() const {
  return diff::add(diff::add(m_b, m_s), m_shat);
}

template <typename T>
KernelPriorTerms<T> loss_kernel_prior(const Motion<T>& m_b, const Motion<T>& m_s, const Motion<T>& m_shat,
                                      const Motion<T>& m_b_detached, double alpha) {
  require_same_shape("loss_kernel_prior", m_shat.field, m_b_detached.field);
  return {loss_magnitude_prior(m_b, alpha), diff::mean(diff::abs(m_s.field)),
          diff::mean(diff::abs(diff::sub(m_shat.field, m_b_detached.field.detach())))};
}

template <typename T>
Tensor<T> loss_tv(const Motion<T>& m) {
  const auto& f = m.field;
  const std::size_t c = f.dim(0), h = f.dim(1), w = f.dim(2);
  Tensor<T> total = Tensor<T>::scalar(T(0));
  if (w > 1) {
    auto dx = diff::sub(diff::slice(f, 2, 1, w), diff::slice(f, 2, 0, w - 1));
    total = diff::add(total, diff::scale(diff::mean(diff::abs(dx)), static_cast<T>(c)));
  }
  if (h > 1) {
    auto dy = diff::sub(diff::slice(f, 1, 1, h), diff::slice(f, 1, 0, h - 1));
    total = diff::add(total, diff::scale(diff::mean(diff::abs(dy)), static_cast<T>(c)));
  }
  return total;
}

template <typename T>
Tensor<T> loss_sharp(const Motion<T>& m_shat, const Tensor<T>& target) {
  if (target.shape() != Shape{2}) throw std::invalid_argument("loss_sharp: target must be a 2-vector");
  auto tiled = diff::tile_channels(target.detach(), m_shat.height(), m_shat.width());
  return diff::mean(diff::abs(diff::sub(m_shat.field, tiled)));
}

template <typename T>
Tensor<T> sharp_motion_target(const std::vector<Motion<T>>& m_sharp) {
  if (m_sharp.empty()) throw std::invalid_argument("sharp_motion_target: no sharp images");
  std::vector<Tensor<T>> means;
  for (const auto& m : m_sharp) means.push_back(diff::spatial_mean(m.field.detach()));
  return average(means).detach();
}

template <typename T>
Tensor<T> loss_gan(const std::vector<Tensor<T>>& fake, const std::vector<Tensor<T>>& real, GanSide side) {
  if (fake.empty()) throw std::invalid_argument("loss_gan: no fake scores");
  std::vector<Tensor<T>> f;
  for (const auto& s : fake) f.push_back(diff::mean(diff::square(side == GanSide::Deblurrer ? diff::add_scalar(s, T(-1)) : s)));
  if (side == GanSide::Deblurrer) return average(f);
  if (real.empty()) throw std::invalid_argument("loss_gan: no real scores");
  std::vector<Tensor<T>> r;
  for (const auto& s : real) r.push_back(diff::mean(diff::square(diff::add_scalar(s, T(-1)))));
  return diff::add(average(f), average(r));
}

template <typename T>
Tensor<T> loss_content(const Tensor<T>& s_pair, const Tensor<T>& d_of_b_pair) {
  require_same_shape("loss_content", s_pair, d_of_b_pair);
  return diff::mean(diff::square(diff::sub(s_pair, d_of_b_pair)));
}

// ---- objectives ---------------------------------------------------------------

template <typename T>
void ensure_deblurred(UnpairedBatch<T>& batch, const nets::NetParams<T>& d) {
  if (batch.deblurred.size() == batch.blurry.size()) return;
  diff::NoGradGuard guard;
  batch.deblurred.clear();
  for (const auto& b : batch.blurry) batch.deblurred.push_back(nets::deblur_forward(d, b));
}

template <typename T>
Objective<T> objective_M_from_maps(const std::vector<Tensor<T>>& b, const std::vector<Tensor<T>>& s_hat,
                                   const std::vector<Motion<T>>& m_b, const std::vector<Motion<T>>& m_s,
                                   const std::vector<Motion<T>>& m_shat, const ObjectiveOptions& opt,
                                   const std::vector<Motion<T>>* m_b_reference) {
  if (b.empty() || b.size() != s_hat.size() || b.size() != m_b.size() || b.size() != m_shat.size())
    throw std::invalid_argument("objective_M: inconsistent batch sizes");
  if (m_b_reference && m_b_reference->size() != m_b.size())
    throw std::invalid_argument("objective_M: reference batch size mismatch");
  std::vector<Tensor<T>> reblur, mb, mshat, tv, ms;
  for (std::size_t i = 0; i < b.size(); ++i) {
    auto rel = blur::relative_motion(m_b[i], m_shat[i]);
    if (opt.switches.reblur_for_m) reblur.push_back(loss_reblur(b[i], s_hat[i], rel, opt.n_steps));
    mb.push_back(loss_magnitude_prior(m_b[i], opt.weights.alpha));
    const auto& ref = m_b_reference ? (*m_b_reference)[i] : m_b[i];
    mshat.push_back(diff::mean(diff::abs(diff::sub(m_shat[i].field, ref.field.detach()))));
    if (opt.switches.tv) tv.push_back(loss_tv(rel));
  }
  for (const auto& m : m_s) ms.push_back(diff::mean(diff::abs(m.field)));

  Objective<T> out;
  out.total = diff::add(average(mb), average(mshat));
  out.report.set("m_b", value_of(average(mb)));
  out.report.set("m_shat", value_of(average(mshat)));
  if (!ms.empty()) {
    auto t = average(ms);
    out.total = diff::add(out.total, t);
    out.report.set("m_s", value_of(t));
  }
  if (!reblur.empty()) {
    auto t = average(reblur);
    out.total = diff::add(out.total, weighted(t, opt.weights.lambda));
    out.report.set("reblur", value_of(t));
  }
  if (!tv.empty()) {
    auto t = average(tv);
    out.total = diff::add(out.total, t);
    out.report.set("tv_rel", value_of(t));
  }
  return out;
}

template <typename T>
MotionMaps<T> motion_maps(UnpairedBatch<T>& batch, const Networks<T>& nets) {
  ensure_deblurred(batch, *nets.d);
  const auto& m = *nets.m;
  MotionMaps<T> out;
  for (std::size_t i = 0; i < batch.blurry.size(); ++i) {
    out.m_b.push_back(nets::motion_forward(m, batch.blurry[i]));
    out.m_shat.push_back(nets::motion_forward(m, batch.deblurred[i]));
  }
  for (const auto& s : batch.sharp) out.m_s.push_back(nets::motion_forward(m, s));
  return out;
}

template <typename T>
Objective<T> objective_M(UnpairedBatch<T>& batch, const Networks<T>& nets, const ObjectiveOptions& opt) {
  auto maps = motion_maps(batch, nets);
  return objective_M_from_maps(batch.blurry, batch.deblurred, maps.m_b, maps.m_s, maps.m_shat, opt);
}

template <typename T>
Objective<T> objective_D(UnpairedBatch<T>& batch, const PairedBatch<T>* paired, const Networks<T>& nets,
                         const ObjectiveOptions& opt) {
  const auto& d = *nets.d;
  const auto m = nets.m->frozen();
  const auto& sw = opt.switches;
  const bool gan = sw.natural && opt.weights.beta > 0;
  const bool need_m_shat = sw.reblur_for_d || sw.sharp || sw.tv;
  const auto n = gan ? nets.n->frozen() : nets::NetParams<T>{};
  if (batch.blurry.empty()) throw std::invalid_argument("objective_D: empty unpaired batch");

  Tensor<T> target;
  if (sw.sharp) {
    diff::NoGradGuard guard;
    std::vector<Motion<T>> m_s;
    for (const auto& s : batch.sharp) m_s.push_back(nets::motion_forward(m, s));
    target = sharp_motion_target(m_s);
  }

  std::vector<Tensor<T>> reblur, sharp, tv, fake;
  for (const auto& b : batch.blurry) {
    auto s_hat = nets::deblur_forward(d, b);
    if (gan) fake.push_back(nets::discriminator_forward(n, s_hat));
    if (!need_m_shat) continue;
    auto m_shat = nets::motion_forward(m, s_hat);
    if (sw.reblur_for_d) {
      Motion<T> m_b;
      {
        diff::NoGradGuard guard;
        m_b = nets::motion_forward(m, b);
      }
      reblur.push_back(loss_reblur(b, s_hat, blur::relative_motion(m_b, m_shat), opt.n_steps));
    }
    if (sw.sharp) sharp.push_back(loss_sharp(m_shat, target));
    if (sw.tv) tv.push_back(loss_tv(m_shat));
  }

  Objective<T> out;
  out.total = Tensor<T>::scalar(T(0));
  auto add_term = [&](const char* name, const std::vector<Tensor<T>>& terms, double w) {
    if (terms.empty()) return;
    auto t = average(terms);
    out.total = diff::add(out.total, weighted(t, w));
    out.report.set(name, value_of(t));
  };
  add_term("reblur", reblur, opt.weights.lambda);
  add_term("sharp", sharp, 1.0);
  if (gan) add_term("natural_d", {loss_gan<T>(fake, {}, GanSide::Deblurrer)}, opt.weights.beta);
  add_term("tv_shat", tv, 1.0);
  if (paired && !paired->blurry.empty()) {
    if (paired->blurry.size() != paired->sharp.size())
      throw std::invalid_argument("objective_D: paired batch is not paired");
    std::vector<Tensor<T>> content;
    for (std::size_t i = 0; i < paired->blurry.size(); ++i)
      content.push_back(loss_content(paired->sharp[i], nets::deblur_forward(d, paired->blurry[i])));
    add_term("content", content, opt.weights.lambda);
  }
  return out;
}

template <typename T>
Objective<T> objective_N(UnpairedBatch<T>& batch, const Networks<T>& nets, const ObjectiveOptions& opt) {
  if (!opt.switches.real_includes_blurry)
    throw std::invalid_argument(
        "objective_N: the real set must include blurry images; a sharp-only real set is not supported");
  ensure_deblurred(batch, *nets.d);
  const auto& n = *nets.n;
  std::vector<Tensor<T>> fake, real;
  for (const auto& s_hat : batch.deblurred) fake.push_back(nets::discriminator_forward(n, s_hat));
  for (const auto& b : batch.blurry) real.push_back(nets::discriminator_forward(n, b));
  for (const auto& s : batch.sharp) real.push_back(nets::discriminator_forward(n, s));
  Objective<T> out;
  out.total = loss_gan(fake, real, GanSide::Discriminator);
  out.report.set("natural_n", value_of(out.total));
  return out;
}

#define NEURMAP_INSTANTIATE_LOSSES(T)                                                                      \
  template Tensor<T> loss_reblur(const Tensor<T>&, const Tensor<T>&, const Motion<T>&, int);               \
  template Tensor<T> loss_magnitude_prior(const Motion<T>&, double);                                       \
  template struct KernelPriorTerms<T>;                                                                     \
  template KernelPriorTerms<T> loss_kernel_prior(const Motion<T>&, const Motion<T>&, const Motion<T>&,     \
                                                 const Motion<T>&, double);                                \
  template Tensor<T> loss_tv(const Motion<T>&);                                                            \
  template Tensor<T> loss_sharp(const Motion<T>&, const Tensor<T>&);                                       \
  template Tensor<T> sharp_motion_target(const std::vector<Motion<T>>&);                                   \
  template Tensor<T> loss_gan(const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&, GanSide);      \
  template Tensor<T> loss_content(const Tensor<T>&, const Tensor<T>&);                                     \
  template void ensure_deblurred(UnpairedBatch<T>&, const nets::NetParams<T>&);                           \
  template Objective<T> objective_M_from_maps(                                                             \
      const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&, const std::vector<Motion<T>>&,         \
      const std::vector<Motion<T>>&, const std::vector<Motion<T>>&, const ObjectiveOptions&,               \
      const std::vector<Motion<T>>*);                                                                      \
  template MotionMaps<T> motion_maps(UnpairedBatch<T>&, const Networks<T>&);                               \
  template Objective<T> objective_M(UnpairedBatch<T>&, const Networks<T>&, const ObjectiveOptions&);       \
  template Objective<T> objective_D(UnpairedBatch<T>&, const PairedBatch<T>*, const Networks<T>&,          \
                                    const ObjectiveOptions&);                                              \
  template Objective<T> objective_N(UnpairedBatch<T>&, const Networks<T>&, const ObjectiveOptions&);

NEURMAP_INSTANTIATE_LOSSES(float)
NEURMAP_INSTANTIATE_LOSSES(double)

}  // namespace neurmap::loss
