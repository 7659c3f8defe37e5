#include "scotopic/spiking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scotopic/rng.hpp"

namespace scotopic {

int emit_spikes(double& residual, double tau_dis) {
  if (!(tau_dis > 0.0)) throw std::invalid_argument("emit_spikes: tau_dis must be positive");
  int n = 0;
  while (residual > tau_dis) {
    residual -= tau_dis;
    ++n;
  }
  while (residual < -tau_dis) {
    residual += tau_dis;
    --n;
  }
  return n;
}

// ---- MembraneLayer ------------------------------------------------------

MembraneLayer::MembraneLayer(const AdaptedNetwork& net) : net_(&net) { reset(); }

void MembraneLayer::reset() {
  coupling_ = net_->prior_coupling();
  v_ = Tensor(net_->core.shape_after(1));
  last_t_ = 0.0;
  beta_prev_ = net_->beta(0.0);
  const size_t n_feat = coupling_.size();
  for (size_t i = 0; i < v_.size(); ++i) v_.v[i] = beta_prev_[i % n_feat];
}

void MembraneLayer::membrane_step(const std::vector<double>& frame_counts, int t,
                                  PowerMeter* meter) {
  if (std::abs(static_cast<double>(t) - (last_t_ + 1.0)) > 1e-9)
    throw std::invalid_argument("membrane_step: non-consecutive bin index");
  advance(frame_counts, static_cast<double>(t), meter);
}

void MembraneLayer::advance(const std::vector<double>& delta, double t, PowerMeter* meter) {
  if (!(t > last_t_)) throw std::invalid_argument("membrane: time must advance");
  const AdaptedNetwork& net = *net_;
  const double a_now = net.alpha(t);
  const double r = a_now / net.alpha(last_t_);
  const size_t n_feat = coupling_.size();
  size_t mults = 0;

  for (double& x : v_.v) x *= r;
  mults += v_.size();

  // l(t) = beta(t) - r beta(t-1), one value per feature map
  const double g = net.gamma(t);
  std::vector<double> beta_now(n_feat), leak(n_feat);
  const Layer* first = net.core.layers.front().get();
  const Tensor& bias = first->kind() == LayerKind::Dense
                           ? static_cast<const Dense*>(first)->b
                           : static_cast<const Conv2D*>(first)->b;
  for (size_t j = 0; j < n_feat; ++j) {
    beta_now[j] = g * coupling_[j] + bias[j];
    leak[j] = beta_now[j] - r * beta_prev_[j];
  }
  mults += 2 * n_feat;
  for (size_t i = 0; i < v_.size(); ++i) v_.v[i] += leak[i % n_feat];

  // alpha(t) W X for the new counts, charged per nonzero input only
  if (first->kind() == LayerKind::Dense) {
    const auto* d = static_cast<const Dense*>(first);
    if (static_cast<int>(delta.size()) != d->in_dim)
      throw std::invalid_argument("membrane: frame size mismatch");
    for (size_t i = 0; i < delta.size(); ++i) {
      if (delta[i] == 0.0) continue;
      const double x = a_now * delta[i] / net.count_scale;
      ++mults;
      for (int o = 0; o < d->out_dim; ++o)
        v_.v[o] += d->W.v[static_cast<size_t>(o) * d->in_dim + i] * x;
      mults += static_cast<size_t>(d->out_dim);
    }
  } else {
    const auto* cv = static_cast<const Conv2D*>(first);
    const int iw = net.core.input_shape[1];
    const int ih = net.core.input_shape[0];
    const int ic = cv->in_c;
    const int oh = ih - cv->k + 1, ow = iw - cv->k + 1;
    if (delta.size() != static_cast<size_t>(ih) * iw * ic)
      throw std::invalid_argument("membrane: frame size mismatch");
    const int taps = cv->k * cv->k * ic;
    for (size_t i = 0; i < delta.size(); ++i) {
      if (delta[i] == 0.0) continue;
      const int c = static_cast<int>(i % ic);
      const int x = static_cast<int>((i / ic) % iw);
      const int y = static_cast<int>(i / (static_cast<size_t>(iw) * ic));
      const double xval = a_now * delta[i] / net.count_scale;
      ++mults;
      const int oy0 = std::max(0, y - cv->k + 1), oy1 = std::min(oh - 1, y);
      const int ox0 = std::max(0, x - cv->k + 1), ox1 = std::min(ow - 1, x);
      for (int oy = oy0; oy <= oy1; ++oy) {
        for (int ox = ox0; ox <= ox1; ++ox) {
          const int ky = y - oy, kx = x - ox;
          double* dst = &v_.v[(static_cast<size_t>(oy) * ow + ox) * cv->out_c];
          const size_t wbase = (static_cast<size_t>(ky) * cv->k + kx) * ic + c;
          for (int o = 0; o < cv->out_c; ++o)
            dst[o] += cv->W.v[static_cast<size_t>(o) * taps + wbase] * xval;
          mults += static_cast<size_t>(cv->out_c);
        }
      }
    }
  }
  beta_prev_ = std::move(beta_now);
  last_t_ = t;
  if (meter) meter->spiking_mults += mults;
}

// ---- SpikeBus -------------------------------------------------------------

SpikeBus::SpikeBus(std::vector<double> initial_values, double tau_dis)
    : tau_(tau_dis), base_(std::move(initial_values)),
      value_(base_), cum_(base_.size(), 0) {
  if (!(tau_dis > 0.0)) throw std::invalid_argument("spike bus: tau_dis must be positive");
}

int SpikeBus::update(size_t j, double a) {
  value_[j] = a;
  double res = a - reconstructed(j);
  const int s = emit_spikes(res, tau_);
  cum_[j] += s;
  total_ += static_cast<size_t>(std::abs(s));
  return s;
}

// ---- event-driven runtime ---------------------------------------------------

namespace {

struct Stage {
  const Layer* weight = nullptr;
  const Layer* relu = nullptr;
  const Layer* pool = nullptr;
  std::vector<int> in_shape;   // shape feeding the weight layer
  std::vector<int> z_shape;    // weight layer output
  std::vector<int> out_shape;  // after the chain
};

std::vector<Stage> segment(const Network& net) {
  std::vector<Stage> stages;
  std::vector<int> shape = net.input_shape;
  for (const auto& l : net.layers) {
    const LayerKind k = l->kind();
    if (k == LayerKind::Dense || k == LayerKind::Conv2D) {
      Stage s;
      s.weight = l.get();
      s.in_shape = shape;
      s.z_shape = l->out_shape(shape);
      s.out_shape = s.z_shape;
      shape = s.z_shape;
      stages.push_back(s);
    } else if (k == LayerKind::ReLU) {
      if (stages.empty() || stages.back().relu)
        throw std::invalid_argument("spiking: unsupported layer arrangement");
      stages.back().relu = l.get();
    } else if (k == LayerKind::MaxPool2) {
      if (stages.empty() || !stages.back().relu || stages.back().pool)
        throw std::invalid_argument("spiking: unsupported layer arrangement");
      stages.back().pool = l.get();
      stages.back().out_shape = l->out_shape(stages.back().z_shape);
      shape = stages.back().out_shape;
    }
  }
  return stages;
}

// Mutable per-stage state for one run. Stage i >= 1 maintains z_i (exact
// given the reconstructed inputs), its view of the previous stage's chain
// (relu/pool of reconstructed pre-activations), and the dirty bookkeeping.
struct StageState {
  Tensor z;
  // chain of the PREVIOUS stage, evaluated on its reconstructed outputs
  Tensor in_vals;      // previous reconstructed z (no-nonlinearity case)
  Tensor relu_vals;    // shape of previous z
  Tensor pooled_vals;  // previous out_shape (when pooled)
  std::vector<size_t> dirty;       // z units to re-check for emission
  std::vector<uint8_t> dirty_mask;
  bool all_dirty = false;
};

void mark_dirty(StageState& st, size_t j) {
  if (st.all_dirty || st.dirty_mask[j]) return;
  st.dirty_mask[j] = 1;
  st.dirty.push_back(j);
}

// Scatter one input-unit delta through a weight layer into z, marking dirty
// outputs and charging the multiplications.
void apply_input_delta(const Stage& stage, StageState& st, size_t u, double delta,
                       size_t& mults) {
  if (stage.weight->kind() == LayerKind::Dense) {
    const auto* d = static_cast<const Dense*>(stage.weight);
    for (int o = 0; o < d->out_dim; ++o)
      st.z.v[o] += d->W.v[static_cast<size_t>(o) * d->in_dim + u] * delta;
    mults += static_cast<size_t>(d->out_dim);
    st.all_dirty = true;
  } else {
    const auto* cv = static_cast<const Conv2D*>(stage.weight);
    const int iw = stage.in_shape[1], ih = stage.in_shape[0], ic = cv->in_c;
    const int oh = ih - cv->k + 1, ow = iw - cv->k + 1;
    const int c = static_cast<int>(u % ic);
    const int x = static_cast<int>((u / ic) % iw);
    const int y = static_cast<int>(u / (static_cast<size_t>(iw) * ic));
    const int taps = cv->k * cv->k * ic;
    const int oy0 = std::max(0, y - cv->k + 1), oy1 = std::min(oh - 1, y);
    const int ox0 = std::max(0, x - cv->k + 1), ox1 = std::min(ow - 1, x);
    for (int oy = oy0; oy <= oy1; ++oy) {
      for (int ox = ox0; ox <= ox1; ++ox) {
        const int ky = y - oy, kx = x - ox;
        const size_t zbase = (static_cast<size_t>(oy) * ow + ox) * cv->out_c;
        const size_t wbase = (static_cast<size_t>(ky) * cv->k + kx) * ic + c;
        for (int o = 0; o < cv->out_c; ++o) {
          st.z.v[zbase + o] += cv->W.v[static_cast<size_t>(o) * taps + wbase] * delta;
          mark_dirty(st, zbase + o);
        }
        mults += static_cast<size_t>(cv->out_c);
      }
    }
  }
}

struct RunContext {
  std::vector<Stage> stages;
  std::vector<StageState> states;   // index i >= 1
  std::vector<SpikeBus> buses;      // bus i quantizes stage i's z (i < last)
  MembraneLayer membrane;
  const AdaptedNetwork* net;
  double tau;
};

// One-time setup: evaluate the t = 0 network state (input-independent, so a
// deployment would bake it in); charged as a single dense pass.
RunContext make_context(const AdaptedNetwork& net, double tau_dis, PowerMeter* meter) {
  RunContext ctx{segment(net.core), {}, {}, MembraneLayer(net), &net, tau_dis};
  const size_t S = ctx.stages.size();
  if (S < 2) throw std::invalid_argument("spiking: need at least two weight layers");
  ctx.states.resize(S);

  Tensor cur = ctx.membrane.potentials();  // V(0) = beta(0)
  for (size_t i = 0; i + 1 < S; ++i) {
    ctx.buses.emplace_back(cur.v, tau_dis);
    // stage i+1's view of stage i's chain; reconstructed == exact at t = 0
    const Stage& prev = ctx.stages[i];
    StageState& st = ctx.states[i + 1];
    Tensor a = cur;
    if (prev.relu) {
      for (double& x : a.v) x = x > 0.0 ? x : 0.0;
      st.relu_vals = a;
    } else {
      st.in_vals = a;
    }
    if (prev.pool) {
      Tensor pooled;
      prev.pool->forward(a, pooled);
      st.pooled_vals = pooled;
      a = std::move(pooled);
    }
    ctx.stages[i + 1].weight->forward(a, st.z);
    st.dirty_mask.assign(st.z.size(), 0);
    cur = st.z;
  }
  if (meter) meter->spiking_mults += net.core.dense_mults();
  return ctx;
}

// Propagate this step's spikes from stage i's bus into stage i+1, then emit
// from stage i+1 (unless it is the output stage, whose z is read directly).
void propagate(RunContext& ctx, size_t i, const std::vector<size_t>& spiked,
               std::vector<size_t>& spiked_next, PowerMeter* meter) {
  const Stage& prev = ctx.stages[i];
  const Stage& next = ctx.stages[i + 1];
  StageState& st = ctx.states[i + 1];
  SpikeBus& bus = ctx.buses[i];
  size_t mults = 0;

  if (!prev.pool) {
    for (size_t j : spiked) {
      const double rec = bus.reconstructed(j);
      double delta;
      if (prev.relu) {
        const double r = rec > 0.0 ? rec : 0.0;
        delta = r - st.relu_vals.v[j];
        st.relu_vals.v[j] = r;
      } else {
        delta = rec - st.in_vals.v[j];
        st.in_vals.v[j] = rec;
      }
      if (delta == 0.0) continue;
      apply_input_delta(next, st, j, delta, mults);
    }
  } else {
    // relu + 2x2 pool: refresh relu values, then re-max affected windows
    const int zw = prev.z_shape[1], zc = prev.z_shape[2];
    const int pw = prev.out_shape[1], pc = prev.out_shape[2];
    std::vector<size_t> windows;
    for (size_t j : spiked) {
      const double rec = bus.reconstructed(j);
      const double r = rec > 0.0 ? rec : 0.0;
      if (r == st.relu_vals.v[j]) continue;
      st.relu_vals.v[j] = r;
      const int c = static_cast<int>(j % zc);
      const int x = static_cast<int>((j / zc) % zw);
      const int y = static_cast<int>(j / (static_cast<size_t>(zw) * zc));
      windows.push_back((static_cast<size_t>(y / 2) * pw + x / 2) * pc + c);
    }
    std::sort(windows.begin(), windows.end());
    windows.erase(std::unique(windows.begin(), windows.end()), windows.end());
    for (size_t w : windows) {
      const int c = static_cast<int>(w % pc);
      const int px = static_cast<int>((w / pc) % pw);
      const int py = static_cast<int>(w / (static_cast<size_t>(pw) * pc));
      double m = -1e300;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx)
          m = std::max(m, st.relu_vals.v[(static_cast<size_t>(py * 2 + dy) * zw +
                                          (px * 2 + dx)) * zc + c]);
      const double delta = m - st.pooled_vals.v[w];
      if (delta == 0.0) continue;
      st.pooled_vals.v[w] = m;
      apply_input_delta(next, st, w, delta, mults);
    }
  }

  spiked_next.clear();
  const bool target_is_output = i + 2 == ctx.stages.size();
  if (!target_is_output) {
    SpikeBus& out_bus = ctx.buses[i + 1];
    if (st.all_dirty) {
      for (size_t j = 0; j < st.z.size(); ++j)
        if (out_bus.update(j, st.z.v[j]) != 0) spiked_next.push_back(j);
      st.all_dirty = false;
      std::fill(st.dirty_mask.begin(), st.dirty_mask.end(), 0);
      st.dirty.clear();
    } else {
      for (size_t j : st.dirty) {
        st.dirty_mask[j] = 0;
        if (out_bus.update(j, st.z.v[j]) != 0) spiked_next.push_back(j);
      }
      st.dirty.clear();
    }
  } else {
    st.all_dirty = false;
    for (size_t j : st.dirty) st.dirty_mask[j] = 0;
    st.dirty.clear();
  }
  if (meter) meter->spiking_mults += mults;
}

}  // namespace

SpikingResult run_stream_spiking(const PhotonStream& stream, const AdaptedNetwork& net,
                                 const ThresholdSchedule& schedule,
                                 const std::vector<double>& query_ppps, double max_ppp,
                                 double tau_dis) {
  if (!(tau_dis > 0.0)) throw std::invalid_argument("spiking: tau_dis must be positive");
  schedule.validate();
  SpikingResult result;
  result.trace.regime = Regime::FreeResponse;
  result.trace.true_class = stream.label();

  RunContext ctx = make_context(net, tau_dis, &result.power);
  const size_t S = ctx.stages.size();
  const std::vector<int> bins = snap_query_bins(stream, query_ppps, max_ppp);

  PhotonStream::Cursor cur(stream);
  std::vector<double> prev_counts(stream.pixel_count(), 0.0);
  std::vector<double> delta(stream.pixel_count(), 0.0);
  std::vector<size_t> spiked, spiked_next;

  for (size_t qi = 0; qi < bins.size(); ++qi) {
    cur.advance_to(bins[qi]);
    const std::vector<double>& cum = cur.raw_counts();
    for (size_t i = 0; i < cum.size(); ++i) delta[i] = cum[i] - prev_counts[i];
    prev_counts = cum;
    const double ppp = ppp_of_bins(bins[qi], stream.config());

    ctx.membrane.advance(delta, ppp, &result.power);

    // stage 0 emission: damping moves every unit, so scan them all
    spiked.clear();
    const Tensor& v = ctx.membrane.potentials();
    for (size_t j = 0; j < v.size(); ++j)
      if (ctx.buses[0].update(j, v.v[j]) != 0) spiked.push_back(j);

    for (size_t i = 0; i + 1 < S; ++i) {
      propagate(ctx, i, spiked, spiked_next, &result.power);
      std::swap(spiked, spiked_next);
    }

    const Tensor& logits = ctx.states[S - 1].z;
    const ClassPosterior post = posterior_from_logits(logits.v);
    result.trace.query_ppps.push_back(ppp);
    result.trace.log_ratio_trajectory.push_back(post.log_ratios);
    const int cstar = post.argmax();
    const bool last = qi + 1 == bins.size();
    if (post.log_ratios[cstar] > schedule.at(ppp)) {
      result.trace.stop_ppp = ppp;
      result.trace.declared_class = cstar;
      result.trace.stopped_by = StopReason::ThresholdCrossing;
      break;
    }
    if (last) {
      result.trace.stop_ppp = ppp;
      result.trace.declared_class = cstar;
      result.trace.stopped_by = StopReason::Cutoff;
    }
  }
  for (const SpikeBus& b : ctx.buses) result.power.spikes_total += b.total_spikes();
  return result;
}

SpikingResult continuous_baseline(const PhotonStream& stream, const AdaptedNetwork& net,
                                  const ThresholdSchedule& schedule,
                                  const std::vector<double>& query_ppps, double max_ppp) {
  schedule.validate();
  SpikingResult result;
  result.trace.regime = Regime::FreeResponse;
  result.trace.true_class = stream.label();
  const std::vector<int> bins = snap_query_bins(stream, query_ppps, max_ppp);
  const size_t per_pass = net.core.dense_mults();

  PhotonStream::Cursor cur(stream);
  for (size_t qi = 0; qi < bins.size(); ++qi) {
    cur.advance_to(bins[qi]);
    const CountImage counts = cur.counts();
    const ClassPosterior post = net.forward_adapted_at(counts, counts.ppp);
    result.power.baseline_mults += per_pass;
    result.trace.query_ppps.push_back(counts.ppp);
    result.trace.log_ratio_trajectory.push_back(post.log_ratios);
    const int cstar = post.argmax();
    const bool last = qi + 1 == bins.size();
    if (post.log_ratios[cstar] > schedule.at(counts.ppp)) {
      result.trace.stop_ppp = counts.ppp;
      result.trace.declared_class = cstar;
      result.trace.stopped_by = StopReason::ThresholdCrossing;
      break;
    }
    if (last) {
      result.trace.stop_ppp = counts.ppp;
      result.trace.declared_class = cstar;
      result.trace.stopped_by = StopReason::Cutoff;
    }
  }
  return result;
}

}  // namespace scotopic
