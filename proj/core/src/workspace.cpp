#include "unibound/workspace.hpp"

#include <algorithm>
#include <cmath>

namespace unibound {

namespace {
constexpr std::int32_t kUnresolved = -2;
constexpr double kNegativeSlack = -1e-9;
}  // namespace

Workspace::Workspace(const ModelSpec& spec) : spec_(spec) {
  n_ = spec.dim();
  m_ = spec.classes.size();
  cls_a_.resize(m_);
  cls_b_.resize(m_);
  cls_change_.resize(m_ * n_);
  for (std::size_t j = 0; j < m_; ++j) {
    cls_a_[j] = spec.classes[j].time_factor.a;
    cls_b_[j] = spec.classes[j].time_factor.b;
    for (std::size_t k = 0; k < n_; ++k) {
      cls_change_[j * n_ + k] = spec.classes[j].change[k];
    }
  }
  q_.resize(m_);
  integ_.resize(m_);
  support_max_.assign(n_, 0);
}

std::int32_t Workspace::intern(const StateVec& x) {
  auto it = index_.find(x);
  if (it != index_.end()) return it->second;

  const auto slot = static_cast<std::int32_t>(states_.size());
  index_.emplace(x, slot);
  states_.push_back(x);

  edge_off_.push_back(static_cast<std::uint32_t>(edge_r_.size()));
  std::uint16_t cnt = 0;
  double na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < m_; ++j) {
    const TransitionClass& c = spec_.classes[j];
    if (!c.enabled(x)) continue;
    const double r = c.state_factor(x);
    if (!(r > 0.0)) continue;
    edge_j_.push_back(static_cast<std::uint16_t>(j));
    edge_r_.push_back(r);
    edge_succ_.push_back(kUnresolved);
    ++cnt;
    na += r * cls_a_[j];
    nb += r * cls_b_[j];
  }
  edge_cnt_.push_back(cnt);
  na_.push_back(na);
  nb_.push_back(nb);

  p_.push_back(0.0);
  a_.push_back(0.0);
  b_.push_back(0.0);
  acc_.push_back(0.0);
  u0_.push_back(0.0);
  u0_epoch_.push_back(0);
  touch_epoch_.push_back(0);
  next_stamp_.push_back(0);
  return slot;
}

std::int32_t Workspace::resolve_edge(std::int32_t slot, std::size_t e) {
  const std::size_t j = edge_j_[e];
  StateVec y = states_[static_cast<std::size_t>(slot)];  // copy: intern may grow states_
  for (std::size_t k = 0; k < n_; ++k) y[k] += cls_change_[j * n_ + k];
  const std::int32_t tgt = intern(y);
  edge_succ_[e] = tgt;  // index again: intern may have reallocated the array
  return tgt;
}

void Workspace::touch(std::int32_t slot, const StateVec* envelope) {
  const auto s = static_cast<std::size_t>(slot);
  if (touch_epoch_[s] == epoch_) return;
  touch_epoch_[s] = epoch_;
  touched_.push_back(slot);
  if (envelope != nullptr) {
    const StateVec& x = states_[s];
    for (std::size_t k = 0; k < n_; ++k) {
      if (x[k] > (*envelope)[k]) throw WindowExceeded{x, k};
    }
  }
}

double Workspace::window_u0(std::int32_t slot, double t0, double t1, double lam0,
                            double lam1) {
  const auto s = static_cast<std::size_t>(slot);
  if (u0_epoch_[s] == epoch_) return u0_[s];
  u0_epoch_[s] = epoch_;
  // The enabled-class exit rate na + nb·t shares Λ as denominator, so the
  // worst ratio over the window sits at an endpoint (single affine ratio).
  const double worst =
      std::max((na_[s] + nb_[s] * t0) / lam0, (na_[s] + nb_[s] * t1) / lam1);
  double u0 = 1.0 - worst;
  if (u0 < kNegativeSlack) {
    throw WindowExceeded{states_[s], static_cast<std::size_t>(-1)};
  }
  if (u0 < 0.0) u0 = 0.0;
  u0_[s] = u0;
  return u0;
}

void Workspace::load(const SparseDistribution& p0) {
  for (std::int32_t slot : live_) p_[static_cast<std::size_t>(slot)] = 0.0;
  live_.clear();
  support_max_.assign(n_, 0);
  NeumaierSumT<long double> total;
  for (const auto& [x, prob] : p0.entries()) {
    if (prob <= 0.0) continue;
    const std::int32_t slot = intern(x);
    p_[static_cast<std::size_t>(slot)] = prob;
    live_.push_back(slot);
    total.add(prob);
    for (std::size_t k = 0; k < n_; ++k) support_max_[k] = std::max(support_max_[k], x[k]);
  }
  mass_ = total.value();
}

void Workspace::rollback() {
  for (std::int32_t slot : touched_) {
    const auto s = static_cast<std::size_t>(slot);
    a_[s] = 0.0;
    b_[s] = 0.0;
    acc_[s] = 0.0;
  }
  touched_.clear();
  cur_.clear();
  nxt_.clear();
}

Workspace::WindowStats Workspace::execute_window(const StepPlan& plan,
                                                 const WindowControls& ctl) {
  const double t0 = plan.t_start;
  const double t1 = plan.t_start + plan.delta;
  const double lam0 = plan.lambda(t0);
  const double lam1 = plan.lambda(t1);
  if (!(lam0 > 0.0) || !(lam1 > 0.0)) {
    throw Error("workspace: window executed with a vanishing uniformization rate");
  }
  const int R = plan.truncation.R;
  const std::vector<double>& w = plan.truncation.weights;
  const bool exact1 = ctl.exact_one_jump;
  const double delta_threshold = ctl.delta_threshold;
  const double t_mid = t0 + 0.5 * plan.delta;
  const double emu = std::exp(-plan.mu);

  for (std::size_t j = 0; j < m_; ++j) {
    const double l0 = cls_a_[j] + cls_b_[j] * t0;
    const double l1 = cls_a_[j] + cls_b_[j] * t1;
    q_[j] = std::min(l0 / lam0, l1 / lam1);
    integ_[j] = plan.delta * (cls_a_[j] + cls_b_[j] * t_mid);
  }
  tails_.assign(static_cast<std::size_t>(R) + 2, 0.0);
  {
    long double t = 0.0L;
    for (int i = R; i >= 0; --i) {
      t += w[static_cast<std::size_t>(i)];
      tails_[static_cast<std::size_t>(i)] = static_cast<double>(t);
    }
  }

  ++epoch_;
  ++stamp_;
  const long double in_mass = mass_;
  NeumaierSumT<long double> chain_prune;
  const int accum_from = exact1 ? 2 : 1;
  const bool need_chain = R >= accum_from;

  try {
    // --- Fused pass over the current support: the i=0 term, the exact
    // one-jump term, and the s=1 chain scatter share one traversal of the
    // packed enabled edges.
    nxt_.clear();
    for (std::int32_t slot : live_) {
      touch(slot, ctl.envelope);
      const auto s = static_cast<std::size_t>(slot);
      const double p = p_[s];
      acc_[s] += w[0] * p;
      if (!exact1 && !need_chain) continue;

      if (need_chain) {
        const double u0 = window_u0(slot, t0, t1, lam0, lam1);
        if (u0 > 0.0) {
          if (next_stamp_[s] != stamp_) {
            next_stamp_[s] = stamp_;
            nxt_.push_back(slot);
          }
          b_[s] += p * u0;
        }
      }
      double stay = plan.mu;
      const std::size_t e_begin = edge_off_[s];
      const std::size_t e_end = e_begin + edge_cnt_[s];
      for (std::size_t e = e_begin; e < e_end; ++e) {
        std::int32_t tgt = edge_succ_[e];
        if (tgt == kUnresolved) tgt = resolve_edge(slot, e);
        touch(tgt, ctl.envelope);
        const auto tg = static_cast<std::size_t>(tgt);
        const double r = edge_r_[e];
        const std::size_t j = edge_j_[e];
        if (exact1) {
          const double rI = r * integ_[j];
          stay -= rI;
          acc_[tg] += emu * p * rI;
        }
        if (need_chain) {
          const double val = p * q_[j] * r;
          if (val != 0.0) {
            if (next_stamp_[tg] != stamp_) {
              next_stamp_[tg] = stamp_;
              nxt_.push_back(tgt);
            }
            b_[tg] += val;
          }
        }
      }
      if (exact1) {
        if (stay < kNegativeSlack * std::max(1.0, plan.mu)) {
          throw WindowExceeded{states_[s], static_cast<std::size_t>(-1)};
        }
        acc_[s] += emu * p * std::max(stay, 0.0);
      }
    }

    // --- Min-bound chain: v^s for s = 1..R, accumulated from s ≥ accum_from.
    // The fused pass produced v^1 in b_/nxt_; each iteration prunes the
    // freshly scattered vector, mixes it into the accumulator, and propagates
    // it one more jump. An entry bv of v^s can still contribute at most
    // bv·(Σ_{k≥s} w_k) to the output (term 1 is exact when the one-jump term
    // is on, so its chain vector only feeds terms 2..R), so the threshold
    // compares that weighted contribution against δ: the charged loss per
    // pruned entry stays below δ while far-tail steps collapse to the few
    // states that matter.
    for (int s = 1; need_chain && s <= R; ++s) {
      const std::size_t tail_at = (exact1 && s == 1)
                                      ? std::min<std::size_t>(2, static_cast<std::size_t>(R) + 1)
                                      : static_cast<std::size_t>(s);
      const double tail_w = tails_[tail_at];
      long double pruned = 0.0L;
      scratch_.clear();
      const double ws = w[static_cast<std::size_t>(s)];
      const bool accumulate_term = s >= accum_from;
      for (std::int32_t slot : nxt_) {
        const auto t = static_cast<std::size_t>(slot);
        const double bv = b_[t];
        b_[t] = 0.0;
        if (bv == 0.0) continue;
        if (bv * tail_w < delta_threshold) {
          pruned += bv;
          continue;
        }
        if (accumulate_term) acc_[t] += ws * bv;
        a_[t] = bv;
        scratch_.push_back(slot);
      }
      cur_.swap(scratch_);
      chain_prune.add(pruned * static_cast<long double>(tail_w));
      if (s == R) {
        for (std::int32_t slot : cur_) a_[static_cast<std::size_t>(slot)] = 0.0;
        cur_.clear();
        break;
      }

      ++stamp_;
      nxt_.clear();
      for (std::int32_t slot : cur_) {
        const auto src = static_cast<std::size_t>(slot);
        const double av = a_[src];
        a_[src] = 0.0;
        if (av == 0.0) continue;
        const double u0 = window_u0(slot, t0, t1, lam0, lam1);
        if (u0 > 0.0) {
          if (next_stamp_[src] != stamp_) {
            next_stamp_[src] = stamp_;
            nxt_.push_back(slot);
          }
          b_[src] += av * u0;
        }
        const std::size_t e_begin = edge_off_[src];
        const std::size_t e_end = e_begin + edge_cnt_[src];
        for (std::size_t e = e_begin; e < e_end; ++e) {
          std::int32_t tgt = edge_succ_[e];
          if (tgt == kUnresolved) tgt = resolve_edge(slot, e);
          const double val = av * q_[edge_j_[e]] * edge_r_[e];
          if (val == 0.0) continue;
          const auto tg = static_cast<std::size_t>(tgt);
          touch(tgt, ctl.envelope);
          if (next_stamp_[tg] != stamp_) {
            next_stamp_[tg] = stamp_;
            nxt_.push_back(tgt);
          }
          b_[tg] += val;
        }
      }
      cur_.clear();
    }

    // --- Commit: store-prune, mass balance, loss attribution.
    NeumaierSumT<long double> store_prune;
    NeumaierSumT<long double> out_mass;
    for (std::int32_t slot : touched_) {
      const double val = acc_[static_cast<std::size_t>(slot)];
      if (val > 0.0 && val < delta_threshold) {
        store_prune.add(val);
      } else {
        out_mass.add(val);
      }
    }
    const long double prune_total = chain_prune.value() + store_prune.value();
    if (ctl.prune_budget >= 0.0 &&
        static_cast<double>(prune_total) > ctl.prune_budget) {
      const double loss = static_cast<double>(prune_total);
      rollback();
      throw PruneBudgetExceeded{loss};
    }

    WindowStats stats;
    stats.window_size = touched_.size();
    stats.prune_loss = static_cast<double>(prune_total);
    double captured = plan.truncation.captured_mass;
    if (exact1 && R == 0) captured = std::min(1.0, captured + emu * plan.mu);
    stats.poisson_loss =
        static_cast<double>(in_mass * static_cast<long double>(std::max(0.0, 1.0 - captured)));
    stats.bounding_loss = static_cast<double>(
        in_mass - out_mass.value() - static_cast<long double>(stats.poisson_loss) -
        prune_total);

    live_.clear();
    std::fill(support_max_.begin(), support_max_.end(), 0);
    for (std::int32_t slot : touched_) {
      const auto s = static_cast<std::size_t>(slot);
      const double val = acc_[s];
      acc_[s] = 0.0;
      if (val >= delta_threshold && val > 0.0) {
        p_[s] = val;
        live_.push_back(slot);
        const StateVec& x = states_[s];
        for (std::size_t k = 0; k < n_; ++k) {
          if (x[k] > support_max_[k]) support_max_[k] = x[k];
        }
      } else {
        p_[s] = 0.0;
      }
    }
    touched_.clear();
    mass_ = out_mass.value();
    return stats;
  } catch (const WindowExceeded&) {
    rollback();
    throw;
  }
}

SparseDistribution Workspace::snapshot() const {
  SparseDistribution out;
  for (std::int32_t slot : live_) {
    out.add(states_[static_cast<std::size_t>(slot)], p_[static_cast<std::size_t>(slot)]);
  }
  return out;
}

}  // namespace unibound
