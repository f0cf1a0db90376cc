// SPDX-License-Identifier: Apache-2.0
#include "mfakf/cgra/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include "mfakf/error.hpp"

namespace mfakf::cgra {

namespace {

using std::int32_t;

struct PatternSet {
  bool dot4 = false, mac2 = false, sum4 = false, axpy4 = false, refl4 = false;
  int dot4_idx = -1, mac2_idx = -1, sum4_idx = -1, axpy4_idx = -1, refl4_idx = -1;
};

PatternSet classify(const std::vector<MacroOpPattern>& patterns) {
  PatternSet ps;
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    const int idx = static_cast<int>(i);
    switch (patterns[i].kind) {
      case PatternKind::Dot4: ps.dot4 = true; ps.dot4_idx = idx; break;
      case PatternKind::Mac2: ps.mac2 = true; ps.mac2_idx = idx; break;
      case PatternKind::Sum4: ps.sum4 = true; ps.sum4_idx = idx; break;
      case PatternKind::Axpy4: ps.axpy4 = true; ps.axpy4_idx = idx; break;
      case PatternKind::ReflectorApply: ps.refl4 = true; ps.refl4_idx = idx; break;
    }
  }
  return ps;
}

struct Ref {
  int32_t id = -1;
  std::int8_t port = 0;
};

// Emits nodes into the fused DAG while remapping old operand ids.
class Rebuild {
public:
  Rebuild(const InstrDag& src, const std::vector<MacroOpPattern>& pats) : src_(&src) {
    out_.tag = src.tag;
    out_.patterns = pats;
    map_.assign(src.nodes.size(), Ref{});
  }

  Ref mapped(int32_t old_id, std::int8_t old_port) const {
    const Ref& r = map_[old_id];
    if (r.id < 0)
      throw Error("fuse: operand " + std::to_string(old_id) +
                  " of a kept node was absorbed");
    return {r.id, static_cast<std::int8_t>(r.port != 0 ? r.port : old_port)};
  }

  void set_map(int32_t old_id, Ref r) { map_[old_id] = r; }

  int32_t copy_node(int32_t old_id) {
    const Node& n = src_->nodes[old_id];
    Node c = n;
    if (c.in0 >= 0) {
      Ref r = mapped(c.in0, c.port0);
      c.in0 = r.id;
      c.port0 = r.port;
    }
    if (c.in1 >= 0) {
      Ref r = mapped(c.in1, c.port1);
      c.in1 = r.id;
      c.port1 = r.port;
    }
    c.macro_id = -1;
    out_.nodes.push_back(c);
    const int32_t nid = static_cast<int32_t>(out_.nodes.size()) - 1;
    map_[old_id] = {nid, 0};
    return nid;
  }

  // Macro from OLD-space operand references.
  int32_t macro_from_old(int pattern_idx, const std::vector<Ref>& old_inputs,
                         int mults, int adds, int32_t group) {
    std::vector<int32_t> ins;
    std::vector<std::int8_t> ports;
    for (const Ref& r : old_inputs) {
      Ref m = mapped(r.id, r.port);
      ins.push_back(m.id);
      ports.push_back(m.port);
    }
    return macro_direct(pattern_idx, std::move(ins), std::move(ports), mults, adds, group);
  }

  // Macro whose operand ids are already in the NEW numbering.
  int32_t macro_direct(int pattern_idx, std::vector<int32_t> ins,
                       std::vector<std::int8_t> ports, int mults, int adds,
                       int32_t group) {
    MacroInstance mi;
    mi.pattern = pattern_idx;
    mi.inputs = std::move(ins);
    mi.in_ports = std::move(ports);
    mi.mults = static_cast<std::int16_t>(mults);
    mi.adds = static_cast<std::int16_t>(adds);
    out_.macros.push_back(std::move(mi));
    Node n;
    n.cls = OpClass::Macro;
    n.macro_id = static_cast<int32_t>(out_.macros.size()) - 1;
    n.group = group;
    out_.nodes.push_back(n);
    return static_cast<int32_t>(out_.nodes.size()) - 1;
  }

  Ref scalar(OpClass cls, ArithFn fn, Ref a, Ref b, int32_t group) {
    Node n;
    n.cls = cls;
    n.fn = fn;
    n.in0 = a.id;
    n.port0 = a.port;
    n.in1 = b.id;
    n.port1 = b.port;
    n.group = group;
    out_.nodes.push_back(n);
    return {static_cast<int32_t>(out_.nodes.size()) - 1, 0};
  }

  InstrDag take() { return std::move(out_); }

private:
  const InstrDag* src_;
  InstrDag out_;
  std::vector<Ref> map_;
};

struct SumGroup {
  std::vector<int32_t> products;  // single-use Mul nodes, ascending
  int32_t head = -1;              // optional non-product summand
  int sign = +1;                  // +1: head + sum, -1: head - sum
};

// Collects the product-sum tree rooted at `root` (adds/subs over single-use
// multiplies, at most one non-product head with positive sign).
bool collect_group(const InstrDag& dag, const std::vector<int>& uses, int32_t root,
                   SumGroup& g, std::vector<int32_t>& interior) {
  struct Item {
    int32_t id;
    int sign;
  };
  std::vector<Item> stack{{root, +1}};
  bool first = true;
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    const Node& n = dag.nodes[it.id];
    const bool is_root = (it.id == root);
    if (n.cls == OpClass::Add && (is_root || uses[it.id] == 1)) {
      if (!is_root) interior.push_back(it.id);
      const int s1 = (n.fn == ArithFn::Sub) ? -it.sign : it.sign;
      stack.push_back({n.in0, it.sign});
      stack.push_back({n.in1, s1});
      continue;
    }
    if (!is_root && n.cls == OpClass::Mul && n.fn == ArithFn::Mul && uses[it.id] == 1) {
      if (first) {
        g.sign = it.sign;
        first = false;
      }
      if (it.sign != g.sign) return false;
      g.products.push_back(it.id);
      continue;
    }
    if (it.sign != +1 || g.head >= 0) return false;
    g.head = it.id;
  }
  std::sort(g.products.begin(), g.products.end());
  std::sort(interior.begin(), interior.end());
  return !g.products.empty();
}

}  // namespace

InstrDag fuse(const InstrDag& dag, const std::vector<MacroOpPattern>& patterns) {
  const PatternSet ps = classify(patterns);
  const long long flops_before = dag.flops();
  const std::size_t n = dag.nodes.size();

  // Use counts and first (smallest-id) consumers; stores count as uses.
  std::vector<int> uses(n, 0);
  std::vector<int32_t> consumer(n, -1);
  auto note_use = [&](int32_t in, int32_t user) {
    if (in < 0) return;
    ++uses[in];
    if (consumer[in] == -1 || user < consumer[in]) consumer[in] = user;
  };
  for (std::size_t i = 0; i < n; ++i) {
    note_use(dag.nodes[i].in0, static_cast<int32_t>(i));
    note_use(dag.nodes[i].in1, static_cast<int32_t>(i));
    if (dag.nodes[i].cls == OpClass::Macro)
      for (int32_t in : dag.macros[dag.nodes[i].macro_id].inputs)
        note_use(in, static_cast<int32_t>(i));
  }

  // absorbed: 1 = swallowed into a plan, 2 = lane op (macro port), 3 = root
  std::vector<int> absorbed(n, 0);

  // --- pass A: product-sum groups -> dot4 (+ mac2 / sum4 merge) -------------
  std::vector<SumGroup> groups;
  std::vector<int> group_of_root(n, -1);
  if (ps.dot4 || ps.mac2) {
    for (std::size_t id = 0; id < n; ++id) {
      const Node& nd = dag.nodes[id];
      if (nd.cls != OpClass::Add) continue;
      const int32_t cons = consumer[id];
      if (uses[id] == 1 && cons >= 0 && dag.nodes[cons].cls == OpClass::Add)
        continue;  // interior of a larger sum
      SumGroup g;
      std::vector<int32_t> interior;
      if (!collect_group(dag, uses, static_cast<int32_t>(id), g, interior)) continue;
      const std::size_t np = g.products.size();
      const bool dot_ok = ps.dot4 && np >= 4;
      const bool mac_ok = ps.mac2 && np >= 2 && g.head >= 0;
      if (!dot_ok && !mac_ok) continue;
      for (int32_t p : g.products) absorbed[p] = 1;
      for (int32_t a : interior) absorbed[a] = 1;
      absorbed[id] = 3;
      group_of_root[id] = static_cast<int>(groups.size());
      groups.push_back(std::move(g));
    }
  }

  // --- pass B: independent multiply-accumulate lanes -> axpy4 / refl4 -------
  // Packs hold 2..4 lanes from one element chain; they collapse into a node
  // at the last lane's position, so earlier lanes' consumers must sit after
  // the pack span.
  struct Lane {
    int32_t op, x, mul;
    std::int8_t xp;
  };
  std::vector<int> lane_pack_of(n, -1);
  std::vector<std::vector<Lane>> lane_packs;
  if (ps.axpy4 || ps.refl4) {
    std::vector<Lane> buf;
    ArithFn buf_fn = ArithFn::None;
    auto seal = [&]() {
      if (buf.size() >= 2) {
        bool span_ok = true;
        for (std::size_t l = 0; l + 1 < buf.size() && span_ok; ++l) {
          const int32_t c = consumer[buf[l].op];
          if (c >= 0 && c <= buf.back().op) span_ok = false;
        }
        if (span_ok) {
          const int pack = static_cast<int>(lane_packs.size());
          for (const Lane& l : buf) {
            lane_pack_of[l.op] = pack;
            absorbed[l.op] = 2;
            absorbed[l.mul] = 1;
          }
          lane_packs.push_back(buf);
        }
      }
      buf.clear();
    };
    for (std::size_t id = 0; id < n; ++id) {
      const Node& nd = dag.nodes[id];
      if (nd.cls != OpClass::Add || absorbed[id]) continue;
      if ((nd.fn == ArithFn::Add && !ps.axpy4) || (nd.fn == ArithFn::Sub && !ps.refl4))
        continue;
      auto is_lane_mul = [&](int32_t cand) {
        return cand >= 0 && !absorbed[cand] && dag.nodes[cand].cls == OpClass::Mul &&
               dag.nodes[cand].fn == ArithFn::Mul && uses[cand] == 1;
      };
      int32_t mul = -1, x = -1;
      std::int8_t xp = 0;
      if (is_lane_mul(nd.in1)) {
        mul = nd.in1;
        x = nd.in0;
        xp = nd.port0;
      } else if (nd.fn == ArithFn::Add && is_lane_mul(nd.in0)) {
        mul = nd.in0;
        x = nd.in1;
        xp = nd.port1;
      } else {
        continue;
      }
      // Lanes pack only within one element chain and operation kind.
      if (!buf.empty() &&
          (buf_fn != nd.fn || dag.nodes[buf.back().op].group != nd.group))
        seal();
      bool depends = false;
      for (const Lane& l : buf)
        if (x == l.op || dag.nodes[mul].in0 == l.op || dag.nodes[mul].in1 == l.op)
          depends = true;
      if (depends) seal();
      buf.push_back({static_cast<int32_t>(id), x, mul, xp});
      buf_fn = nd.fn;
      // Three lanes issue in one datapath cycle; the full four-lane shape
      // needs a second issue slot, so groups seal at three.
      if (buf.size() == 3) seal();
    }
    seal();
  }

  if (groups.empty() && lane_packs.empty()) return dag;  // identity transform

  // --- rebuild ---------------------------------------------------------------
  Rebuild rb(dag, patterns);
  std::vector<int> lane_seen(lane_packs.size(), 0);
  for (std::size_t id = 0; id < n; ++id) {
    const Node& nd = dag.nodes[id];
    if (absorbed[id] == 1) continue;  // swallowed into a macro plan
    if (absorbed[id] == 2) {
      const int pack = lane_pack_of[id];
      const std::vector<Lane>& lanes = lane_packs[pack];
      if (++lane_seen[pack] < static_cast<int>(lanes.size())) continue;
      std::vector<Ref> ins;
      for (const Lane& l : lanes) {
        const Node& mn = dag.nodes[l.mul];
        ins.push_back({l.x, l.xp});
        ins.push_back({mn.in0, mn.port0});
        ins.push_back({mn.in1, mn.port1});
      }
      const int pidx = (nd.fn == ArithFn::Add) ? ps.axpy4_idx : ps.refl4_idx;
      const int lane_count = static_cast<int>(lanes.size());
      const int32_t mid = rb.macro_from_old(pidx, ins, lane_count, lane_count, nd.group);
      for (std::size_t l = 0; l < lanes.size(); ++l)
        rb.set_map(lanes[l].op, {mid, static_cast<std::int8_t>(l)});
      continue;
    }
    if (group_of_root[id] >= 0) {
      const SumGroup& g = groups[group_of_root[id]];
      std::deque<Ref> merge;
      std::size_t q = 0;
      while (ps.dot4 && g.products.size() - q >= 4) {
        std::vector<Ref> ins;
        for (std::size_t t = 0; t < 4; ++t) {
          const Node& mn = dag.nodes[g.products[q + t]];
          ins.push_back({mn.in0, mn.port0});
          ins.push_back({mn.in1, mn.port1});
        }
        merge.push_back({rb.macro_from_old(ps.dot4_idx, ins, 4, 3, nd.group), 0});
        q += 4;
      }
      std::deque<int32_t> loose(g.products.begin() + q, g.products.end());

      bool head_used = false;
      Ref total{};
      // mac2 with the head as accumulate when there are no dot4 partials.
      if (merge.empty() && g.head >= 0 && g.sign > 0 && ps.mac2 && loose.size() >= 2) {
        const Node& m0 = dag.nodes[loose[0]];
        const Node& m1 = dag.nodes[loose[1]];
        total = {rb.macro_from_old(ps.mac2_idx,
                                   {{g.head, 0},
                                    {m0.in0, m0.port0},
                                    {m0.in1, m0.port1},
                                    {m1.in0, m1.port0},
                                    {m1.in1, m1.port1}},
                                   2, 2, nd.group),
                 0};
        loose.pop_front();
        loose.pop_front();
        head_used = true;
      }
      // Merge dot4 partials (sum4 trees, scalar adds otherwise).
      while (merge.size() > 1) {
        if (ps.sum4 && merge.size() >= 4) {
          std::vector<int32_t> ins;
          std::vector<std::int8_t> ports;
          for (int t = 0; t < 4; ++t) {
            ins.push_back(merge.front().id);
            ports.push_back(merge.front().port);
            merge.pop_front();
          }
          merge.push_front(
              {rb.macro_direct(ps.sum4_idx, ins, ports, 0, 3, nd.group), 0});
        } else {
          Ref a = merge.front();
          merge.pop_front();
          Ref b = merge.front();
          merge.pop_front();
          merge.push_front(rb.scalar(OpClass::Add, ArithFn::Add, a, b, nd.group));
        }
      }
      if (!merge.empty()) {
        if (total.id >= 0)
          total = rb.scalar(OpClass::Add, ArithFn::Add, total, merge.front(), nd.group);
        else
          total = merge.front();
      }
      // Fold leftover products: mac2 pairs into the running sum, then
      // scalar multiply-adds.
      while (loose.size() >= 2 && ps.mac2 && total.id >= 0) {
        const Node& m0 = dag.nodes[loose[0]];
        const Node& m1 = dag.nodes[loose[1]];
        Ref acc = total;
        total = {rb.macro_direct(ps.mac2_idx,
                                 {acc.id, rb.mapped(m0.in0, m0.port0).id,
                                  rb.mapped(m0.in1, m0.port1).id,
                                  rb.mapped(m1.in0, m1.port0).id,
                                  rb.mapped(m1.in1, m1.port1).id},
                                 {acc.port, rb.mapped(m0.in0, m0.port0).port,
                                  rb.mapped(m0.in1, m0.port1).port,
                                  rb.mapped(m1.in0, m1.port0).port,
                                  rb.mapped(m1.in1, m1.port1).port},
                                 2, 2, nd.group),
                 0};
        loose.pop_front();
        loose.pop_front();
      }
      while (!loose.empty()) {
        Ref c{rb.copy_node(loose.front()), 0};
        loose.pop_front();
        total = (total.id >= 0)
                    ? rb.scalar(OpClass::Add, ArithFn::Add, total, c, nd.group)
                    : c;
      }
      Ref final_ref = total;
      if (g.head >= 0 && !head_used) {
        Ref h = rb.mapped(g.head, 0);
        final_ref = rb.scalar(OpClass::Add, g.sign > 0 ? ArithFn::Add : ArithFn::Sub, h,
                              total, nd.group);
      }
      rb.set_map(static_cast<int32_t>(id), final_ref);
      continue;
    }
    rb.copy_node(static_cast<int32_t>(id));
  }

  InstrDag fused = rb.take();
  evaluate(fused);
  fused.validate();
  if (fused.flops() != flops_before)
    throw Error("fuse: flop count changed (" + std::to_string(flops_before) + " -> " +
                std::to_string(fused.flops()) + ") in dag '" + dag.tag + "'");
  return fused;
}

InstrDag reorder_by_groups(const InstrDag& dag, int window_scale) {
  const std::size_t n = dag.nodes.size();
  if (n == 0) return dag;

  std::map<int32_t, std::vector<int32_t>> by_group;
  for (std::size_t i = 0; i < n; ++i)
    by_group[dag.nodes[i].group].push_back(static_cast<int32_t>(i));
  // Enough chains in flight to cover the macro latencies.
  int window = std::clamp(window_scale / 6, 2, 96);

  struct GQ {
    const std::vector<int32_t>* list;
    std::size_t pos = 0;
  };
  std::vector<GQ> active;
  auto it_admit = by_group.begin();
  auto admit = [&]() {
    while (static_cast<int>(active.size()) < window && it_admit != by_group.end()) {
      active.push_back({&it_admit->second, 0});
      ++it_admit;
    }
  };
  admit();

  std::vector<int> emitted(n, 0);
  std::vector<Ref> remap(n, Ref{});
  InstrDag out;
  out.tag = dag.tag;
  out.patterns = dag.patterns;

  auto ready = [&](int32_t id) {
    const Node& nd = dag.nodes[id];
    if (nd.cls == OpClass::Macro) {
      for (int32_t in : dag.macros[nd.macro_id].inputs)
        if (!emitted[in]) return false;
      return true;
    }
    if (nd.in0 >= 0 && !emitted[nd.in0]) return false;
    if (nd.in1 >= 0 && !emitted[nd.in1]) return false;
    return true;
  };
  auto emit = [&](int32_t id) {
    const Node& nd = dag.nodes[id];
    Node c = nd;
    if (c.in0 >= 0) {
      c.port0 = remap[c.in0].port ? remap[c.in0].port : c.port0;
      c.in0 = remap[c.in0].id;
    }
    if (c.in1 >= 0) {
      c.port1 = remap[c.in1].port ? remap[c.in1].port : c.port1;
      c.in1 = remap[c.in1].id;
    }
    if (nd.cls == OpClass::Macro) {
      MacroInstance mi = dag.macros[nd.macro_id];
      for (std::size_t t = 0; t < mi.inputs.size(); ++t) {
        if (remap[mi.inputs[t]].port) mi.in_ports[t] = remap[mi.inputs[t]].port;
        mi.inputs[t] = remap[mi.inputs[t]].id;
      }
      out.macros.push_back(std::move(mi));
      c.macro_id = static_cast<int32_t>(out.macros.size()) - 1;
    }
    out.nodes.push_back(c);
    remap[id] = {static_cast<int32_t>(out.nodes.size()) - 1, 0};
    emitted[id] = 1;
  };

  std::size_t remaining = n;
  std::size_t rr = 0;
  std::size_t fallback_cursor = 0;
  while (remaining > 0) {
    bool advanced = false;
    for (std::size_t t = 0; t < active.size() && !advanced; ++t) {
      GQ& q = active[(rr + t) % active.size()];
      // Stream the group's loads with it; rotate after one arith op or one
      // store so `window` element chains stay in flight and stores sit far
      // from their producers.
      while (q.pos < q.list->size()) {
        while (q.pos < q.list->size() && emitted[(*q.list)[q.pos]]) ++q.pos;
        if (q.pos >= q.list->size()) break;
        const int32_t id = (*q.list)[q.pos];
        if (!ready(id)) break;
        const bool rotate_after = dag.nodes[id].cls != OpClass::Load;
        emit(id);
        ++q.pos;
        --remaining;
        advanced = true;
        if (rotate_after) break;
      }
      if (advanced) rr = (rr + t + 1) % std::max<std::size_t>(1, active.size());
    }
    std::erase_if(active, [](const GQ& q) { return q.pos >= q.list->size(); });
    admit();
    if (!advanced && remaining > 0) {
      while (fallback_cursor < n && emitted[fallback_cursor]) ++fallback_cursor;
      emit(static_cast<int32_t>(fallback_cursor));
      --remaining;
    }
  }
  out.validate();
  return out;
}

}  // namespace mfakf::cgra
