//! Traces: replayable move sequences modelling triple homotopies.
//!
//! A trace is an initial diagram plus a sequence of move events. Validation
//! replays the events and yields every intermediate diagram; the index sums
//! the per-passage indices and the W-invariant sums ind(p)·W(p) over the
//! triple passages, evaluated on the pre-move diagram of each event. For a
//! braid-only trace the W-invariant equals the change of the degree-2
//! invariant between the endpoints, which `check_theorem2` verifies.
//!
//! Rewrites (reversal, composition, connected sum, star→braid conversion and
//! commutation of disjoint events) transport event addresses through
//! explicit slot/label correspondences, so rewritten traces replay exactly.

use crate::diagram::{ArrowId, CanonOptions, DiagramError, End, GaussDiagram, Pos, Sign};
use crate::invariants::{self, InvariantError};
use crate::moves::{
    self, apply_move, sites_for_arrows, MoveError, MoveEvent, R1Chirality, R2Shape, SiteFlavor,
};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("step {step}: {source}")]
    InvalidEvent { step: usize, source: MoveError },
    #[error("step {0} is a star-like passage; rewrite to braid form first")]
    StarEvent(usize),
    #[error("trace endpoints do not match")]
    EndpointMismatch,
    #[error("events {0} and {1} have overlapping sites")]
    NotDisjoint(usize, usize),
    #[error("trace is not closed")]
    NotClosed,
    #[error("regular closed trace has nonzero index {0}")]
    RegularLoopIndex(i64),
    #[error("no braid realization found for the star passage at step {0}")]
    StarRewriteFailed(usize),
    #[error("step {step}: event site is not clear of the splice point")]
    SpliceTouchesSite { step: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

/// An initial diagram plus a sequence of elementary moves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub initial: GaussDiagram,
    pub events: Vec<MoveEvent>,
}

impl Trace {
    pub fn new(initial: GaussDiagram, events: Vec<MoveEvent>) -> Trace {
        Trace { initial, events }
    }

    /// Replays the events; returns every diagram along the way (length
    /// `events + 1`). Fails on the first invalid event with its step index.
    pub fn validate(&self) -> Result<Vec<GaussDiagram>, TraceError> {
        let mut out = Vec::with_capacity(self.events.len() + 1);
        out.push(self.initial.clone());
        for (step, e) in self.events.iter().enumerate() {
            let next = apply_move(out.last().unwrap(), e)
                .map_err(|source| TraceError::InvalidEvent { step, source })?;
            out.push(next);
        }
        Ok(out)
    }

    /// Final diagram of a valid trace.
    pub fn end(&self) -> Result<GaussDiagram, TraceError> {
        Ok(self.validate()?.pop().unwrap())
    }

    /// Sum of the passage indices over all triple events.
    pub fn index(&self) -> Result<i64, TraceError> {
        let diagrams = self.validate()?;
        let mut total = 0;
        for (step, e) in self.events.iter().enumerate() {
            total += moves::move_index(&diagrams[step], e)
                .map_err(|source| TraceError::InvalidEvent { step, source })?;
        }
        Ok(total)
    }

    /// No curl moves anywhere.
    pub fn is_regular(&self) -> bool {
        !self.events.iter().any(|e| e.is_r1())
    }

    /// Endpoints agree up to rotation, relabelling and base choice.
    pub fn is_closed(&self) -> Result<bool, TraceError> {
        Ok(self.end()?.same_diagram_basefree(&self.initial))
    }

    /// A regular closed trace must have index zero (only passages change the
    /// writhe, by ±6 each). Non-regular traces pass vacuously.
    pub fn assert_regular_loop_index(&self) -> Result<(), TraceError> {
        if !self.is_closed()? {
            return Err(TraceError::NotClosed);
        }
        if !self.is_regular() {
            return Ok(());
        }
        let index = self.index()?;
        if index != 0 {
            return Err(TraceError::RegularLoopIndex(index));
        }
        Ok(())
    }

    /// Sum of ind(p)·W(p) over the triple passages, each evaluated on its
    /// pre-move diagram. Requires every passage to be braid-like.
    pub fn w_total(&self) -> Result<i64, TraceError> {
        let diagrams = self.validate()?;
        let mut total = 0;
        for (step, e) in self.events.iter().enumerate() {
            if let Some((ind, w)) = event_site_writhe(&diagrams[step], e, step)? {
                total += ind * w;
            }
        }
        Ok(total)
    }

    pub fn reverse(&self) -> Result<Trace, TraceError> {
        let diagrams = self.validate()?;
        let m = self.events.len();
        let end = diagrams[m].clone();
        let mut map = SlotMap::identity(&end);
        let mut current = end.clone();
        let mut events = Vec::with_capacity(m);
        for k in (0..m).rev() {
            let inv = invert_event(&self.events[k], &diagrams[k], &diagrams[k + 1], k)?;
            // a wrapped-pair deletion re-inserts at gap 0, yielding a
            // rotation of the original diagram; replay against the actual
            // result and re-anchor the correspondence afterwards
            let actual_prev = apply_move(&diagrams[k + 1], &inv)
                .map_err(|source| TraceError::InvalidEvent { step: k, source })?;
            let (e, next, next_map) =
                transport_event(&inv, &diagrams[k + 1], &actual_prev, &current, map, k)?;
            events.push(e);
            current = next;
            map = if actual_prev == diagrams[k] {
                next_map
            } else {
                compose_maps(&SlotMap::from_canonical(&diagrams[k], &actual_prev), &next_map)
            };
        }
        Ok(Trace { initial: end, events })
    }

    /// Mirror image: every diagram mirrored, every event adjusted; the index
    /// negates.
    pub fn mirror(&self) -> Trace {
        let events = self.events.iter().map(mirror_event).collect();
        Trace { initial: self.initial.mirror(), events }
    }

    /// Concatenates two traces; the second is transported onto the end
    /// diagram of the first (endpoints must agree up to rotation,
    /// relabelling and base choice).
    pub fn compose(&self, other: &Trace) -> Result<Trace, TraceError> {
        let end = self.end()?;
        if !end.same_diagram_basefree(&other.initial) {
            return Err(TraceError::EndpointMismatch);
        }
        let map = SlotMap::from_canonical(&other.initial, &end);
        let (events, _) = transport_events(other, &end, map)?;
        let mut all = self.events.clone();
        all.extend(events);
        Ok(Trace { initial: self.initial.clone(), events: all })
    }

    /// Splices `summand` into every step at the base point of the initial
    /// diagram. Move sites must stay clear of the splice. Index and
    /// per-passage site writhes are preserved.
    pub fn connect_sum(&self, summand: &GaussDiagram) -> Result<Trace, TraceError> {
        let diagrams = self.validate()?;
        // labels for the summand above anything the trace ever uses
        let mut max_id = 0u32;
        for d in &diagrams {
            for a in d.arrow_ids() {
                max_id = max_id.max(a.0);
            }
        }
        let initial = diagrams[0].connected_sum_relabel(summand, max_id)?;
        let b = diagrams[0].base().gap;
        let extra = 2 * summand.n_arrows();
        let n0 = diagrams[0].slots().len();
        let slots = (0..n0).map(|s| if s < b { s } else { s + extra }).collect();
        let ids = diagrams[0].arrow_ids().map(|a| (a, a)).collect();
        let map = SlotMap { slots, ids };
        let (events, _) = transport_events(self, &initial, map)?;
        Ok(Trace { initial, events })
    }

    /// Replaces every star-like passage by a poke, a braid-like passage and
    /// an inverse poke with the same endpoints and index.
    pub fn star_to_braid(&self) -> Result<Trace, TraceError> {
        let diagrams = self.validate()?;
        let mut current = self.initial.clone();
        let mut map = SlotMap::identity(&self.initial);
        let mut events: Vec<MoveEvent> = Vec::new();
        for (step, e) in self.events.iter().enumerate() {
            let is_star = matches!(e, MoveEvent::Triple { flavor: SiteFlavor::Star, .. });
            if !is_star {
                let (e2, next, next_map) =
                    transport_event(e, &diagrams[step], &diagrams[step + 1], &current, map, step)?;
                events.push(e2);
                current = next;
                map = next_map;
                continue;
            }
            let MoveEvent::Triple { arrows, .. } = e else { unreachable!() };
            let site_arrows: Vec<ArrowId> = arrows.iter().map(|a| map.ids[a]).collect();
            let target = apply_move(&diagrams[step], e)
                .map_err(|source| TraceError::InvalidEvent { step, source })?;
            let target_key = target.canonical_key_basefree();

            let (triplet, after) = star_realization(&current, &site_arrows, &target_key)
                .ok_or(TraceError::StarRewriteFailed(step))?;
            events.extend(triplet);
            map = SlotMap::from_canonical(&target, &after);
            current = after;
        }
        Ok(Trace { initial: self.initial.clone(), events })
    }

    /// Swaps the adjacent events `k` and `k+1`; their footprints (slots and
    /// gaps touched) must be disjoint, and the swap reproduces the same
    /// diagram two steps later exactly.
    pub fn commute_disjoint(&self, k: usize) -> Result<Trace, TraceError> {
        let diagrams = self.validate()?;
        if k + 1 >= self.events.len() {
            return Err(TraceError::NotDisjoint(k, k + 1));
        }
        let first = &self.events[k];
        let second = &self.events[k + 1];
        let fp1 = footprint(&diagrams[k], first, k)?;
        let fp2 = footprint(&diagrams[k + 1], second, k + 1)?;
        let fp2_back = fp2
            .translated_back(first, &diagrams[k], &diagrams[k + 1])
            .ok_or(TraceError::NotDisjoint(k, k + 1))?;
        if fp1.overlaps(&fp2_back) {
            return Err(TraceError::NotDisjoint(k, k + 1));
        }
        let second_front = translate_event(second, &|x| {
            back_position(x, first, &diagrams[k])
        });
        let second_front = pin_ids(&second_front, &diagrams[k + 1], &diagrams[k + 2]);
        let mid = apply_move(&diagrams[k], &second_front)
            .map_err(|_| TraceError::NotDisjoint(k, k + 1))?;
        let first_back = translate_event(first, &|x| {
            forward_position(x, &second_front, &diagrams[k])
        });
        let first_back = pin_ids(&first_back, &diagrams[k], &diagrams[k + 1]);
        let end = apply_move(&mid, &first_back).map_err(|_| TraceError::NotDisjoint(k, k + 1))?;
        if end != diagrams[k + 2] {
            return Err(TraceError::NotDisjoint(k, k + 1));
        }
        let mut events = self.events.clone();
        events[k] = second_front;
        events[k + 1] = first_back;
        Ok(Trace { initial: self.initial.clone(), events })
    }
}

fn event_site_writhe(
    d: &GaussDiagram,
    e: &MoveEvent,
    step: usize,
) -> Result<Option<(i64, i64)>, TraceError> {
    match e {
        MoveEvent::Triple { arrows, flavor, variant } => {
            if *flavor == SiteFlavor::Star {
                return Err(TraceError::StarEvent(step));
            }
            let sites = sites_for_arrows(d, *arrows);
            let site = sites.get(*variant).ok_or(TraceError::InvalidEvent {
                step,
                source: no_such_site(*arrows, *variant),
            })?;
            let ind = moves::move_index(d, e)
                .map_err(|source| TraceError::InvalidEvent { step, source })?;
            let w = moves::triple_writhe(d, site)
                .map_err(|source| TraceError::InvalidEvent { step, source })?;
            Ok(Some((ind, w)))
        }
        _ => Ok(None),
    }
}

fn no_such_site(arrows: [ArrowId; 3], variant: usize) -> MoveError {
    MoveError::NoSuchSite { a: arrows[0], b: arrows[1], c: arrows[2], variant }
}

/// One line of a theorem-2 report.
#[derive(Clone, Debug)]
pub struct EventReport {
    pub kind: moves::MoveKind,
    pub index: i64,
    pub site_writhe: Option<i64>,
    pub writhe_delta: i64,
}

/// Comparison of the trace's W-invariant against the change of the degree-2
/// invariant between its endpoints.
#[derive(Clone, Debug)]
pub struct Theorem2Report {
    pub events: Vec<EventReport>,
    pub w_total: i64,
    pub v2_start: i64,
    pub v2_end: i64,
    pub pass: bool,
}

/// Evaluates W(K_t) = v2(end) − v2(start) on a braid-only trace.
pub fn check_theorem2(t: &Trace) -> Result<Theorem2Report, TraceError> {
    let diagrams = t.validate()?;
    let mut events = Vec::with_capacity(t.events.len());
    let mut w_total = 0;
    for (step, e) in t.events.iter().enumerate() {
        let ind_w = event_site_writhe(&diagrams[step], e, step)?;
        let index = moves::move_index(&diagrams[step], e)
            .map_err(|source| TraceError::InvalidEvent { step, source })?;
        let writhe_delta = moves::writhe_delta(&diagrams[step], e)
            .map_err(|source| TraceError::InvalidEvent { step, source })?;
        if let Some((ind, w)) = ind_w {
            w_total += ind * w;
        }
        events.push(EventReport {
            kind: e.kind(),
            index,
            site_writhe: ind_w.map(|(_, w)| w),
            writhe_delta,
        });
    }
    let v2_start = invariants::v2(&diagrams[0])?;
    let v2_end = invariants::v2(diagrams.last().unwrap())?;
    Ok(Theorem2Report {
        events,
        w_total,
        v2_start,
        v2_end,
        pass: w_total == v2_end - v2_start,
    })
}

// ---------------------------------------------------------------------------
// event transport
// ---------------------------------------------------------------------------

/// Injective, cyclic-order-preserving correspondence from the slots and
/// labels of a source diagram into a target diagram.
struct SlotMap {
    /// source slot index → target slot index
    slots: Vec<usize>,
    /// source label → target label
    ids: BTreeMap<ArrowId, ArrowId>,
}

impl SlotMap {
    fn identity(d: &GaussDiagram) -> SlotMap {
        SlotMap {
            slots: (0..d.slots().len()).collect(),
            ids: d.arrow_ids().map(|a| (a, a)).collect(),
        }
    }

    /// Correspondence between two diagrams with equal base-free canonical
    /// forms, built from the canonicalization morphisms.
    fn from_canonical(src: &GaussDiagram, dst: &GaussDiagram) -> SlotMap {
        let opts = CanonOptions { keep_base: false };
        let cs = src.canonical(opts);
        let cd = dst.canonical(opts);
        debug_assert_eq!(cs.key(), cd.key(), "diagrams must share a canonical form");
        let n2 = dst.slots().len();
        let mut canon_to_dst = vec![0usize; n2];
        for s in 0..n2 {
            let p = cd.map_pos(Pos { component: 0, slot: s }, dst);
            canon_to_dst[p.slot] = s;
        }
        let slots = (0..src.slots().len())
            .map(|s| {
                let c = cs.map_pos(Pos { component: 0, slot: s }, src);
                canon_to_dst[c.slot]
            })
            .collect();
        let dst_label_inv: BTreeMap<ArrowId, ArrowId> =
            cd.arrow_map().iter().map(|(&k, &v)| (v, k)).collect();
        let ids = cs
            .arrow_map()
            .iter()
            .map(|(&src_id, &canon_id)| (src_id, dst_label_inv[&canon_id]))
            .collect();
        SlotMap { slots, ids }
    }

    /// Target gap corresponding to a source gap (the gap just before the
    /// image of the slot the source gap precedes).
    fn gap(&self, g: usize, target: &GaussDiagram) -> usize {
        if self.slots.is_empty() {
            // empty source circle: land at the target's base point
            return target.base().gap;
        }
        self.slots[g % self.slots.len()]
    }
}

/// Composition g ∘ f of two correspondences.
fn compose_maps(f: &SlotMap, g: &SlotMap) -> SlotMap {
    SlotMap {
        slots: f.slots.iter().map(|&s| g.slots[s]).collect(),
        ids: f.ids.iter().map(|(&k, &v)| (k, g.ids[&v])).collect(),
    }
}

fn mirror_event(e: &MoveEvent) -> MoveEvent {
    match e {
        MoveEvent::R1Insert { gap, chirality, sign, id } => MoveEvent::R1Insert {
            gap: *gap,
            chirality: match chirality {
                R1Chirality::OverFirst => R1Chirality::UnderFirst,
                R1Chirality::UnderFirst => R1Chirality::OverFirst,
            },
            sign: sign.flip(),
            id: *id,
        },
        MoveEvent::R2Insert { over_gap, under_gap, shape, first_sign, under_first, ids } => {
            // the over pair becomes the under pair; with the antiparallel
            // shape the first-met arrow swaps, which flips the leading sign
            // back to its old value
            let first_sign = match shape {
                R2Shape::Parallel => first_sign.flip(),
                R2Shape::Antiparallel => *first_sign,
            };
            let ids = ids.map(|(a, b)| match shape {
                R2Shape::Parallel => (a, b),
                R2Shape::Antiparallel => (b, a),
            });
            MoveEvent::R2Insert {
                over_gap: *under_gap,
                under_gap: *over_gap,
                shape: *shape,
                first_sign,
                under_first: if over_gap == under_gap { !under_first } else { *under_first },
                ids,
            }
        }
        other => other.clone(),
    }
}

/// Slot positions freshly occupied by an insertion event, in post-insert
/// coordinates and in insertion order (over pair first for pokes).
fn inserted_positions(e: &MoveEvent) -> Vec<usize> {
    match e {
        MoveEvent::R1Insert { gap, .. } => vec![*gap, gap + 1],
        MoveEvent::R2Insert { over_gap, under_gap, under_first, .. } => {
            if over_gap == under_gap {
                let g = *over_gap;
                if *under_first {
                    vec![g + 2, g + 3, g, g + 1]
                } else {
                    vec![g, g + 1, g + 2, g + 3]
                }
            } else if over_gap > under_gap {
                vec![over_gap + 2, over_gap + 3, *under_gap, under_gap + 1]
            } else {
                vec![*over_gap, over_gap + 1, under_gap + 2, under_gap + 3]
            }
        }
        _ => vec![],
    }
}

/// Slot positions removed by a deletion event, in pre-delete coordinates,
/// ascending.
fn removed_positions(e: &MoveEvent, pre: &GaussDiagram) -> Vec<usize> {
    let mut v = match e {
        MoveEvent::R1Delete { arrow } => vec![
            pre.pos_of(*arrow, End::Tail).unwrap().slot,
            pre.pos_of(*arrow, End::Head).unwrap().slot,
        ],
        MoveEvent::R2Delete { a, b } => [*a, *b]
            .iter()
            .flat_map(|&id| {
                [End::Tail, End::Head]
                    .into_iter()
                    .map(move |end| pre.pos_of(id, end).unwrap().slot)
                    .collect::<Vec<_>>()
            })
            .collect(),
        _ => vec![],
    };
    v.sort_unstable();
    v
}

/// Labels created by an insertion, in insertion order.
fn inserted_arrows(e: &MoveEvent, post: &GaussDiagram) -> Vec<ArrowId> {
    let mut out = Vec::new();
    for p in inserted_positions(e) {
        let a = post.slots()[p].arrow;
        if !out.contains(&a) {
            out.push(a);
        }
    }
    out
}

/// Transports one event across a slot correspondence: `src_pre --e--> src_post`
/// is mirrored on `dst`, returning the transported event, the new target
/// diagram and the updated correspondence from `src_post`.
fn transport_event(
    e: &MoveEvent,
    src_pre: &GaussDiagram,
    src_post: &GaussDiagram,
    dst: &GaussDiagram,
    map: SlotMap,
    step: usize,
) -> Result<(MoveEvent, GaussDiagram, SlotMap), TraceError> {
    let err = |source| TraceError::InvalidEvent { step, source };
    let e2 = match e {
        MoveEvent::R1Insert { gap, chirality, sign, .. } => MoveEvent::R1Insert {
            gap: map.gap(*gap, dst),
            chirality: *chirality,
            sign: *sign,
            id: None,
        },
        MoveEvent::R1Delete { arrow } => MoveEvent::R1Delete { arrow: map.ids[arrow] },
        MoveEvent::R2Insert { over_gap, under_gap, shape, first_sign, under_first, .. } => {
            MoveEvent::R2Insert {
                over_gap: map.gap(*over_gap, dst),
                under_gap: map.gap(*under_gap, dst),
                shape: *shape,
                first_sign: *first_sign,
                under_first: *under_first,
                ids: None,
            }
        }
        MoveEvent::R2Delete { a, b } => {
            let (x, y) = (map.ids[a], map.ids[b]);
            MoveEvent::R2Delete { a: x.min(y), b: x.max(y) }
        }
        MoveEvent::R3 { arrows, variant } => {
            let (mapped, v) = transported_site(src_pre, *arrows, *variant, dst, &map, step)?;
            MoveEvent::R3 { arrows: mapped, variant: v }
        }
        MoveEvent::Triple { arrows, flavor, variant } => {
            let (mapped, v) = transported_site(src_pre, *arrows, *variant, dst, &map, step)?;
            MoveEvent::Triple { arrows: mapped, flavor: *flavor, variant: v }
        }
    };
    let dst_post = apply_move(dst, &e2).map_err(err)?;
    let new_map = updated_map(map, e, src_pre, src_post, &e2, &dst_post);
    Ok((e2, dst_post, new_map))
}

fn sorted3(mut a: [ArrowId; 3]) -> [ArrowId; 3] {
    a.sort();
    a
}

fn transported_site(
    src_pre: &GaussDiagram,
    arrows: [ArrowId; 3],
    variant: usize,
    dst: &GaussDiagram,
    map: &SlotMap,
    step: usize,
) -> Result<([ArrowId; 3], usize), TraceError> {
    let sites = sites_for_arrows(src_pre, arrows);
    let site = sites.get(variant).ok_or(TraceError::InvalidEvent {
        step,
        source: no_such_site(arrows, variant),
    })?;
    let n2 = dst.slots().len();
    let mut arcs: Vec<[usize; 2]> = site
        .arcs
        .iter()
        .map(|&[s, t]| [map.slots[s], map.slots[t]])
        .collect();
    for arc in &arcs {
        if (arc[0] + 1) % n2 != arc[1] {
            return Err(TraceError::SpliceTouchesSite { step });
        }
    }
    arcs.sort_by_key(|&[s, _]| s);
    let mapped = sorted3([map.ids[&arrows[0]], map.ids[&arrows[1]], map.ids[&arrows[2]]]);
    let v = sites_for_arrows(dst, mapped)
        .iter()
        .position(|s| s.arcs.as_slice() == arcs.as_slice())
        .ok_or(TraceError::SpliceTouchesSite { step })?;
    Ok((mapped, v))
}

/// Rebuilds the correspondence after mirroring one event on both sides.
fn updated_map(
    map: SlotMap,
    src_event: &MoveEvent,
    src_pre: &GaussDiagram,
    src_post: &GaussDiagram,
    dst_event: &MoveEvent,
    dst_post: &GaussDiagram,
) -> SlotMap {
    let mut ids = map.ids;
    let mut slots = map.slots;
    let removed_src = removed_positions(src_event, src_pre);
    if !removed_src.is_empty() {
        let removed_dst: Vec<usize> = removed_src.iter().map(|&s| slots[s]).collect();
        let mut v = Vec::with_capacity(slots.len() - removed_src.len());
        for (s, &t) in slots.iter().enumerate() {
            if removed_src.contains(&s) {
                continue;
            }
            let t2 = t - removed_dst.iter().filter(|&&r| r < t).count();
            v.push(t2);
        }
        slots = v;
        ids.retain(|id, _| src_post.sign(*id).is_ok());
        return SlotMap { slots, ids };
    }
    let src_ins = inserted_positions(src_event);
    if !src_ins.is_empty() {
        let dst_ins = inserted_positions(dst_event);
        let src_sorted: BTreeSet<usize> = src_ins.iter().copied().collect();
        let dst_sorted: BTreeSet<usize> = dst_ins.iter().copied().collect();
        let mut v = vec![usize::MAX; src_post.slots().len()];
        // old entries, shifted
        for (s, &t) in slots.iter().enumerate() {
            let s2 = s + src_sorted.iter().filter(|&&p| p <= s + src_sorted.range(..=s).count() - src_sorted.range(..=s).count()).count();
            // recompute properly below
            let _ = s2;
        }
        // pre→post index maps on both sides
        let src_pre_to_post: Vec<usize> =
            (0..src_post.slots().len()).filter(|p| !src_sorted.contains(p)).collect();
        let dst_pre_to_post: Vec<usize> =
            (0..dst_post.slots().len()).filter(|p| !dst_sorted.contains(p)).collect();
        for (s, &t) in slots.iter().enumerate() {
            v[src_pre_to_post[s]] = dst_pre_to_post[t];
        }
        for (&sp, &dp) in src_ins.iter().zip(dst_ins.iter()) {
            v[sp] = dp;
        }
        slots = v;
        let src_new = inserted_arrows(src_event, src_post);
        let dst_new = inserted_arrows(dst_event, dst_post);
        for (s, d) in src_new.iter().zip(dst_new.iter()) {
            ids.insert(*s, *d);
        }
    }
    SlotMap { slots, ids }
}

fn transport_events(
    t: &Trace,
    target_initial: &GaussDiagram,
    map: SlotMap,
) -> Result<(Vec<MoveEvent>, GaussDiagram), TraceError> {
    let diagrams = t.validate()?;
    let mut current = target_initial.clone();
    let mut map = map;
    let mut events = Vec::with_capacity(t.events.len());
    for (step, e) in t.events.iter().enumerate() {
        let (e2, next, next_map) =
            transport_event(e, &diagrams[step], &diagrams[step + 1], &current, map, step)?;
        events.push(e2);
        current = next;
        map = next_map;
    }
    Ok((events, current))
}

// ---------------------------------------------------------------------------
// event inversion (for reverse)
// ---------------------------------------------------------------------------

fn invert_event(
    e: &MoveEvent,
    pre: &GaussDiagram,
    post: &GaussDiagram,
    step: usize,
) -> Result<MoveEvent, TraceError> {
    let err = |source| TraceError::InvalidEvent { step, source };
    Ok(match e {
        MoveEvent::R1Insert { .. } => {
            MoveEvent::R1Delete { arrow: inserted_arrows(e, post)[0] }
        }
        MoveEvent::R1Delete { arrow } => {
            let t = pre.pos_of(*arrow, End::Tail).map_err(MoveError::from).map_err(err)?.slot;
            let h = pre.pos_of(*arrow, End::Head).map_err(MoveError::from).map_err(err)?.slot;
            let n2 = pre.slots().len();
            // prefer the non-wrapping reading of the curl
            let (first_slot, chirality) = if (t + 1) % n2 == h && t != n2 - 1 {
                (t, R1Chirality::OverFirst)
            } else if (h + 1) % n2 == t && h != n2 - 1 {
                (h, R1Chirality::UnderFirst)
            } else if (t + 1) % n2 == h {
                (t, R1Chirality::OverFirst)
            } else {
                (h, R1Chirality::UnderFirst)
            };
            // a curl wrapping the slot array re-inserts at gap 0; the
            // transport layer absorbs the rotation
            let gap = if first_slot == n2 - 1 { 0 } else { first_slot };
            MoveEvent::R1Insert {
                gap,
                chirality,
                sign: pre.sign(*arrow).map_err(MoveError::from).map_err(err)?,
                id: Some(*arrow),
            }
        }
        MoveEvent::R2Insert { .. } => {
            let pair = inserted_arrows(e, post);
            MoveEvent::R2Delete { a: pair[0].min(pair[1]), b: pair[0].max(pair[1]) }
        }
        MoveEvent::R2Delete { a, b } => reconstruct_poke(pre, *a, *b, step)?,
        MoveEvent::R3 { arrows, variant } => {
            let v = reflected_variant(pre, post, *arrows, *variant, step)?;
            MoveEvent::R3 { arrows: *arrows, variant: v }
        }
        MoveEvent::Triple { arrows, flavor, variant } => {
            let v = reflected_variant(pre, post, *arrows, *variant, step)?;
            MoveEvent::Triple { arrows: *arrows, flavor: *flavor, variant: v }
        }
    })
}

fn reflected_variant(
    pre: &GaussDiagram,
    post: &GaussDiagram,
    arrows: [ArrowId; 3],
    variant: usize,
    step: usize,
) -> Result<usize, TraceError> {
    let sites = sites_for_arrows(pre, arrows);
    let site = sites.get(variant).ok_or(TraceError::InvalidEvent {
        step,
        source: no_such_site(arrows, variant),
    })?;
    Ok(sites_for_arrows(post, arrows)
        .iter()
        .position(|s| s.arcs == site.arcs)
        .expect("reflected site persists at the same slots"))
}

/// Rebuilds the poke-insert event that recreates the two crossings removed
/// by an R2 deletion, addressed in post-deletion coordinates.
fn reconstruct_poke(
    pre: &GaussDiagram,
    a: ArrowId,
    b: ArrowId,
    step: usize,
) -> Result<MoveEvent, TraceError> {
    let err = |source| TraceError::InvalidEvent { step, source };
    let n2 = pre.slots().len();
    let pos = |id: ArrowId, e: End| -> Result<usize, TraceError> {
        Ok(pre.pos_of(id, e).map_err(MoveError::from).map_err(err)?.slot)
    };
    let (ta, ha) = (pos(a, End::Tail)?, pos(a, End::Head)?);
    let (tb, hb) = (pos(b, End::Tail)?, pos(b, End::Head)?);
    // the arrow whose over-passage comes first along the over pair
    let (first, second) = if (ta + 1) % n2 == tb { (a, b) } else { (b, a) };
    let (tf, hf) = if first == a { (ta, ha) } else { (tb, hb) };
    let hs = if second == a { ha } else { hb };
    let shape = if (hf + 1) % n2 == hs {
        R2Shape::Parallel
    } else {
        R2Shape::Antiparallel
    };
    let removed = [ta, ha, tb, hb];
    let post_gap = |slot_first: usize| -> usize {
        if slot_first == n2 - 1 {
            0
        } else {
            slot_first - removed.iter().filter(|&&r| r < slot_first).count()
        }
    };
    let under_first_slot = match shape {
        R2Shape::Parallel => hf,
        R2Shape::Antiparallel => hs,
    };
    let over_gap = post_gap(tf);
    let under_gap = post_gap(under_first_slot);
    let under_first = over_gap == under_gap && under_first_slot < tf;
    Ok(MoveEvent::R2Insert {
        over_gap,
        under_gap,
        shape,
        first_sign: pre.sign(first).map_err(MoveError::from).map_err(err)?,
        under_first,
        ids: Some((first, second)),
    })
}

// ---------------------------------------------------------------------------
// disjoint commutation
// ---------------------------------------------------------------------------

struct Footprint {
    slots: Vec<usize>,
    gaps: Vec<usize>,
}

impl Footprint {
    fn overlaps(&self, other: &Footprint) -> bool {
        self.slots.iter().any(|s| other.slots.contains(s))
            || self.gaps.iter().any(|g| other.gaps.contains(g))
    }

    /// Maps a footprint taken after `first` back to the coordinates before
    /// it; `None` when a position lands inside first's own insertions.
    fn translated_back(
        &self,
        first: &MoveEvent,
        pre: &GaussDiagram,
        _post: &GaussDiagram,
    ) -> Option<Footprint> {
        let inserted: BTreeSet<usize> = inserted_positions(first).into_iter().collect();
        let removed = removed_positions(first, pre);
        let back_slot = |x: usize| -> Option<usize> {
            if inserted.contains(&x) {
                return None;
            }
            let mut y = x - inserted.range(..x).count();
            for &r in &removed {
                if r <= y {
                    y += 1;
                }
            }
            Some(y)
        };
        let back_gap = |x: usize| -> usize {
            let mut y = x - inserted.range(..x).count();
            for &r in &removed {
                if r < y {
                    y += 1;
                }
            }
            y
        };
        let mut slots = Vec::with_capacity(self.slots.len());
        for &s in &self.slots {
            slots.push(back_slot(s)?);
        }
        let gaps = self.gaps.iter().map(|&g| back_gap(g)).collect();
        Some(Footprint { slots, gaps })
    }
}

fn footprint(d: &GaussDiagram, e: &MoveEvent, step: usize) -> Result<Footprint, TraceError> {
    let err = |source| TraceError::InvalidEvent { step, source };
    let pos = |id: ArrowId, end: End| -> Result<usize, TraceError> {
        Ok(d.pos_of(id, end).map_err(MoveError::from).map_err(err)?.slot)
    };
    Ok(match e {
        MoveEvent::R1Insert { gap, .. } => Footprint { slots: vec![], gaps: vec![*gap] },
        MoveEvent::R1Delete { arrow } => {
            let (t, h) = (pos(*arrow, End::Tail)?, pos(*arrow, End::Head)?);
            let n2 = d.slots().len();
            let inner = if (t + 1) % n2 == h { h } else { t };
            Footprint { slots: vec![t, h], gaps: vec![inner] }
        }
        MoveEvent::R2Insert { over_gap, under_gap, .. } => {
            Footprint { slots: vec![], gaps: vec![*over_gap, *under_gap] }
        }
        MoveEvent::R2Delete { a, b } => {
            let slots = vec![
                pos(*a, End::Tail)?,
                pos(*a, End::Head)?,
                pos(*b, End::Tail)?,
                pos(*b, End::Head)?,
            ];
            let n2 = d.slots().len();
            let mut gaps = Vec::new();
            for &s in &slots {
                if slots.contains(&((s + 1) % n2)) {
                    gaps.push((s + 1) % n2);
                }
            }
            Footprint { slots, gaps }
        }
        MoveEvent::R3 { arrows, variant } | MoveEvent::Triple { arrows, variant, .. } => {
            let sites = sites_for_arrows(d, *arrows);
            let site = sites.get(*variant).ok_or(TraceError::InvalidEvent {
                step,
                source: no_such_site(*arrows, *variant),
            })?;
            let n2 = d.slots().len();
            let slots = site.slots().to_vec();
            let gaps = site.arcs.iter().map(|&[s, _]| (s + 1) % n2).collect();
            Footprint { slots, gaps }
        }
    })
}

/// Position map from post-`first` coordinates back to pre-`first`.
fn back_position(x: usize, first: &MoveEvent, pre: &GaussDiagram) -> usize {
    let inserted: BTreeSet<usize> = inserted_positions(first).into_iter().collect();
    let removed = removed_positions(first, pre);
    let mut y = x - inserted.range(..x).count();
    for &r in &removed {
        if r < y {
            y += 1;
        }
    }
    y
}

/// Position map from pre-`second` coordinates to post-`second`.
fn forward_position(x: usize, second: &MoveEvent, pre: &GaussDiagram) -> usize {
    let removed = removed_positions(second, pre);
    let mut y = x - removed.iter().filter(|&&r| r < x).count();
    let inserted: Vec<usize> = {
        let mut v = inserted_positions(second);
        v.sort_unstable();
        v
    };
    for &i in &inserted {
        if i <= y {
            y += 1;
        }
    }
    y
}

fn translate_event(e: &MoveEvent, f: &dyn Fn(usize) -> usize) -> MoveEvent {
    match e {
        MoveEvent::R1Insert { gap, chirality, sign, id } => MoveEvent::R1Insert {
            gap: f(*gap),
            chirality: *chirality,
            sign: *sign,
            id: *id,
        },
        MoveEvent::R2Insert { over_gap, under_gap, shape, first_sign, under_first, ids } => {
            MoveEvent::R2Insert {
                over_gap: f(*over_gap),
                under_gap: f(*under_gap),
                shape: *shape,
                first_sign: *first_sign,
                under_first: *under_first,
                ids: *ids,
            }
        }
        // id-addressed events carry no positions
        other => other.clone(),
    }
}

/// Pins the labels allocated by an insertion so a replay after commutation
/// reproduces them.
fn pin_ids(e: &MoveEvent, pre: &GaussDiagram, post: &GaussDiagram) -> MoveEvent {
    match e {
        MoveEvent::R1Insert { gap, chirality, sign, id: None } => MoveEvent::R1Insert {
            gap: *gap,
            chirality: *chirality,
            sign: *sign,
            id: Some(post.arrow_ids().find(|a| pre.sign(*a).is_err()).unwrap()),
        },
        MoveEvent::R2Insert { ids: None, over_gap, under_gap, shape, first_sign, under_first } => {
            let mut new = post.arrow_ids().filter(|a| pre.sign(*a).is_err());
            let a = new.next().unwrap();
            let b = new.next().unwrap();
            // insertion order: the smaller fresh label is allocated first
            MoveEvent::R2Insert {
                over_gap: *over_gap,
                under_gap: *under_gap,
                shape: *shape,
                first_sign: *first_sign,
                under_first: *under_first,
                ids: Some((a, b)),
            }
        }
        other => other.clone(),
    }
}

// ---------------------------------------------------------------------------
// star → braid realization
// ---------------------------------------------------------------------------

/// Finds a poke / braid-passage / poke-deletion triple realizing the star
/// passage at `site_arrows` on `d`, matching `target_key` (base-free
/// canonical form of the expected result). Deterministic first match.
fn star_realization(
    d: &GaussDiagram,
    site_arrows: &[ArrowId],
    target_key: &[i64],
) -> Option<(Vec<MoveEvent>, GaussDiagram)> {
    for poke in moves::poke_insert_candidates(d) {
        let Ok(d1) = apply_move(d, &poke) else { continue };
        let new: Vec<ArrowId> = d1.arrow_ids().filter(|a| d.sign(*a).is_err()).collect();
        for site in moves::find_triple_sites(&d1) {
            if !(site.coherent && site.flavor == SiteFlavor::Braid) {
                continue;
            }
            let olds: Vec<ArrowId> =
                site.arrows.iter().filter(|a| site_arrows.contains(a)).copied().collect();
            let news: Vec<ArrowId> =
                site.arrows.iter().filter(|a| new.contains(a)).copied().collect();
            if olds.len() != 2 || news.len() != 1 {
                continue;
            }
            let e2 = MoveEvent::Triple {
                arrows: site.arrows,
                flavor: SiteFlavor::Braid,
                variant: site.variant(&d1),
            };
            let Ok(d2) = apply_move(&d1, &e2) else { continue };
            let leftover_old = site_arrows.iter().find(|a| !olds.contains(a)).copied()?;
            let leftover_new = new.iter().find(|a| !news.contains(a)).copied()?;
            let e3 = MoveEvent::R2Delete {
                a: leftover_old.min(leftover_new),
                b: leftover_old.max(leftover_new),
            };
            let Ok(d3) = apply_move(&d2, &e3) else { continue };
            if d3.canonical_key_basefree() == target_key {
                return Some((vec![poke, e2, e3], d3));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// text format
// ---------------------------------------------------------------------------

impl Trace {
    /// Parses the trace text format: an `init <code>` line (optionally
    /// followed by `base <gap>`), then one event per line; `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let mut initial: Option<GaussDiagram> = None;
        let mut base: Option<usize> = None;
        let mut events = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let fail = |msg: String| TraceError::Parse { line: lineno + 1, msg };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "init" || line.starts_with("init ") {
                if initial.is_some() {
                    return Err(fail("duplicate init line".into()));
                }
                let code = line.strip_prefix("init").unwrap().trim();
                let d = GaussDiagram::parse_gauss_code(code)
                    .map_err(|e| fail(format!("bad code: {e}")))?;
                initial = Some(d);
                continue;
            }
            if let Some(g) = line.strip_prefix("base ") {
                base = Some(g.trim().parse().map_err(|_| fail("bad base gap".into()))?);
                continue;
            }
            if initial.is_none() {
                return Err(fail("expected an init line first".into()));
            }
            events.push(parse_event(line, lineno + 1)?);
        }
        let mut initial = initial.ok_or(TraceError::Parse {
            line: 0,
            msg: "missing init line".to_string(),
        })?;
        if let Some(g) = base {
            initial = initial.with_base_gap(g);
        }
        Ok(Trace { initial, events })
    }

    /// Serializes to the trace text format; `parse(serialize(t)) == t`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let code = self.initial.serialize();
        let mut lines = code.lines();
        let first = lines.next().unwrap_or("");
        if first.starts_with("base ") {
            out.push_str("init\n");
            out.push_str(first);
            out.push('\n');
        } else {
            out.push_str(format!("init {first}\n").trim_start_matches(' '));
            if first.is_empty() {
                out.truncate(0);
                out.push_str("init\n");
            }
            for rest in lines {
                out.push_str(rest);
                out.push('\n');
            }
        }
        for e in &self.events {
            out.push_str(&serialize_event(e));
            out.push('\n');
        }
        out
    }
}

fn parse_event(line: &str, lineno: usize) -> Result<MoveEvent, TraceError> {
    let fail = |msg: &str| TraceError::Parse { line: lineno, msg: msg.to_string() };
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let parse_id = |s: &str| -> Result<ArrowId, TraceError> {
        Ok(ArrowId(s.parse().map_err(|_| fail("bad crossing id"))?))
    };
    let parse_num =
        |s: &str| -> Result<usize, TraceError> { s.parse().map_err(|_| fail("bad number")) };
    match tokens.as_slice() {
        ["R1", "+", gap, rest @ ..] => {
            let gap = parse_num(gap)?;
            let mut chirality = R1Chirality::OverFirst;
            let mut sign = Sign::Plus;
            let mut id = None;
            for tok in rest {
                if let Some(n) = tok.strip_prefix("id=") {
                    id = Some(parse_id(n)?);
                } else {
                    let (c, s) = parse_r1_variant(tok).ok_or_else(|| fail("bad R1 variant"))?;
                    chirality = c;
                    sign = s;
                }
            }
            Ok(MoveEvent::R1Insert { gap, chirality, sign, id })
        }
        ["R1", "-", arrow] => Ok(MoveEvent::R1Delete { arrow: parse_id(arrow)? }),
        ["R2", "+", g1, g2, rest @ ..] => {
            let over_gap = parse_num(g1)?;
            let under_gap = parse_num(g2)?;
            let mut shape = R2Shape::Antiparallel;
            let mut first_sign = Sign::Plus;
            let mut under_first = false;
            let mut ids = None;
            for tok in rest {
                if let Some(pair) = tok.strip_prefix("ids=") {
                    let (a, b) = pair.split_once(',').ok_or_else(|| fail("bad ids="))?;
                    ids = Some((parse_id(a)?, parse_id(b)?));
                } else {
                    let (sh, s, u) =
                        parse_r2_variant(tok).ok_or_else(|| fail("bad R2 variant"))?;
                    shape = sh;
                    first_sign = s;
                    under_first = u;
                }
            }
            Ok(MoveEvent::R2Insert { over_gap, under_gap, shape, first_sign, under_first, ids })
        }
        ["R2", "-", a, b] => Ok(MoveEvent::R2Delete { a: parse_id(a)?, b: parse_id(b)? }),
        ["R3", a, b, c, rest @ ..] => {
            let variant = match rest {
                [] => 0,
                [v] => parse_num(v)?,
                _ => return Err(fail("trailing tokens after R3")),
            };
            Ok(MoveEvent::R3 {
                arrows: sorted3([parse_id(a)?, parse_id(b)?, parse_id(c)?]),
                variant,
            })
        }
        ["T3", flavor, a, b, c, rest @ ..] => {
            let flavor = match *flavor {
                "braid" => SiteFlavor::Braid,
                "star" => SiteFlavor::Star,
                _ => return Err(fail("T3 flavor must be braid or star")),
            };
            let variant = match rest {
                [] => 0,
                [v] => parse_num(v)?,
                _ => return Err(fail("trailing tokens after T3")),
            };
            Ok(MoveEvent::Triple {
                arrows: sorted3([parse_id(a)?, parse_id(b)?, parse_id(c)?]),
                flavor,
                variant,
            })
        }
        _ => Err(fail("unrecognized event")),
    }
}

fn parse_r1_variant(tok: &str) -> Option<(R1Chirality, Sign)> {
    let mut chars = tok.chars();
    let c = match chars.next()? {
        'o' => R1Chirality::OverFirst,
        'u' => R1Chirality::UnderFirst,
        _ => return None,
    };
    let s = match chars.next()? {
        '+' => Sign::Plus,
        '-' => Sign::Minus,
        _ => return None,
    };
    chars.next().is_none().then_some((c, s))
}

fn parse_r2_variant(tok: &str) -> Option<(R2Shape, Sign, bool)> {
    let mut chars = tok.chars();
    let sh = match chars.next()? {
        'a' => R2Shape::Antiparallel,
        'p' => R2Shape::Parallel,
        _ => return None,
    };
    let s = match chars.next()? {
        '+' => Sign::Plus,
        '-' => Sign::Minus,
        _ => return None,
    };
    match chars.next() {
        None => Some((sh, s, false)),
        Some('u') if chars.next().is_none() => Some((sh, s, true)),
        _ => None,
    }
}

fn serialize_event(e: &MoveEvent) -> String {
    match e {
        MoveEvent::R1Insert { gap, chirality, sign, id } => {
            let c = match chirality {
                R1Chirality::OverFirst => 'o',
                R1Chirality::UnderFirst => 'u',
            };
            let mut s = format!("R1 + {gap} {c}{}", sign.symbol());
            if let Some(id) = id {
                s.push_str(&format!(" id={id}"));
            }
            s
        }
        MoveEvent::R1Delete { arrow } => format!("R1 - {arrow}"),
        MoveEvent::R2Insert { over_gap, under_gap, shape, first_sign, under_first, ids } => {
            let sh = match shape {
                R2Shape::Antiparallel => 'a',
                R2Shape::Parallel => 'p',
            };
            let u = if *under_first { "u" } else { "" };
            let mut s = format!("R2 + {over_gap} {under_gap} {sh}{}{u}", first_sign.symbol());
            if let Some((a, b)) = ids {
                s.push_str(&format!(" ids={a},{b}"));
            }
            s
        }
        MoveEvent::R2Delete { a, b } => format!("R2 - {a} {b}"),
        MoveEvent::R3 { arrows, variant } => {
            format!("R3 {} {} {} {variant}", arrows[0], arrows[1], arrows[2])
        }
        MoveEvent::Triple { arrows, flavor, variant } => {
            format!("T3 {} {} {} {} {variant}", flavor.token(), arrows[0], arrows[1], arrows[2])
        }
    }
}
