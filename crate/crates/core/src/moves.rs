//! Elementary move schemas and triple-site machinery.
//!
//! Moves act on single-component diagrams. R1 inserts or deletes a curl, R2
//! inserts or deletes a two-strand poke, R3 slides a strand across a
//! crossing, and the triple passage reflects a coherent triangle while
//! flipping all three crossings (over/under and sign), changing the writhe
//! by ±6.
//!
//! A triple site is a triangle: three crossings pairwise joined by three
//! strand arcs, each arc holding two of the six passages in adjacent slots.
//! Sites come in two flavors read off the arc passages: braid-like sites
//! have one over-over arc, one under-under arc and one mixed arc (the three
//! strands admit a height order), star-like sites have three mixed arcs (the
//! over/under relation is cyclic). Zones and the per-site writhe are defined
//! for braid-like sites only; star moves are converted first.

use crate::diagram::{ArrowId, BasePoint, DiagramError, End, Endpoint, GaussDiagram, Sign};
use crate::faces;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MoveError {
    #[error("moves require a single-component diagram")]
    NotAKnot,
    #[error("gap {0} out of range")]
    BadGap(usize),
    #[error("crossing id {0} already in use")]
    IdInUse(ArrowId),
    #[error("crossing {0} is not a curl")]
    NotACurl(ArrowId),
    #[error("crossings {0} and {1} do not form a removable poke pair")]
    NotAPokePair(ArrowId, ArrowId),
    #[error("no triangle site with variant {variant} on crossings {a} {b} {c}")]
    NoSuchSite { a: ArrowId, b: ArrowId, c: ArrowId, variant: usize },
    #[error("site flavor does not match the event")]
    FlavorMismatch,
    #[error("triple passage requires a coherent site (equal signs)")]
    NotCoherent,
    #[error("operation requires a braid-like site")]
    NotBraidLike,
    #[error("R3 requires a braid-shaped triangle (a strand over or under both others)")]
    NotSlidable,
    #[error("zone pair must be distinct")]
    SameZone,
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

/// Move families. The writhe delta is pinned per kind: ±1 for R1, 0 for R2
/// and R3, ±6 for triple passages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MoveKind {
    R1Insert,
    R1Delete,
    R2Insert,
    R2Delete,
    R3,
    Triple,
}

/// Curl layout: whether the over-passage comes first along the walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum R1Chirality {
    OverFirst,
    UnderFirst,
}

/// Relative orientation of the two strands of a poke: `Parallel` means the
/// under-strand meets the two new crossings in the same order as the
/// over-strand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum R2Shape {
    Parallel,
    Antiparallel,
}

/// Triangle flavor, read off the strand-arc passages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SiteFlavor {
    Braid,
    Star,
}

impl SiteFlavor {
    pub fn token(self) -> &'static str {
        match self {
            SiteFlavor::Braid => "braid",
            SiteFlavor::Star => "star",
        }
    }
}

/// Zone labels around a braid-like site. The middle strand separates A from
/// B, the upper strand separates A from C; equivalently A is the zone away
/// from the lower strand, B away from the upper, C away from the middle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Zone {
    A,
    B,
    C,
}

impl Zone {
    pub const ALL: [Zone; 3] = [Zone::A, Zone::B, Zone::C];
}

/// Strand roles of a braid-like site by height: the upper strand passes over
/// both others, the lower under both.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum StrandRole {
    Upper,
    Middle,
    Lower,
}

/// A triangle inside a diagram: three crossings pairwise connected by three
/// strand arcs of two adjacent slots each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripleSite {
    /// The three crossing ids, ascending.
    pub arrows: [ArrowId; 3],
    /// Strand arcs as slot pairs `(s, s+1 mod 2n)` in walk order, sorted by
    /// start slot.
    pub arcs: [[usize; 2]; 3],
    pub flavor: SiteFlavor,
    /// All three signs equal.
    pub coherent: bool,
    /// The common sign when coherent.
    pub sign: Option<Sign>,
}

impl TripleSite {
    /// Slots occupied by the site's own passages.
    pub fn slots(&self) -> [usize; 6] {
        [
            self.arcs[0][0],
            self.arcs[0][1],
            self.arcs[1][0],
            self.arcs[1][1],
            self.arcs[2][0],
            self.arcs[2][1],
        ]
    }

    /// Index of this site among `sites_for_arrows` of its own arrow triple.
    pub fn variant(&self, d: &GaussDiagram) -> usize {
        sites_for_arrows(d, self.arrows)
            .iter()
            .position(|s| s == self)
            .expect("site taken from this diagram")
    }
}

/// One elementary step of a homotopy.
///
/// Insertions may carry explicit ids; without them the smallest free labels
/// are taken. Explicit ids keep replays stable under trace rewrites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MoveEvent {
    R1Insert {
        gap: usize,
        chirality: R1Chirality,
        sign: Sign,
        id: Option<ArrowId>,
    },
    R1Delete {
        arrow: ArrowId,
    },
    R2Insert {
        over_gap: usize,
        under_gap: usize,
        shape: R2Shape,
        first_sign: Sign,
        /// Only meaningful when both gaps coincide: the under pair precedes
        /// the over pair along the walk.
        under_first: bool,
        ids: Option<(ArrowId, ArrowId)>,
    },
    R2Delete {
        a: ArrowId,
        b: ArrowId,
    },
    R3 {
        arrows: [ArrowId; 3],
        variant: usize,
    },
    Triple {
        arrows: [ArrowId; 3],
        flavor: SiteFlavor,
        variant: usize,
    },
}

impl MoveEvent {
    pub fn kind(&self) -> MoveKind {
        match self {
            MoveEvent::R1Insert { .. } => MoveKind::R1Insert,
            MoveEvent::R1Delete { .. } => MoveKind::R1Delete,
            MoveEvent::R2Insert { .. } => MoveKind::R2Insert,
            MoveEvent::R2Delete { .. } => MoveKind::R2Delete,
            MoveEvent::R3 { .. } => MoveKind::R3,
            MoveEvent::Triple { .. } => MoveKind::Triple,
        }
    }

    pub fn is_triple(&self) -> bool {
        matches!(self, MoveEvent::Triple { .. })
    }

    pub fn is_r1(&self) -> bool {
        matches!(self, MoveEvent::R1Insert { .. } | MoveEvent::R1Delete { .. })
    }
}

// ---------------------------------------------------------------------------
// slot surgery helpers (shared with the trace machinery)
// ---------------------------------------------------------------------------

/// Inserts `new` at gap `gap` of a knot diagram; the base point stays put
/// (an insertion at the base gap lands after the base point).
pub(crate) fn insert_slots(
    d: &GaussDiagram,
    gap: usize,
    new: &[(Endpoint, Sign)],
) -> Result<GaussDiagram, MoveError> {
    if !d.is_knot() {
        return Err(MoveError::NotAKnot);
    }
    let n2 = d.slots().len();
    if gap > n2.max(1) - 1 {
        return Err(MoveError::BadGap(gap));
    }
    let mut slots: Vec<Endpoint> = d.slots().to_vec();
    let mut signs: BTreeMap<ArrowId, Sign> =
        d.arrow_ids().map(|a| (a, d.sign(a).unwrap())).collect();
    for (k, &(ep, sign)) in new.iter().enumerate() {
        slots.insert(gap + k, ep);
        signs.entry(ep.arrow).or_insert(sign);
    }
    let base = d.base();
    let new_gap = if base.gap > gap { base.gap + new.len() } else { base.gap };
    Ok(GaussDiagram::from_parts(
        vec![slots],
        signs,
        BasePoint { component: 0, gap: new_gap },
    )?)
}

/// Removes the given slots (and the arrows that lose both passages).
pub(crate) fn delete_slots(d: &GaussDiagram, remove: &[usize]) -> Result<GaussDiagram, MoveError> {
    if !d.is_knot() {
        return Err(MoveError::NotAKnot);
    }
    let removed: BTreeSet<usize> = remove.iter().copied().collect();
    let mut slots = Vec::new();
    let mut kept_arrows = BTreeSet::new();
    for (s, &ep) in d.slots().iter().enumerate() {
        if !removed.contains(&s) {
            slots.push(ep);
            kept_arrows.insert(ep.arrow);
        }
    }
    let signs: BTreeMap<ArrowId, Sign> =
        kept_arrows.iter().map(|&a| (a, d.sign(a).unwrap())).collect();
    let base = d.base();
    let shift = removed.iter().filter(|&&p| p < base.gap).count();
    Ok(GaussDiagram::from_parts(
        vec![slots],
        signs,
        BasePoint { component: 0, gap: base.gap - shift },
    )?)
}

fn fresh_ids(d: &GaussDiagram, count: usize) -> Vec<ArrowId> {
    let mut used: BTreeSet<u32> = d.arrow_ids().map(|a| a.0).collect();
    let mut out = Vec::with_capacity(count);
    let mut c = 1u32;
    while out.len() < count {
        if !used.contains(&c) {
            used.insert(c);
            out.push(ArrowId(c));
        }
        c += 1;
    }
    out
}

// ---------------------------------------------------------------------------
// site detection
// ---------------------------------------------------------------------------

/// All triangle sites on the given three crossings, deterministically
/// ordered. The `variant` field of R3/triple events indexes this list.
pub fn sites_for_arrows(d: &GaussDiagram, arrows: [ArrowId; 3]) -> Vec<TripleSite> {
    if !d.is_knot() {
        return Vec::new();
    }
    sites_for_arrows_with(d, arrows, &triangle_faces(d))
}

/// Gap triples that bound a triangular face. A triangle is only a move site
/// when its three sides enclose an empty region; combinatorially, when some
/// face of the surface is bounded by exactly the three inner arcs.
fn triangle_faces(d: &GaussDiagram) -> BTreeSet<[usize; 3]> {
    let mut out = BTreeSet::new();
    for face in faces::surface(d).faces {
        if face.boundary.len() == 3 {
            let mut gaps = [
                face.boundary[0].gap,
                face.boundary[1].gap,
                face.boundary[2].gap,
            ];
            gaps.sort_unstable();
            if gaps[0] != gaps[1] && gaps[1] != gaps[2] {
                out.insert(gaps);
            }
        }
    }
    out
}

fn sites_for_arrows_with(
    d: &GaussDiagram,
    mut arrows: [ArrowId; 3],
    triangles: &BTreeSet<[usize; 3]>,
) -> Vec<TripleSite> {
    arrows.sort();
    if arrows[0] == arrows[1] || arrows[1] == arrows[2] {
        return Vec::new();
    }
    let n2 = d.slots().len();
    let mut slot_arrow: BTreeMap<usize, ArrowId> = BTreeMap::new();
    for &a in &arrows {
        let (Ok(t), Ok(h)) = (d.pos_of(a, End::Tail), d.pos_of(a, End::Head)) else {
            return Vec::new();
        };
        slot_arrow.insert(t.slot, a);
        slot_arrow.insert(h.slot, a);
    }
    // adjacent slot pairs hosting two different arrows of the triple
    let mut pairs = Vec::new();
    for (&s, &a) in &slot_arrow {
        let next = (s + 1) % n2;
        if next == s {
            continue;
        }
        if let Some(&b) = slot_arrow.get(&next) {
            if a != b {
                pairs.push([s, next]);
            }
        }
    }
    // exact covers of the six slots by three of these pairs
    let slots: BTreeSet<usize> = slot_arrow.keys().copied().collect();
    let mut sites = Vec::new();
    let m = pairs.len();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let chosen = [pairs[i], pairs[j], pairs[k]];
                let covered: BTreeSet<usize> = chosen.iter().flatten().copied().collect();
                if covered != slots {
                    continue;
                }
                // each pair of crossings shares exactly one arc
                let mut arc_pairs: Vec<(ArrowId, ArrowId)> = chosen
                    .iter()
                    .map(|&[s, t]| {
                        let (x, y) = (slot_arrow[&s], slot_arrow[&t]);
                        (x.min(y), x.max(y))
                    })
                    .collect();
                arc_pairs.sort();
                arc_pairs.dedup();
                if arc_pairs.len() != 3 {
                    continue;
                }
                // the three inner arcs must bound an empty triangle
                let mut inner = [
                    (chosen[0][0] + 1) % n2,
                    (chosen[1][0] + 1) % n2,
                    (chosen[2][0] + 1) % n2,
                ];
                inner.sort_unstable();
                if !triangles.contains(&inner) {
                    continue;
                }
                let mut arcs = chosen;
                arcs.sort_by_key(|&[s, _]| s);
                sites.push(build_site(d, arrows, arcs));
            }
        }
    }
    sites.sort_by_key(|s| s.arcs);
    sites
}

fn build_site(d: &GaussDiagram, arrows: [ArrowId; 3], arcs: [[usize; 2]; 3]) -> TripleSite {
    let mut over_over = 0;
    let mut under_under = 0;
    for &arc in &arcs {
        match (d.slots()[arc[0]].end, d.slots()[arc[1]].end) {
            (End::Tail, End::Tail) => over_over += 1,
            (End::Head, End::Head) => under_under += 1,
            _ => {}
        }
    }
    let flavor = if over_over == 1 && under_under == 1 {
        SiteFlavor::Braid
    } else {
        debug_assert_eq!((over_over, under_under), (0, 0));
        SiteFlavor::Star
    };
    let signs: Vec<Sign> = arrows.iter().map(|&a| d.sign(a).unwrap()).collect();
    let coherent = signs[0] == signs[1] && signs[1] == signs[2];
    TripleSite {
        arrows,
        arcs,
        flavor,
        coherent,
        sign: coherent.then_some(signs[0]),
    }
}

/// All triangle sites of the diagram, ordered by their slot footprint.
pub fn find_triple_sites(d: &GaussDiagram) -> Vec<TripleSite> {
    if !d.is_knot() {
        return Vec::new();
    }
    let triangles = triangle_faces(d);
    if triangles.is_empty() {
        return Vec::new();
    }
    let arrows: Vec<ArrowId> = d.arrow_ids().collect();
    let mut sites = Vec::new();
    for i in 0..arrows.len() {
        for j in i + 1..arrows.len() {
            for k in j + 1..arrows.len() {
                sites.extend(sites_for_arrows_with(
                    d,
                    [arrows[i], arrows[j], arrows[k]],
                    &triangles,
                ));
            }
        }
    }
    sites.sort_by_key(|s| (s.slots().iter().min().copied(), s.arcs));
    sites
}

/// Curls: crossings whose two passages sit in adjacent slots.
pub fn find_curls(d: &GaussDiagram) -> Vec<ArrowId> {
    if !d.is_knot() {
        return Vec::new();
    }
    let n2 = d.slots().len();
    let mut out = Vec::new();
    for a in d.arrow_ids() {
        let t = d.pos_of(a, End::Tail).unwrap().slot;
        let h = d.pos_of(a, End::Head).unwrap().slot;
        if (t + 1) % n2 == h || (h + 1) % n2 == t {
            out.push(a);
        }
    }
    out
}

/// Removable poke pairs: adjacent over-passages, adjacent under-passages,
/// opposite signs.
pub fn find_poke_pairs(d: &GaussDiagram) -> Vec<(ArrowId, ArrowId)> {
    if !d.is_knot() {
        return Vec::new();
    }
    let n2 = d.slots().len();
    let arrows: Vec<ArrowId> = d.arrow_ids().collect();
    let mut out = Vec::new();
    for i in 0..arrows.len() {
        for j in i + 1..arrows.len() {
            let (a, b) = (arrows[i], arrows[j]);
            if d.sign(a).unwrap() == d.sign(b).unwrap() {
                continue;
            }
            let ta = d.pos_of(a, End::Tail).unwrap().slot;
            let tb = d.pos_of(b, End::Tail).unwrap().slot;
            let ha = d.pos_of(a, End::Head).unwrap().slot;
            let hb = d.pos_of(b, End::Head).unwrap().slot;
            let adj = |x: usize, y: usize| (x + 1) % n2 == y || (y + 1) % n2 == x;
            if adj(ta, tb) && adj(ha, hb) {
                out.push((a, b));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// move application
// ---------------------------------------------------------------------------

/// Applies one elementary move. Triple events require a coherent site of the
/// stated flavor; R3 requires a braid-shaped triangle.
pub fn apply_move(d: &GaussDiagram, e: &MoveEvent) -> Result<GaussDiagram, MoveError> {
    if !d.is_knot() {
        return Err(MoveError::NotAKnot);
    }
    match e {
        MoveEvent::R1Insert { gap, chirality, sign, id } => {
            let id = match id {
                Some(id) => {
                    if d.sign(*id).is_ok() {
                        return Err(MoveError::IdInUse(*id));
                    }
                    *id
                }
                None => fresh_ids(d, 1)[0],
            };
            let (first, second) = match chirality {
                R1Chirality::OverFirst => (End::Tail, End::Head),
                R1Chirality::UnderFirst => (End::Head, End::Tail),
            };
            insert_slots(
                d,
                *gap,
                &[
                    (Endpoint { arrow: id, end: first }, *sign),
                    (Endpoint { arrow: id, end: second }, *sign),
                ],
            )
        }
        MoveEvent::R1Delete { arrow } => {
            if !find_curls(d).contains(arrow) {
                return Err(MoveError::NotACurl(*arrow));
            }
            let t = d.pos_of(*arrow, End::Tail)?.slot;
            let h = d.pos_of(*arrow, End::Head)?.slot;
            delete_slots(d, &[t, h])
        }
        MoveEvent::R2Insert { over_gap, under_gap, shape, first_sign, under_first, ids } => {
            let n2 = d.slots().len();
            let max_gap = n2.max(1) - 1;
            if *over_gap > max_gap {
                return Err(MoveError::BadGap(*over_gap));
            }
            if *under_gap > max_gap {
                return Err(MoveError::BadGap(*under_gap));
            }
            let (a, b) = match ids {
                Some((a, b)) => {
                    if a == b {
                        return Err(MoveError::IdInUse(*a));
                    }
                    for id in [a, b] {
                        if d.sign(*id).is_ok() {
                            return Err(MoveError::IdInUse(*id));
                        }
                    }
                    (*a, *b)
                }
                None => {
                    let f = fresh_ids(d, 2);
                    (f[0], f[1])
                }
            };
            let sa = *first_sign;
            let sb = sa.flip();
            let overs = [
                (Endpoint { arrow: a, end: End::Tail }, sa),
                (Endpoint { arrow: b, end: End::Tail }, sb),
            ];
            let unders = match shape {
                R2Shape::Parallel => [
                    (Endpoint { arrow: a, end: End::Head }, sa),
                    (Endpoint { arrow: b, end: End::Head }, sb),
                ],
                R2Shape::Antiparallel => [
                    (Endpoint { arrow: b, end: End::Head }, sb),
                    (Endpoint { arrow: a, end: End::Head }, sa),
                ],
            };
            if over_gap == under_gap {
                let mut all = Vec::with_capacity(4);
                if *under_first {
                    all.extend_from_slice(&unders);
                    all.extend_from_slice(&overs);
                } else {
                    all.extend_from_slice(&overs);
                    all.extend_from_slice(&unders);
                }
                insert_slots(d, *over_gap, &all)
            } else {
                // build the doubly-inserted slot list in one pass; inserting
                // one pair alone would not validate
                let mut slots: Vec<Endpoint> = d.slots().to_vec();
                let mut signs: BTreeMap<ArrowId, Sign> =
                    d.arrow_ids().map(|x| (x, d.sign(x).unwrap())).collect();
                let (hi, hi_pair, lo, lo_pair) = if over_gap > under_gap {
                    (*over_gap, &overs, *under_gap, &unders)
                } else {
                    (*under_gap, &unders, *over_gap, &overs)
                };
                for (k, &(ep, sign)) in hi_pair.iter().enumerate() {
                    slots.insert(hi + k, ep);
                    signs.entry(ep.arrow).or_insert(sign);
                }
                for (k, &(ep, sign)) in lo_pair.iter().enumerate() {
                    slots.insert(lo + k, ep);
                    signs.entry(ep.arrow).or_insert(sign);
                }
                let base = d.base();
                let mut new_gap = base.gap;
                if base.gap > hi {
                    new_gap += 2;
                }
                if base.gap > lo {
                    new_gap += 2;
                }
                Ok(GaussDiagram::from_parts(
                    vec![slots],
                    signs,
                    BasePoint { component: 0, gap: new_gap },
                )?)
            }
        }
        MoveEvent::R2Delete { a, b } => {
            let key = (*a.min(b), *a.max(b));
            let pair_ok = find_poke_pairs(d).into_iter().any(|p| p == key);
            if !pair_ok {
                return Err(MoveError::NotAPokePair(*a, *b));
            }
            let slots = [
                d.pos_of(*a, End::Tail)?.slot,
                d.pos_of(*a, End::Head)?.slot,
                d.pos_of(*b, End::Tail)?.slot,
                d.pos_of(*b, End::Head)?.slot,
            ];
            delete_slots(d, &slots)
        }
        MoveEvent::R3 { arrows, variant } => {
            let sites = sites_for_arrows(d, *arrows);
            let site = sites.get(*variant).ok_or(MoveError::NoSuchSite {
                a: arrows[0],
                b: arrows[1],
                c: arrows[2],
                variant: *variant,
            })?;
            if site.flavor != SiteFlavor::Braid {
                return Err(MoveError::NotSlidable);
            }
            Ok(reflect_triangle(d, site, false)?)
        }
        MoveEvent::Triple { arrows, flavor, variant } => {
            let sites = sites_for_arrows(d, *arrows);
            let site = sites.get(*variant).ok_or(MoveError::NoSuchSite {
                a: arrows[0],
                b: arrows[1],
                c: arrows[2],
                variant: *variant,
            })?;
            if site.flavor != *flavor {
                return Err(MoveError::FlavorMismatch);
            }
            if !site.coherent {
                return Err(MoveError::NotCoherent);
            }
            Ok(reflect_triangle(d, site, true)?)
        }
    }
}

/// Reflects the triangle: within each strand arc the two passages swap
/// places. A triple passage (`flip`) additionally swaps over/under at all
/// three crossings and negates their signs; R3 keeps crossing data intact.
fn reflect_triangle(
    d: &GaussDiagram,
    site: &TripleSite,
    flip: bool,
) -> Result<GaussDiagram, DiagramError> {
    let mut slots: Vec<Endpoint> = d.slots().to_vec();
    for &[s, t] in &site.arcs {
        let (x, y) = (slots[s], slots[t]);
        slots[s] = y;
        slots[t] = x;
        if flip {
            slots[s].end = slots[s].end.flip();
            slots[t].end = slots[t].end.flip();
        }
    }
    let mut signs: BTreeMap<ArrowId, Sign> =
        d.arrow_ids().map(|a| (a, d.sign(a).unwrap())).collect();
    if flip {
        for &a in &site.arrows {
            signs.insert(a, d.sign(a)?.flip());
        }
    }
    GaussDiagram::from_parts(vec![slots], signs, d.base())
}

/// +1 when a triple passage raises the writhe by 6, −1 when it lowers it,
/// 0 for every isotopy move.
pub fn move_index(d: &GaussDiagram, e: &MoveEvent) -> Result<i64, MoveError> {
    match e {
        MoveEvent::Triple { arrows, flavor, variant } => {
            let sites = sites_for_arrows(d, *arrows);
            let site = sites.get(*variant).ok_or(MoveError::NoSuchSite {
                a: arrows[0],
                b: arrows[1],
                c: arrows[2],
                variant: *variant,
            })?;
            if site.flavor != *flavor {
                return Err(MoveError::FlavorMismatch);
            }
            match site.sign {
                Some(Sign::Minus) => Ok(1),
                Some(Sign::Plus) => Ok(-1),
                None => Err(MoveError::NotCoherent),
            }
        }
        _ => Ok(0),
    }
}

/// Writhe change of a move, computable before applying it.
pub fn writhe_delta(d: &GaussDiagram, e: &MoveEvent) -> Result<i64, MoveError> {
    match e {
        MoveEvent::R1Insert { sign, .. } => Ok(sign.value()),
        MoveEvent::R1Delete { arrow } => Ok(-d.sign(*arrow)?.value()),
        MoveEvent::R2Insert { .. } | MoveEvent::R2Delete { .. } | MoveEvent::R3 { .. } => Ok(0),
        MoveEvent::Triple { .. } => Ok(6 * move_index(d, e)?),
    }
}

// ---------------------------------------------------------------------------
// zones and the per-site writhe
// ---------------------------------------------------------------------------

fn strand_roles(d: &GaussDiagram, site: &TripleSite) -> Result<[StrandRole; 3], MoveError> {
    if site.flavor != SiteFlavor::Braid {
        return Err(MoveError::NotBraidLike);
    }
    let mut roles = [StrandRole::Middle; 3];
    for (i, &[s, t]) in site.arcs.iter().enumerate() {
        roles[i] = match (d.slots()[s].end, d.slots()[t].end) {
            (End::Tail, End::Tail) => StrandRole::Upper,
            (End::Head, End::Head) => StrandRole::Lower,
            _ => StrandRole::Middle,
        };
    }
    Ok(roles)
}

/// Calibrated label map: A always faces away from the middle strand; on a
/// positive site B faces away from the lower strand, on a negative site away
/// from the upper one (the passage swaps the two height roles, so the
/// labelling travels with the move).
fn zone_label(opposite: StrandRole, sign: Option<Sign>) -> Zone {
    let flip = sign == Some(Sign::Minus);
    match opposite {
        StrandRole::Middle => Zone::A,
        StrandRole::Lower => {
            if flip {
                Zone::C
            } else {
                Zone::B
            }
        }
        StrandRole::Upper => {
            if flip {
                Zone::B
            } else {
                Zone::C
            }
        }
    }
}

/// Zone label plus the slots it contains, one entry per zone (possibly
/// empty), ordered A, B, C.
pub fn zone_intervals(
    d: &GaussDiagram,
    site: &TripleSite,
) -> Result<Vec<(Zone, Vec<usize>)>, MoveError> {
    let roles = strand_roles(d, site)?;
    let n2 = d.slots().len();
    let mut out: Vec<(Zone, Vec<usize>)> = Vec::with_capacity(3);
    for i in 0..3 {
        let next = (i + 1) % 3;
        // slots strictly between arc i's end and arc next's start
        let from = (site.arcs[i][1] + 1) % n2;
        let to = site.arcs[next][0];
        let mut slots = Vec::new();
        let mut s = from;
        while s != to {
            slots.push(s);
            s = (s + 1) % n2;
        }
        out.push((zone_label(roles[3 - i - next], site.sign), slots));
    }
    out.sort_by_key(|(z, _)| *z);
    Ok(out)
}

/// Maps every non-site slot to its zone.
pub fn zones(d: &GaussDiagram, site: &TripleSite) -> Result<BTreeMap<usize, Zone>, MoveError> {
    let mut map = BTreeMap::new();
    for (zone, slots) in zone_intervals(d, site)? {
        for s in slots {
            map.insert(s, zone);
        }
    }
    Ok(map)
}

/// Gap index just inside each zone arc (meaningful even for empty zones),
/// ordered A, B, C.
pub fn zone_gaps(d: &GaussDiagram, site: &TripleSite) -> Result<[(Zone, usize); 3], MoveError> {
    let roles = strand_roles(d, site)?;
    let n2 = d.slots().len();
    let mut out = Vec::with_capacity(3);
    for i in 0..3 {
        let next = (i + 1) % 3;
        let gap = (site.arcs[i][1] + 1) % n2;
        out.push((zone_label(roles[3 - i - next], site.sign), gap));
    }
    out.sort_by_key(|(z, _)| *z);
    Ok([out[0], out[1], out[2]])
}

/// Sum of the signs of non-site arrows with tail in zone `x` and head in
/// zone `y`.
pub fn zone_writhe(d: &GaussDiagram, site: &TripleSite, x: Zone, y: Zone) -> Result<i64, MoveError> {
    if x == y {
        return Err(MoveError::SameZone);
    }
    let zone_of = zones(d, site)?;
    let mut sum = 0;
    for a in d.arrow_ids() {
        if site.arrows.contains(&a) {
            continue;
        }
        let t = d.pos_of(a, End::Tail)?.slot;
        let h = d.pos_of(a, End::Head)?.slot;
        if zone_of.get(&t) == Some(&x) && zone_of.get(&h) == Some(&y) {
            sum += d.sign(a)?.value();
        }
    }
    Ok(sum)
}

/// The writhe of the diagram with respect to the site: the sum of the signs
/// of all external arrows whose two passages lie in different zones.
/// Requires a coherent braid-like site.
pub fn triple_writhe(d: &GaussDiagram, site: &TripleSite) -> Result<i64, MoveError> {
    if site.flavor != SiteFlavor::Braid {
        return Err(MoveError::NotBraidLike);
    }
    if !site.coherent {
        return Err(MoveError::NotCoherent);
    }
    let mut sum = 0;
    for &x in &Zone::ALL {
        for &y in &Zone::ALL {
            if x != y {
                sum += zone_writhe(d, site, x, y)?;
            }
        }
    }
    Ok(sum)
}

/// Result of smoothing the two designated crossings of a braid-like site:
/// a three-component link whose components correspond to the zones.
#[derive(Clone, Debug)]
pub struct SmoothedSite {
    pub link: GaussDiagram,
    /// Component index of each zone, ordered A, B, C.
    pub component_of_zone: [usize; 3],
}

/// Number of interleaved chord pairs among the site's three crossings; a
/// braid-like triangle has either one or two, and a passage toggles between
/// the shapes.
pub fn site_shape(d: &GaussDiagram, site: &TripleSite) -> usize {
    let n2 = d.slots().len();
    let pos = |a: ArrowId, e: End| d.pos_of(a, e).unwrap().slot;
    let on_arc = |from: usize, to: usize, x: usize| {
        let mut s = (from + 1) % n2;
        while s != to {
            if s == x {
                return true;
            }
            s = (s + 1) % n2;
        }
        false
    };
    let mut count = 0;
    for i in 0..3 {
        for j in i + 1..3 {
            let (a, b) = (site.arrows[i], site.arrows[j]);
            let (at, ah) = (pos(a, End::Tail), pos(a, End::Head));
            if on_arc(at, ah, pos(b, End::Tail)) != on_arc(at, ah, pos(b, End::Head)) {
                count += 1;
            }
        }
    }
    count
}

/// Smooths the two designated crossings of the site: the middle strand's
/// pair on two-interleave sites and the upper strand's pair on
/// one-interleave sites (the unique choices, calibrated, for which the
/// result is always a three-component link satisfying the linking
/// identity). The zone writhes w(A,C) and w(C,A) both equal the linking
/// number of the components carrying zones A and C.
pub fn smoothed_link_of_site(
    d: &GaussDiagram,
    site: &TripleSite,
) -> Result<SmoothedSite, MoveError> {
    if !site.coherent {
        return Err(MoveError::NotCoherent);
    }
    let roles = strand_roles(d, site)?;
    let wanted = if site_shape(d, site) == 2 {
        StrandRole::Middle
    } else {
        StrandRole::Upper
    };
    let strand_idx = roles.iter().position(|&r| r == wanted).unwrap();
    let [s, t] = site.arcs[strand_idx];
    let c1 = d.slots()[s].arrow;
    let c2 = d.slots()[t].arrow;

    let zg = zone_gaps(d, site)?;
    let tracked: Vec<(usize, usize)> = zg.iter().map(|&(_, g)| (0, g)).collect();
    let (once, mapped) = d.smooth_tracked(c1, &tracked)?;
    let (link, mapped) = once.smooth_tracked(c2, &mapped)?;
    if link.n_components() != 3 {
        return Err(MoveError::Diagram(DiagramError::Inconsistent(format!(
            "site smoothing produced {} components",
            link.n_components()
        ))));
    }
    let mut component_of_zone = [0usize; 3];
    for (i, &(zone, _)) in zg.iter().enumerate() {
        let idx = match zone {
            Zone::A => 0,
            Zone::B => 1,
            Zone::C => 2,
        };
        component_of_zone[idx] = mapped[i].0;
    }
    Ok(SmoothedSite { link, component_of_zone })
}

// ---------------------------------------------------------------------------
// move enumeration
// ---------------------------------------------------------------------------

/// Poke insertions compatible with the diagram's surface: one candidate per
/// ordered pair of arc occurrences on a common face, with shape and signs
/// forced by the boundary orientations. Starting from a spherical diagram
/// these insertions keep it spherical.
pub fn poke_insert_candidates(d: &GaussDiagram) -> Vec<MoveEvent> {
    let mut specs = BTreeSet::new();
    for face in faces::surface(d).faces {
        for da in &face.boundary {
            for db in &face.boundary {
                let first_sign = if db.forward { Sign::Plus } else { Sign::Minus };
                let shape = if da.forward == db.forward {
                    R2Shape::Antiparallel
                } else {
                    R2Shape::Parallel
                };
                if da.gap == db.gap {
                    for under_first in [false, true] {
                        specs.insert((da.gap, db.gap, shape, first_sign, under_first));
                    }
                } else {
                    specs.insert((da.gap, db.gap, shape, first_sign, false));
                }
            }
        }
    }
    specs
        .into_iter()
        .map(|(over_gap, under_gap, shape, first_sign, under_first)| MoveEvent::R2Insert {
            over_gap,
            under_gap,
            shape,
            first_sign,
            under_first,
            ids: None,
        })
        .collect()
}

/// Every applicable move, in the fixed exploration order: poke deletions,
/// strand slides, triple passages, poke insertions, curl deletions, curl
/// insertions.
pub fn enumerate_moves(d: &GaussDiagram) -> Vec<MoveEvent> {
    let mut out = Vec::new();
    for (a, b) in find_poke_pairs(d) {
        out.push(MoveEvent::R2Delete { a, b });
    }
    let sites = find_triple_sites(d);
    for site in &sites {
        if site.flavor == SiteFlavor::Braid {
            out.push(MoveEvent::R3 { arrows: site.arrows, variant: site.variant(d) });
        }
    }
    for site in &sites {
        if site.coherent {
            out.push(MoveEvent::Triple {
                arrows: site.arrows,
                flavor: site.flavor,
                variant: site.variant(d),
            });
        }
    }
    out.extend(poke_insert_candidates(d));
    for a in find_curls(d) {
        out.push(MoveEvent::R1Delete { arrow: a });
    }
    let n2 = d.slots().len();
    for gap in 0..n2.max(1) {
        for chirality in [R1Chirality::OverFirst, R1Chirality::UnderFirst] {
            for sign in [Sign::Plus, Sign::Minus] {
                out.push(MoveEvent::R1Insert { gap, chirality, sign, id: None });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::fixtures::*;
    use crate::invariants::{arf, v2, v2_oracle};

    /// Trefoil as the closure of a four-letter positive braid word; its
    /// first three crossings form a coherent braid-like triangle with one
    /// external arrow.
    pub(crate) const BRAID_TREFOIL: &str = "O1+ O2+ U4+ U1+ O3+ O4+ U2+ U3+";

    fn braid_trefoil() -> GaussDiagram {
        GaussDiagram::parse_gauss_code(BRAID_TREFOIL).unwrap()
    }

    #[test]
    fn braid_trefoil_is_a_trefoil() {
        let d = braid_trefoil();
        assert_eq!(crate::faces::genus(&d), 0);
        assert_eq!(v2_oracle(&d).unwrap(), 1);
        assert_eq!(v2(&d).unwrap(), 1);
    }

    #[test]
    fn standard_trefoil_site_is_star() {
        let sites = find_triple_sites(&right_trefoil());
        assert_eq!(sites.len(), 2, "the symmetric triangle admits two pairings");
        for site in &sites {
            assert_eq!(site.flavor, SiteFlavor::Star);
            assert!(site.coherent);
            assert_eq!(site.sign, Some(Sign::Plus));
        }
    }

    fn braid_trefoil_site(d: &GaussDiagram) -> TripleSite {
        find_triple_sites(d)
            .into_iter()
            .find(|s| s.arrows == [ArrowId(1), ArrowId(2), ArrowId(3)])
            .expect("triangle on the first three crossings")
    }

    #[test]
    fn braid_trefoil_has_braid_site() {
        let d = braid_trefoil();
        let site = braid_trefoil_site(&d);
        assert_eq!(site.flavor, SiteFlavor::Braid);
        assert!(site.coherent);
        assert_eq!(site.sign, Some(Sign::Plus));
        assert_eq!(site_shape(&d, &site), 2);
        // every detected site sits on an empty triangle, so the passage is
        // an honest local move: the surface stays a sphere
        for site in find_triple_sites(&d) {
            if site.coherent {
                let e = MoveEvent::Triple {
                    arrows: site.arrows,
                    flavor: site.flavor,
                    variant: site.variant(&d),
                };
                assert_eq!(crate::faces::genus(&apply_move(&d, &e).unwrap()), 0);
            }
        }
    }

    #[test]
    fn unknot_has_no_sites() {
        assert!(find_triple_sites(&GaussDiagram::unknot()).is_empty());
    }

    #[test]
    fn mixed_sign_triangle_not_coherent() {
        // braid trefoil with crossing 2 switched has a non-coherent triangle
        let d = crate::invariants::switched(&braid_trefoil(), ArrowId(2)).unwrap();
        let sites = sites_for_arrows(&d, [ArrowId(1), ArrowId(2), ArrowId(3)]);
        assert!(!sites.is_empty());
        assert!(sites.iter().all(|s| !s.coherent));
        for s in sites {
            let e = MoveEvent::Triple {
                arrows: s.arrows,
                flavor: s.flavor,
                variant: s.variant(&d),
            };
            assert!(matches!(apply_move(&d, &e), Err(MoveError::NotCoherent)));
        }
    }

    #[test]
    fn triple_move_on_star_trefoil_unknots() {
        let d = right_trefoil();
        let e = MoveEvent::Triple {
            arrows: [ArrowId(1), ArrowId(2), ArrowId(3)],
            flavor: SiteFlavor::Star,
            variant: 0,
        };
        let after = apply_move(&d, &e).unwrap();
        assert_eq!(after.writhe(), -3);
        assert_eq!(v2_oracle(&after).unwrap(), 0, "one passage away from the trefoil is trivial");
        assert_eq!(move_index(&d, &e).unwrap(), -1);
        assert_eq!(writhe_delta(&d, &e).unwrap(), -6);
        // involution
        let sites = find_triple_sites(&after);
        let back = apply_move(
            &after,
            &MoveEvent::Triple {
                arrows: sites[0].arrows,
                flavor: sites[0].flavor,
                variant: sites[0].variant(&after),
            },
        )
        .unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn triple_move_flips_arf_and_matches_site_writhe() {
        let d = braid_trefoil();
        let site = braid_trefoil_site(&d);
        assert_eq!(triple_writhe(&d, &site).unwrap(), 1);
        let e = MoveEvent::Triple {
            arrows: site.arrows,
            flavor: SiteFlavor::Braid,
            variant: site.variant(&d),
        };
        assert_eq!(move_index(&d, &e).unwrap(), -1);
        let after = apply_move(&d, &e).unwrap();
        assert_eq!(after.writhe(), d.writhe() - 6);
        // Δv2 = ind · W on this passage
        assert_eq!(v2_oracle(&after).unwrap(), 0);
        assert_eq!(v2(&after).unwrap(), 0);
        assert_ne!(arf(&after).unwrap(), arf(&d).unwrap());
        assert_eq!(crate::faces::genus(&after), 0);
    }

    #[test]
    fn zone_labels_on_braid_trefoil() {
        let d = braid_trefoil();
        let site = braid_trefoil_site(&d);
        let by_zone: BTreeMap<Zone, Vec<usize>> =
            zone_intervals(&d, &site).unwrap().into_iter().collect();
        assert!(by_zone[&Zone::A].is_empty(), "A faces away from the middle strand");
        assert_eq!(by_zone[&Zone::B], vec![2], "under-passage of the external arrow");
        assert_eq!(by_zone[&Zone::C], vec![5], "over-passage of the external arrow");
        assert_eq!(zone_writhe(&d, &site, Zone::C, Zone::B).unwrap(), 1);
        assert_eq!(zone_writhe(&d, &site, Zone::B, Zone::C).unwrap(), 0);
        assert!(matches!(zone_writhe(&d, &site, Zone::A, Zone::A), Err(MoveError::SameZone)));
        // bookkeeping identity for the second base position
        let w = |x, y| zone_writhe(&d, &site, x, y).unwrap();
        assert_eq!(
            triple_writhe(&d, &site).unwrap(),
            1 + 2 * w(Zone::B, Zone::A) + 2 * w(Zone::B, Zone::C)
                + w(Zone::A, Zone::C)
                + w(Zone::C, Zone::A)
        );
    }

    #[test]
    fn zones_reject_star_sites() {
        let d = right_trefoil();
        let site = &find_triple_sites(&d)[0];
        assert!(matches!(zones(&d, site), Err(MoveError::NotBraidLike)));
        assert!(matches!(triple_writhe(&d, site), Err(MoveError::NotBraidLike)));
        assert!(matches!(smoothed_link_of_site(&d, site), Err(MoveError::NotBraidLike)));
    }

    #[test]
    fn curl_insert_delete_round_trip() {
        let d = figure_eight();
        for gap in 0..8 {
            for chirality in [R1Chirality::OverFirst, R1Chirality::UnderFirst] {
                for sign in [Sign::Plus, Sign::Minus] {
                    let e = MoveEvent::R1Insert { gap, chirality, sign, id: None };
                    let after = apply_move(&d, &e).unwrap();
                    assert_eq!(after.writhe(), d.writhe() + sign.value());
                    assert_eq!(crate::faces::genus(&after), 0, "curls preserve the sphere");
                    let id = after
                        .arrow_ids()
                        .find(|a| d.sign(*a).is_err())
                        .expect("new crossing");
                    let back = apply_move(&after, &MoveEvent::R1Delete { arrow: id }).unwrap();
                    assert_eq!(back, d);
                }
            }
        }
    }

    #[test]
    fn poke_insert_delete_round_trip() {
        let d = right_trefoil();
        for e in poke_insert_candidates(&d) {
            let after = apply_move(&d, &e).unwrap();
            assert_eq!(after.writhe(), d.writhe());
            assert_eq!(crate::faces::genus(&after), 0, "face pokes preserve the sphere: {e:?}");
            let new: Vec<ArrowId> = after.arrow_ids().filter(|a| d.sign(*a).is_err()).collect();
            assert_eq!(new.len(), 2);
            let back = apply_move(&after, &MoveEvent::R2Delete { a: new[0], b: new[1] }).unwrap();
            assert_eq!(back, d);
        }
    }

    #[test]
    fn poke_delete_requires_pattern() {
        let d = right_trefoil();
        assert!(matches!(
            apply_move(&d, &MoveEvent::R2Delete { a: ArrowId(1), b: ArrowId(2) }),
            Err(MoveError::NotAPokePair(_, _))
        ));
    }

    #[test]
    fn r3_preserves_signs_and_v2() {
        let d = braid_trefoil();
        let sites = find_triple_sites(&d);
        let site = sites.iter().find(|s| s.flavor == SiteFlavor::Braid).unwrap();
        let e = MoveEvent::R3 { arrows: site.arrows, variant: site.variant(&d) };
        let after = apply_move(&d, &e).unwrap();
        assert_eq!(after.writhe(), d.writhe());
        assert_eq!(v2(&after).unwrap(), v2(&d).unwrap());
        assert_eq!(v2_oracle(&after).unwrap(), v2_oracle(&d).unwrap());
        assert_eq!(crate::faces::genus(&after), 0);
        // sliding back returns the original
        let sites2 = sites_for_arrows(&after, site.arrows);
        let back_variant = sites2.iter().position(|s| s.flavor == SiteFlavor::Braid).unwrap();
        let back =
            apply_move(&after, &MoveEvent::R3 { arrows: site.arrows, variant: back_variant })
                .unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn r3_rejects_star_triangles() {
        let d = right_trefoil();
        let e = MoveEvent::R3 { arrows: [ArrowId(1), ArrowId(2), ArrowId(3)], variant: 0 };
        assert!(matches!(apply_move(&d, &e), Err(MoveError::NotSlidable)));
    }

    #[test]
    fn smoothed_site_has_three_components_and_linking_match() {
        let d = braid_trefoil();
        let site = braid_trefoil_site(&d);
        let sm = smoothed_link_of_site(&d, &site).unwrap();
        assert_eq!(sm.link.n_components(), 3);
        let [ca, _cb, cc] = sm.component_of_zone;
        let lk = crate::invariants::linking_number(&sm.link, ca, cc).unwrap();
        assert_eq!(zone_writhe(&d, &site, Zone::A, Zone::C).unwrap(), lk);
        assert_eq!(zone_writhe(&d, &site, Zone::C, Zone::A).unwrap(), lk);
        // both sides of the passage smooth to three components
        let e = MoveEvent::Triple {
            arrows: site.arrows,
            flavor: site.flavor,
            variant: site.variant(&d),
        };
        let after = apply_move(&d, &e).unwrap();
        let site2 = braid_trefoil_site(&after);
        assert_eq!(site_shape(&after, &site2), 1);
        let sm2 = smoothed_link_of_site(&after, &site2).unwrap();
        assert_eq!(sm2.link.n_components(), 3);
    }

    #[test]
    fn enumeration_is_deterministic() {
        let d = figure_eight();
        assert_eq!(enumerate_moves(&d), enumerate_moves(&d));
        assert!(!enumerate_moves(&GaussDiagram::unknot()).is_empty());
    }
}
