//! Signed directed Gauss diagrams for knots and (smoothed) links.
//!
//! A diagram is one or more oriented circles of endpoint slots. Every
//! crossing contributes exactly two slots, joined by an arrow directed
//! over→under (`Tail` = over-passage, `Head` = under-passage) and signed by
//! the crossing writhe. The base point lives in a gap between two adjacent
//! slots and is part of the diagram value.

use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Crossing sign (the writhe contribution of the crossing).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// Which passage of a crossing a slot holds. `Tail` is the over-passage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum End {
    Tail,
    Head,
}

impl End {
    pub fn flip(self) -> End {
        match self {
            End::Tail => End::Head,
            End::Head => End::Tail,
        }
    }
}

/// Crossing label. Labels are small positive integers taken from the input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArrowId(pub u32);

impl fmt::Display for ArrowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One endpoint slot on a circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub arrow: ArrowId,
    pub end: End,
}

/// Slot address: component index plus slot index on that component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub component: usize,
    pub slot: usize,
}

/// Base point: the gap just before slot `gap` on `component`. An empty
/// component has the single gap 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasePoint {
    pub component: usize,
    pub gap: usize,
}

/// Arrow view assembled from the slot table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arrow {
    pub id: ArrowId,
    pub sign: Sign,
    pub tail: Pos,
    pub head: Pos,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: malformed token `{token}`")]
    Malformed { line: usize, token: String },
    #[error("crossing label {0} must appear exactly twice (found {1} occurrences)")]
    LabelOccurrence(u32, usize),
    #[error("crossing label {0} must appear once as O and once as U")]
    OverUnderMismatch(u32),
    #[error("crossing label {0} carries different signs at its two occurrences")]
    SignMismatch(u32),
    #[error("invalid base directive `{0}`")]
    BadBase(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiagramError {
    #[error("unknown crossing id {0}")]
    UnknownArrow(ArrowId),
    #[error("operation requires a single-component diagram")]
    MultiComponent,
    #[error("invalid component index {0}")]
    BadComponent(usize),
    #[error("inconsistent diagram structure: {0}")]
    Inconsistent(String),
}

/// Options for [`GaussDiagram::canonical`].
#[derive(Clone, Copy, Debug)]
pub struct CanonOptions {
    /// Keep the base point as part of the canonical value. With `false` the
    /// base is quotiented out and reset to gap 0 of the first component.
    pub keep_base: bool,
}

impl Default for CanonOptions {
    fn default() -> Self {
        CanonOptions { keep_base: true }
    }
}

/// A signed directed Gauss diagram.
///
/// Structural equality (`==`) compares the stored representation. Semantic
/// equality up to rotation and relabelling is equality of
/// [`canonical`](GaussDiagram::canonical) forms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussDiagram {
    components: Vec<Vec<Endpoint>>,
    signs: BTreeMap<ArrowId, Sign>,
    base: BasePoint,
}

impl GaussDiagram {
    /// The 0-crossing unknot.
    pub fn unknot() -> GaussDiagram {
        GaussDiagram {
            components: vec![Vec::new()],
            signs: BTreeMap::new(),
            base: BasePoint { component: 0, gap: 0 },
        }
    }

    pub fn from_parts(
        components: Vec<Vec<Endpoint>>,
        signs: BTreeMap<ArrowId, Sign>,
        base: BasePoint,
    ) -> Result<GaussDiagram, DiagramError> {
        let d = GaussDiagram { components, signs, base };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<(), DiagramError> {
        if self.components.is_empty() {
            return Err(DiagramError::Inconsistent("no components".into()));
        }
        let mut seen: BTreeMap<ArrowId, (usize, usize)> = BTreeMap::new();
        for comp in &self.components {
            for ep in comp {
                if !self.signs.contains_key(&ep.arrow) {
                    return Err(DiagramError::UnknownArrow(ep.arrow));
                }
                let entry = seen.entry(ep.arrow).or_insert((0, 0));
                match ep.end {
                    End::Tail => entry.0 += 1,
                    End::Head => entry.1 += 1,
                }
            }
        }
        for (&id, &(t, h)) in &seen {
            if t != 1 || h != 1 {
                return Err(DiagramError::Inconsistent(format!(
                    "crossing {id} has {t} tails and {h} heads"
                )));
            }
        }
        if seen.len() != self.signs.len() {
            return Err(DiagramError::Inconsistent(
                "sign table does not match the slot table".into(),
            ));
        }
        let b = self.base;
        if b.component >= self.components.len() {
            return Err(DiagramError::BadComponent(b.component));
        }
        let gaps = self.components[b.component].len().max(1);
        if b.gap >= gaps {
            return Err(DiagramError::Inconsistent(format!("base gap {} out of range", b.gap)));
        }
        Ok(())
    }

    pub fn n_arrows(&self) -> usize {
        self.signs.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn is_knot(&self) -> bool {
        self.components.len() == 1
    }

    pub fn component(&self, c: usize) -> &[Endpoint] {
        &self.components[c]
    }

    /// Slot sequence of a single-component diagram.
    pub fn slots(&self) -> &[Endpoint] {
        debug_assert!(self.is_knot());
        &self.components[0]
    }

    pub fn base(&self) -> BasePoint {
        self.base
    }

    pub fn with_base_gap(&self, gap: usize) -> GaussDiagram {
        let mut d = self.clone();
        d.base = BasePoint { component: d.base.component, gap };
        debug_assert!(d.validate().is_ok());
        d
    }

    pub fn arrow_ids(&self) -> impl Iterator<Item = ArrowId> + '_ {
        self.signs.keys().copied()
    }

    pub fn sign(&self, id: ArrowId) -> Result<Sign, DiagramError> {
        self.signs.get(&id).copied().ok_or(DiagramError::UnknownArrow(id))
    }

    pub fn endpoint_at(&self, p: Pos) -> Endpoint {
        self.components[p.component][p.slot]
    }

    pub fn pos_of(&self, id: ArrowId, end: End) -> Result<Pos, DiagramError> {
        for (c, comp) in self.components.iter().enumerate() {
            for (s, ep) in comp.iter().enumerate() {
                if ep.arrow == id && ep.end == end {
                    return Ok(Pos { component: c, slot: s });
                }
            }
        }
        Err(DiagramError::UnknownArrow(id))
    }

    pub fn arrow(&self, id: ArrowId) -> Result<Arrow, DiagramError> {
        Ok(Arrow {
            id,
            sign: self.sign(id)?,
            tail: self.pos_of(id, End::Tail)?,
            head: self.pos_of(id, End::Head)?,
        })
    }

    /// Sum of the crossing signs.
    pub fn writhe(&self) -> i64 {
        self.signs.values().map(|s| s.value()).sum()
    }

    /// Smallest positive label not currently used.
    pub fn fresh_arrow_id(&self) -> ArrowId {
        let mut candidate = 1u32;
        while self.signs.contains_key(&ArrowId(candidate)) {
            candidate += 1;
        }
        ArrowId(candidate)
    }

    /// Swaps over/under on every crossing and negates every sign.
    pub fn mirror(&self) -> GaussDiagram {
        let components = self
            .components
            .iter()
            .map(|comp| {
                comp.iter()
                    .map(|ep| Endpoint { arrow: ep.arrow, end: ep.end.flip() })
                    .collect()
            })
            .collect();
        let signs = self.signs.iter().map(|(&id, &s)| (id, s.flip())).collect();
        GaussDiagram { components, signs, base: self.base }
    }

    /// Rotates component `c` so that the old slot `r` becomes slot 0. The
    /// base point is carried along.
    pub fn rotated(&self, c: usize, r: usize) -> GaussDiagram {
        let mut d = self.clone();
        let len = d.components[c].len();
        if len == 0 {
            return d;
        }
        let r = r % len;
        d.components[c].rotate_left(r);
        if d.base.component == c {
            d.base.gap = (d.base.gap + len - r) % len;
        }
        d
    }

    /// Renames crossings according to `map`. Labels absent from the map keep
    /// their name; the map must be injective on the diagram's labels.
    pub fn relabeled(&self, map: &BTreeMap<ArrowId, ArrowId>) -> GaussDiagram {
        let rename = |id: ArrowId| map.get(&id).copied().unwrap_or(id);
        let components = self
            .components
            .iter()
            .map(|comp| {
                comp.iter()
                    .map(|ep| Endpoint { arrow: rename(ep.arrow), end: ep.end })
                    .collect()
            })
            .collect();
        let signs = self.signs.iter().map(|(&id, &s)| (rename(id), s)).collect();
        let d = GaussDiagram { components, signs, base: self.base };
        debug_assert!(d.validate().is_ok());
        d
    }

    /// Splices `other` into `self` at `self`'s base point. Both inputs must
    /// be single-component. `other`'s crossings are renamed to start above
    /// `id_offset`.
    pub fn connected_sum_relabel(
        &self,
        other: &GaussDiagram,
        id_offset: u32,
    ) -> Result<GaussDiagram, DiagramError> {
        if !self.is_knot() || !other.is_knot() {
            return Err(DiagramError::MultiComponent);
        }
        let mut map = BTreeMap::new();
        for (k, id) in other.arrow_ids().enumerate() {
            map.insert(id, ArrowId(id_offset + 1 + k as u32));
        }
        let other = other.relabeled(&map);
        let b = self.base.gap;
        let ob = other.base.gap;
        let olen = other.components[0].len();
        let mut slots = Vec::with_capacity(self.components[0].len() + olen);
        slots.extend_from_slice(&self.components[0][..b]);
        if olen > 0 {
            slots.extend_from_slice(&other.components[0][ob..]);
            slots.extend_from_slice(&other.components[0][..ob]);
        }
        slots.extend_from_slice(&self.components[0][b..]);
        let mut signs = self.signs.clone();
        signs.extend(other.signs.iter().map(|(&id, &s)| (id, s)));
        let d = GaussDiagram {
            components: vec![slots],
            signs,
            base: BasePoint { component: 0, gap: b },
        };
        debug_assert!(d.validate().is_ok());
        Ok(d)
    }

    /// Connected sum with fresh labels for `other`.
    pub fn connected_sum(&self, other: &GaussDiagram) -> Result<GaussDiagram, DiagramError> {
        let offset = self.arrow_ids().map(|a| a.0).max().unwrap_or(0);
        self.connected_sum_relabel(other, offset)
    }

    /// Oriented smoothing at crossing `id`: the arrow is deleted and the two
    /// strands are reconnected respecting orientation. The component count
    /// changes by exactly ±1.
    pub fn smooth(&self, id: ArrowId) -> Result<GaussDiagram, DiagramError> {
        Ok(self.smooth_tracked(id, &[])?.0)
    }

    /// Smoothing that additionally maps the given gaps (arcs) of the old
    /// diagram to their location in the result. The base point is always
    /// tracked.
    pub fn smooth_tracked(
        &self,
        id: ArrowId,
        gaps: &[(usize, usize)],
    ) -> Result<(GaussDiagram, Vec<(usize, usize)>), DiagramError> {
        let t = self.pos_of(id, End::Tail)?;
        let h = self.pos_of(id, End::Head)?;
        let mut signs = self.signs.clone();
        signs.remove(&id);

        // New component layout plus, per new component, the provenance of
        // each slot so that gap addresses can be transported.
        let mut components: Vec<Vec<Endpoint>> = Vec::new();
        let mut origin: Vec<Vec<Pos>> = Vec::new();

        let same = t.component == h.component;
        let (split_a, split_b);
        if same {
            let c = t.component;
            let len = self.components[c].len();
            let (i, j) = (t.slot, h.slot);
            let collect = |from: usize, to: usize| -> Vec<usize> {
                // slots strictly after `from` and strictly before `to`, circularly
                let mut v = Vec::new();
                let mut k = (from + 1) % len;
                while k != to {
                    v.push(k);
                    k = (k + 1) % len;
                }
                v
            };
            let a_slots = collect(i, j); // between tail and head
            let b_slots = collect(j, i); // between head and tail
            for (ci, comp) in self.components.iter().enumerate() {
                if ci == c {
                    components.push(a_slots.iter().map(|&k| comp[k]).collect());
                    origin.push(a_slots.iter().map(|&k| Pos { component: ci, slot: k }).collect());
                    components.push(b_slots.iter().map(|&k| comp[k]).collect());
                    origin.push(b_slots.iter().map(|&k| Pos { component: ci, slot: k }).collect());
                } else {
                    components.push(comp.clone());
                    origin.push((0..comp.len()).map(|k| Pos { component: ci, slot: k }).collect());
                }
            }
            split_a = c;
            split_b = c + 1;
        } else {
            let (c1, i) = (t.component, t.slot);
            let (c2, j) = (h.component, h.slot);
            let lo = c1.min(c2);
            let l1 = self.components[c1].len();
            let l2 = self.components[c2].len();
            // walk from succ(tail) around c1, then succ(head) around c2
            let mut merged_idx: Vec<(usize, usize)> = Vec::new();
            for k in 1..l1 {
                merged_idx.push((c1, (i + k) % l1));
            }
            for k in 1..l2 {
                merged_idx.push((c2, (j + k) % l2));
            }
            for (ci, comp) in self.components.iter().enumerate() {
                if ci == lo {
                    components.push(merged_idx.iter().map(|&(cc, k)| self.components[cc][k]).collect());
                    origin.push(merged_idx.iter().map(|&(cc, k)| Pos { component: cc, slot: k }).collect());
                } else if ci == c1.max(c2) {
                    continue;
                } else {
                    components.push(comp.clone());
                    origin.push((0..comp.len()).map(|k| Pos { component: ci, slot: k }).collect());
                }
            }
            split_a = lo;
            split_b = lo;
        }

        // Position lookup for surviving slots.
        let mut new_pos: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
        for (nc, orig) in origin.iter().enumerate() {
            for (ns, p) in orig.iter().enumerate() {
                new_pos.insert((p.component, p.slot), (nc, ns));
            }
        }

        // Transport a gap: follow the arc forward to the first surviving slot.
        let map_gap = |comp: usize, gap: usize| -> (usize, usize) {
            let len = self.components[comp].len();
            if len == 0 {
                // empty component: unchanged unless components shifted
                let (nc, _) = *new_pos
                    .iter()
                    .find(|((c, _), _)| *c == comp)
                    .map(|(_, v)| v)
                    .unwrap_or(&(self.shifted_empty_component(comp, t, h, same), 0));
                return (nc, 0);
            }
            let mut cur = Pos { component: comp, slot: gap % len };
            let mut first_redirect: Option<End> = None;
            for _ in 0..4 {
                if cur == t {
                    if first_redirect.is_none() {
                        first_redirect = Some(End::Tail);
                    }
                    let hl = self.components[h.component].len();
                    cur = Pos { component: h.component, slot: (h.slot + 1) % hl };
                } else if cur == h {
                    if first_redirect.is_none() {
                        first_redirect = Some(End::Head);
                    }
                    let tl = self.components[t.component].len();
                    cur = Pos { component: t.component, slot: (t.slot + 1) % tl };
                } else {
                    let &(nc, ns) = new_pos.get(&(cur.component, cur.slot)).expect("surviving slot");
                    return (nc, ns);
                }
            }
            // The arc closed into an empty circle.
            match first_redirect {
                // entered at the tail: the arc lies between head and tail
                Some(End::Tail) => (split_b, 0),
                _ => (split_a, 0),
            }
        };

        let base = {
            let (c, g) = map_gap(self.base.component, self.base.gap);
            BasePoint { component: c, gap: g }
        };
        let mapped: Vec<(usize, usize)> = gaps.iter().map(|&(c, g)| map_gap(c, g)).collect();

        let d = GaussDiagram { components, signs, base };
        d.validate()?;
        Ok((d, mapped))
    }

    fn shifted_empty_component(&self, comp: usize, t: Pos, h: Pos, same: bool) -> usize {
        // index of an untouched component after the smoothing reshuffle
        if same {
            if comp > t.component {
                comp + 1
            } else {
                comp
            }
        } else {
            let hi = t.component.max(h.component);
            if comp > hi {
                comp - 1
            } else {
                comp
            }
        }
    }

    /// Rotation-minimal relabelled representative. Diagrams differing only by
    /// rotation of components and by crossing relabelling share a canonical
    /// form; with `keep_base` the base point stays part of the value.
    pub fn canonical(&self, opts: CanonOptions) -> CanonicalForm {
        let ncomp = self.components.len();
        let mut best: Option<Candidate> = None;
        let mut perm: Vec<usize> = (0..ncomp).collect();
        permute(&mut perm, 0, &mut |perm| {
            let mut rotations = vec![0usize; ncomp];
            enumerate_rotations(self, perm, 0, &mut rotations, &mut |rot| {
                let cand = encode_candidate(self, perm, rot, opts.keep_base);
                if best.as_ref().map_or(true, |b| cand.key < b.key) {
                    best = Some(cand);
                }
            });
        });
        let cand = best.expect("at least one candidate");
        build_canonical(self, cand, opts.keep_base)
    }

    /// Convenience: canonical key with the base point kept.
    pub fn canonical_key(&self) -> Vec<i64> {
        self.canonical(CanonOptions { keep_base: true }).into_key()
    }

    /// Convenience: canonical key with the base point quotiented out.
    pub fn canonical_key_basefree(&self) -> Vec<i64> {
        self.canonical(CanonOptions { keep_base: false }).into_key()
    }

    /// Semantic equality: equal canonical forms (base point kept).
    pub fn same_diagram(&self, other: &GaussDiagram) -> bool {
        self.canonical_key() == other.canonical_key()
    }

    /// Semantic equality with the base point quotiented out.
    pub fn same_diagram_basefree(&self, other: &GaussDiagram) -> bool {
        self.canonical_key_basefree() == other.canonical_key_basefree()
    }

    /// Parses the GC text format. One component per line, tokens like `O3+`;
    /// a `base <gap>` directive line sets the base gap (flattened index);
    /// lines starting with `#` are comments; a line holding only `.` is an
    /// empty component; an empty file is the unknot.
    pub fn parse_gauss_code(text: &str) -> Result<GaussDiagram, ParseError> {
        let mut components: Vec<Vec<(u32, End, Sign)>> = Vec::new();
        let mut base_flat: Option<usize> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("base ") {
                base_flat = Some(
                    rest.trim()
                        .parse::<usize>()
                        .map_err(|_| ParseError::BadBase(rest.trim().to_string()))?,
                );
                continue;
            }
            if line == "." {
                components.push(Vec::new());
                continue;
            }
            let mut comp = Vec::new();
            for token in line.split(' ') {
                if token.is_empty() {
                    return Err(ParseError::Malformed {
                        line: lineno + 1,
                        token: "<empty>".to_string(),
                    });
                }
                comp.push(parse_token(token).ok_or_else(|| ParseError::Malformed {
                    line: lineno + 1,
                    token: token.to_string(),
                })?);
            }
            components.push(comp);
        }
        if components.is_empty() {
            components.push(Vec::new());
        }

        // signed pairing checks
        let mut occ: BTreeMap<u32, Vec<(End, Sign)>> = BTreeMap::new();
        for comp in &components {
            for &(id, end, sign) in comp {
                occ.entry(id).or_default().push((end, sign));
            }
        }
        let mut signs = BTreeMap::new();
        for (&id, ends) in &occ {
            if ends.len() != 2 {
                return Err(ParseError::LabelOccurrence(id, ends.len()));
            }
            if ends[0].0 == ends[1].0 {
                return Err(ParseError::OverUnderMismatch(id));
            }
            if ends[0].1 != ends[1].1 {
                return Err(ParseError::SignMismatch(id));
            }
            signs.insert(ArrowId(id), ends[0].1);
        }

        let components: Vec<Vec<Endpoint>> = components
            .into_iter()
            .map(|comp| {
                comp.into_iter()
                    .map(|(id, end, _)| Endpoint { arrow: ArrowId(id), end })
                    .collect()
            })
            .collect();

        let base = match base_flat {
            None => BasePoint { component: 0, gap: 0 },
            Some(flat) => flat_to_base(&components, flat)
                .ok_or_else(|| ParseError::BadBase(flat.to_string()))?,
        };

        Ok(GaussDiagram { components, signs, base })
    }

    /// Serializes to the GC text format. `parse_gauss_code(serialize(d))`
    /// reproduces `d` exactly.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let multi = self.components.len() > 1;
        for comp in &self.components {
            if comp.is_empty() {
                if multi {
                    out.push_str(".\n");
                }
                continue;
            }
            let tokens: Vec<String> = comp
                .iter()
                .map(|ep| {
                    let c = match ep.end {
                        End::Tail => 'O',
                        End::Head => 'U',
                    };
                    let sign = self.signs[&ep.arrow].symbol();
                    format!("{c}{}{sign}", ep.arrow)
                })
                .collect();
            out.push_str(&tokens.join(" "));
            out.push('\n');
        }
        let flat = base_to_flat(&self.components, self.base);
        if flat != 0 {
            out.push_str(&format!("base {flat}\n"));
        }
        out
    }
}

impl fmt::Display for GaussDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

fn parse_token(token: &str) -> Option<(u32, End, Sign)> {
    let mut chars = token.chars();
    let end = match chars.next()? {
        'O' => End::Tail,
        'U' => End::Head,
        _ => return None,
    };
    let body: String = chars.collect();
    if body.len() < 2 {
        return None;
    }
    let (digits, sign_char) = body.split_at(body.len() - 1);
    let sign = match sign_char {
        "+" => Sign::Plus,
        "-" => Sign::Minus,
        _ => return None,
    };
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let id: u32 = digits.parse().ok()?;
    if id == 0 {
        return None;
    }
    Some((id, end, sign))
}

fn flat_to_base(components: &[Vec<Endpoint>], flat: usize) -> Option<BasePoint> {
    let mut rest = flat;
    for (c, comp) in components.iter().enumerate() {
        let gaps = comp.len().max(1);
        if rest < gaps {
            return Some(BasePoint { component: c, gap: rest });
        }
        rest -= gaps;
    }
    None
}

fn base_to_flat(components: &[Vec<Endpoint>], base: BasePoint) -> usize {
    components[..base.component]
        .iter()
        .map(|c| c.len().max(1))
        .sum::<usize>()
        + base.gap
}

// ---------------------------------------------------------------------------
// canonical forms
// ---------------------------------------------------------------------------

/// Canonical representative plus the morphism from the original diagram.
#[derive(Clone, Debug)]
pub struct CanonicalForm {
    diagram: GaussDiagram,
    key: Vec<i64>,
    /// old component index → new component index
    comp_perm: Vec<usize>,
    /// per old component: the old slot that became slot 0
    rotations: Vec<usize>,
    /// old label → new label
    arrow_map: BTreeMap<ArrowId, ArrowId>,
}

impl CanonicalForm {
    pub fn diagram(&self) -> &GaussDiagram {
        &self.diagram
    }

    pub fn key(&self) -> &[i64] {
        &self.key
    }

    pub fn into_key(self) -> Vec<i64> {
        self.key
    }

    pub fn arrow_map(&self) -> &BTreeMap<ArrowId, ArrowId> {
        &self.arrow_map
    }

    pub fn map_pos(&self, p: Pos, original: &GaussDiagram) -> Pos {
        let len = original.components[p.component].len();
        let r = self.rotations[p.component];
        Pos {
            component: self.comp_perm[p.component],
            slot: (p.slot + len - r) % len,
        }
    }

    pub fn map_gap(&self, component: usize, gap: usize, original: &GaussDiagram) -> (usize, usize) {
        let len = original.components[component].len();
        if len == 0 {
            return (self.comp_perm[component], 0);
        }
        let r = self.rotations[component];
        (self.comp_perm[component], (gap + len - r) % len)
    }
}

impl PartialEq for CanonicalForm {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for CanonicalForm {}
impl PartialOrd for CanonicalForm {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for CanonicalForm {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}
impl std::hash::Hash for CanonicalForm {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

struct Candidate {
    key: Vec<i64>,
    perm: Vec<usize>,
    rotations: Vec<usize>,
}

fn permute(perm: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        f(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, f);
        perm.swap(k, i);
    }
}

fn enumerate_rotations(
    d: &GaussDiagram,
    perm: &[usize],
    idx: usize,
    rotations: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if idx == perm.len() {
        f(rotations);
        return;
    }
    let comp = perm[idx];
    let len = d.components[comp].len().max(1);
    for r in 0..len {
        rotations[comp] = r;
        enumerate_rotations(d, perm, idx + 1, rotations, f);
    }
}

fn encode_candidate(d: &GaussDiagram, perm: &[usize], rotations: &[usize], keep_base: bool) -> Candidate {
    // perm is given as the visit order: perm[k] = old component visited k-th
    let mut labels: BTreeMap<ArrowId, i64> = BTreeMap::new();
    let mut key = Vec::with_capacity(d.components.iter().map(|c| c.len() * 3 + 1).sum::<usize>() + 3);
    for &comp in perm {
        let len = d.components[comp].len();
        let r = rotations[comp];
        for k in 0..len {
            let ep = d.components[comp][(r + k) % len];
            let next = labels.len() as i64 + 1;
            let label = *labels.entry(ep.arrow).or_insert(next);
            key.push(match ep.end {
                End::Tail => 0,
                End::Head => 1,
            });
            key.push(label);
            key.push(d.signs[&ep.arrow].value());
        }
        key.push(-1); // component separator
    }
    if keep_base {
        let b = d.base;
        let visit_index = perm.iter().position(|&c| c == b.component).unwrap() as i64;
        let len = d.components[b.component].len();
        let gap = if len == 0 { 0 } else { (b.gap + len - rotations[b.component]) % len };
        key.push(visit_index);
        key.push(gap as i64);
    }
    Candidate { key, perm: perm.to_vec(), rotations: rotations.to_vec() }
}

fn build_canonical(d: &GaussDiagram, cand: Candidate, keep_base: bool) -> CanonicalForm {
    let mut comp_perm = vec![0usize; d.components.len()];
    for (new_idx, &old) in cand.perm.iter().enumerate() {
        comp_perm[old] = new_idx;
    }
    let mut arrow_map: BTreeMap<ArrowId, ArrowId> = BTreeMap::new();
    let mut components: Vec<Vec<Endpoint>> = Vec::with_capacity(d.components.len());
    let mut signs = BTreeMap::new();
    for &comp in &cand.perm {
        let len = d.components[comp].len();
        let r = cand.rotations[comp];
        let mut new_comp = Vec::with_capacity(len);
        for k in 0..len {
            let ep = d.components[comp][(r + k) % len];
            let next = ArrowId(arrow_map.len() as u32 + 1);
            let label = *arrow_map.entry(ep.arrow).or_insert(next);
            signs.insert(label, d.signs[&ep.arrow]);
            new_comp.push(Endpoint { arrow: label, end: ep.end });
        }
        components.push(new_comp);
    }
    let base = if keep_base {
        let b = d.base;
        let len = d.components[b.component].len();
        let gap = if len == 0 { 0 } else { (b.gap + len - cand.rotations[b.component]) % len };
        BasePoint { component: comp_perm[b.component], gap }
    } else {
        BasePoint { component: 0, gap: 0 }
    };
    let diagram = GaussDiagram { components, signs, base };
    debug_assert!(diagram.validate().is_ok());
    CanonicalForm {
        diagram,
        key: cand.key,
        comp_perm,
        rotations: cand.rotations,
        arrow_map,
    }
}

/// Standard small fixtures used across the crate.
pub mod fixtures {
    use super::GaussDiagram;

    /// Standard right trefoil, all-positive alternating code.
    pub const RIGHT_TREFOIL: &str = "O1+ U2+ O3+ U1+ O2+ U3+";
    /// Mirror of the right trefoil.
    pub const LEFT_TREFOIL: &str = "O1- U2- O3- U1- O2- U3-";
    /// Figure-eight knot as the closure of a four-crossing two-bridge braid.
    pub const FIGURE_EIGHT: &str = "O1+ U2- O4- U1+ O3+ U4- O2- U3+";
    /// Positive Hopf link (two components).
    pub const HOPF_LINK: &str = "O1+ U2+\nU1+ O2+";

    pub fn right_trefoil() -> GaussDiagram {
        GaussDiagram::parse_gauss_code(RIGHT_TREFOIL).unwrap()
    }

    pub fn left_trefoil() -> GaussDiagram {
        GaussDiagram::parse_gauss_code(LEFT_TREFOIL).unwrap()
    }

    pub fn figure_eight() -> GaussDiagram {
        GaussDiagram::parse_gauss_code(FIGURE_EIGHT).unwrap()
    }

    pub fn granny() -> GaussDiagram {
        let t = right_trefoil();
        t.connected_sum(&t).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn parse_trefoil() {
        let d = right_trefoil();
        assert_eq!(d.n_arrows(), 3);
        assert_eq!(d.n_components(), 1);
        assert_eq!(d.writhe(), 3);
    }

    #[test]
    fn parse_empty_is_unknot() {
        let d = GaussDiagram::parse_gauss_code("").unwrap();
        assert_eq!(d.n_arrows(), 0);
        assert_eq!(d.n_components(), 1);
        assert_eq!(d.writhe(), 0);
    }

    #[test]
    fn parse_rejects_single_occurrence() {
        let err = GaussDiagram::parse_gauss_code("O1+ U2+ O3+ U1+").unwrap_err();
        assert!(matches!(err, ParseError::LabelOccurrence(_, 1)));
    }

    #[test]
    fn parse_rejects_sign_mismatch() {
        let err = GaussDiagram::parse_gauss_code("O1+ U1-").unwrap_err();
        assert_eq!(err, ParseError::SignMismatch(1));
    }

    #[test]
    fn parse_rejects_double_over() {
        let err = GaussDiagram::parse_gauss_code("O1+ O1+").unwrap_err();
        assert_eq!(err, ParseError::OverUnderMismatch(1));
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(GaussDiagram::parse_gauss_code("O1").is_err());
        assert!(GaussDiagram::parse_gauss_code("X1+").is_err());
        assert!(GaussDiagram::parse_gauss_code("O0+").is_err());
        assert!(GaussDiagram::parse_gauss_code("O1+  U1+").is_err());
    }

    #[test]
    fn serialize_round_trip_exact() {
        for code in [RIGHT_TREFOIL, LEFT_TREFOIL, FIGURE_EIGHT, HOPF_LINK, ""] {
            let d = GaussDiagram::parse_gauss_code(code).unwrap();
            let again = GaussDiagram::parse_gauss_code(&d.serialize()).unwrap();
            assert_eq!(d, again, "round trip failed for {code:?}");
        }
    }

    #[test]
    fn serialize_keeps_base() {
        let d = right_trefoil().with_base_gap(4);
        let again = GaussDiagram::parse_gauss_code(&d.serialize()).unwrap();
        assert_eq!(again.base().gap, 4);
    }

    #[test]
    fn canonical_ignores_rotation_and_relabeling() {
        let d = right_trefoil();
        // rotation with the base carried along is the same diagram
        for r in 0..6 {
            assert!(d.rotated(0, r).same_diagram(&d), "rotation {r}");
        }
        // relabeling is the same diagram
        let mut map = BTreeMap::new();
        map.insert(ArrowId(1), ArrowId(3));
        map.insert(ArrowId(3), ArrowId(1));
        assert!(d.relabeled(&map).same_diagram(&d));
        // canonicalization is idempotent
        let canon = d.canonical(CanonOptions::default());
        assert_eq!(canon.diagram().canonical_key(), d.canonical_key());
    }

    #[test]
    fn canonical_distinguishes_mirror() {
        let d = right_trefoil();
        assert!(!d.mirror().same_diagram_basefree(&d));
        assert!(d.mirror().same_diagram_basefree(&left_trefoil()));
    }

    #[test]
    fn canonical_base_sensitivity() {
        let d = right_trefoil();
        assert!(!d.with_base_gap(1).same_diagram(&d));
        assert!(d.with_base_gap(1).same_diagram_basefree(&d));
    }

    #[test]
    fn mirror_is_involution_and_negates_writhe() {
        for code in [RIGHT_TREFOIL, FIGURE_EIGHT] {
            let d = GaussDiagram::parse_gauss_code(code).unwrap();
            assert_eq!(d.mirror().mirror(), d);
            assert_eq!(d.mirror().writhe(), -d.writhe());
        }
    }

    #[test]
    fn connected_sum_adds_writhe_and_arrows() {
        let t = right_trefoil();
        let s = t.connected_sum(&t).unwrap();
        assert_eq!(s.n_arrows(), 6);
        assert_eq!(s.writhe(), 6);
        let with_unknot = t.connected_sum(&GaussDiagram::unknot()).unwrap();
        assert!(with_unknot.same_diagram(&t));
    }

    #[test]
    fn connected_sum_rejects_links() {
        let hopf = GaussDiagram::parse_gauss_code(HOPF_LINK).unwrap();
        assert_eq!(
            right_trefoil().connected_sum(&hopf).unwrap_err(),
            DiagramError::MultiComponent
        );
    }

    #[test]
    fn smooth_kink_splits_off_empty_circle() {
        let d = GaussDiagram::parse_gauss_code("O1+ U1+").unwrap();
        let s = d.smooth(ArrowId(1)).unwrap();
        assert_eq!(s.n_components(), 2);
        assert_eq!(s.n_arrows(), 0);
    }

    #[test]
    fn smooth_trefoil_gives_two_component_link() {
        let d = right_trefoil();
        let s = d.smooth(ArrowId(2)).unwrap();
        assert_eq!(s.n_components(), 2);
        assert_eq!(s.n_arrows(), 2);
        // the two surviving arrows now join the two components
        for id in s.arrow_ids().collect::<Vec<_>>() {
            let a = s.arrow(id).unwrap();
            assert_ne!(a.tail.component, a.head.component);
        }
    }

    #[test]
    fn smooth_changes_component_count_by_one() {
        let d = figure_eight();
        for id in d.arrow_ids().collect::<Vec<_>>() {
            let s = d.smooth(id).unwrap();
            assert_eq!(s.n_components(), 2);
            assert_eq!(s.n_arrows(), 3);
            // smoothing an inter-component arrow merges back
            let inter: Vec<_> = s
                .arrow_ids()
                .filter(|&a| {
                    let a = s.arrow(a).unwrap();
                    a.tail.component != a.head.component
                })
                .collect();
            let merged = s.smooth(inter[0]).unwrap();
            assert_eq!(merged.n_components(), 1);
        }
    }

    #[test]
    fn smooth_unknown_crossing_errors() {
        let d = right_trefoil();
        assert_eq!(d.smooth(ArrowId(9)).unwrap_err(), DiagramError::UnknownArrow(ArrowId(9)));
    }

    #[test]
    fn base_flat_round_trip_multi_component() {
        let hopf = GaussDiagram::parse_gauss_code("O1+ U2+\nU1+ O2+\nbase 3").unwrap();
        assert_eq!(hopf.base(), BasePoint { component: 1, gap: 1 });
        let again = GaussDiagram::parse_gauss_code(&hopf.serialize()).unwrap();
        assert_eq!(hopf, again);
    }
}
