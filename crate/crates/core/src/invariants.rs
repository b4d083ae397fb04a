//! Numerical invariants: the degree-2 Vassiliev invariant as a two-arrow
//! Gauss sum, an independent skein-descent oracle for it, the Arf bit and
//! linking numbers of smoothed links.

use crate::diagram::{ArrowId, DiagramError, End, GaussDiagram, Sign};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InvariantError {
    #[error("operation requires a single-component diagram")]
    MultiComponent,
    #[error("linking number needs two distinct components")]
    SameComponent,
    #[error("invalid component index {0}")]
    BadComponent(usize),
    #[error("inter-component sign sum is odd; diagram is not a valid link smoothing")]
    OddInterSum,
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

/// Direction pattern of an interleaved arrow pair, read from the base point.
///
/// For two interleaved arrows the four endpoints alternate around the circle:
/// `e1 e2 e3 e4` with `e1, e3` on the first-met arrow and `e2, e4` on the
/// other. The configuration records which passage (`Tail` = over, `Head` =
/// under) sits at `e1` and at `e2`; the remaining two are forced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PairConfiguration {
    TailTail,
    TailHead,
    HeadTail,
    HeadHead,
}

impl PairConfiguration {
    pub const ALL: [PairConfiguration; 4] = [
        PairConfiguration::TailTail,
        PairConfiguration::TailHead,
        PairConfiguration::HeadTail,
        PairConfiguration::HeadHead,
    ];

    fn matches(self, first: End, second: End) -> bool {
        let (a, b) = match self {
            PairConfiguration::TailTail => (End::Tail, End::Tail),
            PairConfiguration::TailHead => (End::Tail, End::Head),
            PairConfiguration::HeadTail => (End::Head, End::Tail),
            PairConfiguration::HeadHead => (End::Head, End::Head),
        };
        first == a && second == b
    }
}

/// The frozen configuration for `v2`.
///
/// Calibrated against forced values: the unique configurations whose Gauss
/// sum is 0 on unknot diagrams, +1 on the right trefoil and −1 on the
/// figure-eight, independently of the base point, are `TailHead` and
/// `HeadTail`; both give the same sum on every realizable diagram and
/// `TailHead` is frozen. See the calibration test in this module.
pub const FROZEN_V2_CONFIG: PairConfiguration = PairConfiguration::TailHead;

/// Degree-2 Vassiliev invariant of a knot diagram, normalized to 0 on the
/// unknot and +1 on the trefoil. Computed as a Gauss sum over interleaved
/// arrow pairs matching [`FROZEN_V2_CONFIG`]; independent of the base point
/// on realizable diagrams.
pub fn v2(d: &GaussDiagram) -> Result<i64, InvariantError> {
    v2_with_config(d, FROZEN_V2_CONFIG)
}

/// The same Gauss sum with an explicit pair configuration; used by the
/// calibration test and exposed for experimentation.
pub fn v2_with_config(d: &GaussDiagram, config: PairConfiguration) -> Result<i64, InvariantError> {
    if !d.is_knot() {
        return Err(InvariantError::MultiComponent);
    }
    let slots = d.slots();
    let n2 = slots.len();
    let base = d.base().gap;
    let reading = |slot: usize| (slot + n2 - base) % n2;

    let arrows: Vec<_> = d.arrow_ids().collect();
    let mut sum = 0i64;
    for (i, &a) in arrows.iter().enumerate() {
        for &b in &arrows[i + 1..] {
            let aa = d.arrow(a)?;
            let bb = d.arrow(b)?;
            let (a1, a2) = ordered(reading(aa.tail.slot), reading(aa.head.slot));
            let (b1, b2) = ordered(reading(bb.tail.slot), reading(bb.head.slot));
            let interleaved = (a1 < b1 && b1 < a2 && a2 < b2) || (b1 < a1 && a1 < b2 && b2 < a2);
            if !interleaved {
                continue;
            }
            let first_idx = a1.min(b1);
            let second_idx = if a1 < b1 { b1 } else { a1 };
            let end_at = |idx: usize| slots[(idx + base) % n2].end;
            if config.matches(end_at(first_idx), end_at(second_idx)) {
                sum += aa.sign.value() * bb.sign.value();
            }
        }
    }
    Ok(sum)
}

fn ordered(x: usize, y: usize) -> (usize, usize) {
    if x < y {
        (x, y)
    } else {
        (y, x)
    }
}

/// Independent oracle for [`v2`] by skein descent.
///
/// Walking from the base point, every crossing first met as an under-passage
/// is switched to over; the fully descending end state is an unknot diagram
/// with invariant 0. Each switch of a crossing with sign `s` (before the
/// switch) contributes `s` times the linking number of the two-component link
/// obtained by smoothing there.
pub fn v2_oracle(d: &GaussDiagram) -> Result<i64, InvariantError> {
    if !d.is_knot() {
        return Err(InvariantError::MultiComponent);
    }
    let mut current = d.clone();
    let n2 = current.slots().len();
    let base = current.base().gap;
    let mut visited = std::collections::BTreeSet::new();
    let mut total = 0i64;
    for k in 0..n2 {
        let slot = (base + k) % n2;
        let ep = current.slots()[slot];
        if !visited.insert(ep.arrow) {
            continue;
        }
        if ep.end == End::Head {
            let sign = current.sign(ep.arrow)?;
            let smoothed = current.smooth(ep.arrow)?;
            debug_assert_eq!(smoothed.n_components(), 2);
            total += sign.value() * linking_number(&smoothed, 0, 1)?;
            current = switched(&current, ep.arrow)?;
        }
    }
    Ok(total)
}

/// Crossing switch: swaps over/under at one crossing and negates its sign.
pub fn switched(d: &GaussDiagram, id: ArrowId) -> Result<GaussDiagram, InvariantError> {
    let tail = d.pos_of(id, End::Tail)?;
    let head = d.pos_of(id, End::Head)?;
    let mut components: Vec<Vec<_>> = (0..d.n_components()).map(|c| d.component(c).to_vec()).collect();
    components[tail.component][tail.slot].end = End::Head;
    components[head.component][head.slot].end = End::Tail;
    let mut signs: std::collections::BTreeMap<_, _> =
        d.arrow_ids().map(|a| (a, d.sign(a).unwrap())).collect();
    signs.insert(id, d.sign(id)?.flip());
    Ok(GaussDiagram::from_parts(components, signs, d.base())?)
}

/// Arf invariant: `v2 mod 2`.
pub fn arf(d: &GaussDiagram) -> Result<u8, InvariantError> {
    Ok((v2(d)?.rem_euclid(2)) as u8)
}

/// Linking number of components `a` and `b`: half the sum of the signs of
/// the arrows joining them.
pub fn linking_number(d: &GaussDiagram, a: usize, b: usize) -> Result<i64, InvariantError> {
    if a == b {
        return Err(InvariantError::SameComponent);
    }
    if a >= d.n_components() {
        return Err(InvariantError::BadComponent(a));
    }
    if b >= d.n_components() {
        return Err(InvariantError::BadComponent(b));
    }
    let mut sum = 0i64;
    for id in d.arrow_ids() {
        let arrow = d.arrow(id)?;
        let (ct, ch) = (arrow.tail.component, arrow.head.component);
        if (ct == a && ch == b) || (ct == b && ch == a) {
            sum += arrow.sign.value();
        }
    }
    if sum.rem_euclid(2) != 0 {
        return Err(InvariantError::OddInterSum);
    }
    Ok(sum / 2)
}

/// Inter-component sign sum before halving (exposed for the parity property).
pub fn inter_component_sign_sum(d: &GaussDiagram, a: usize, b: usize) -> Result<i64, InvariantError> {
    if a == b {
        return Err(InvariantError::SameComponent);
    }
    let mut sum = 0i64;
    for id in d.arrow_ids() {
        let arrow = d.arrow(id)?;
        let (ct, ch) = (arrow.tail.component, arrow.head.component);
        if (ct == a && ch == b) || (ct == b && ch == a) {
            sum += arrow.sign.value();
        }
    }
    Ok(sum)
}

#[allow(unused)]
fn is_sign_plus(s: Sign) -> bool {
    s == Sign::Plus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::fixtures::*;
    use crate::diagram::GaussDiagram;

    /// Hand-built unknot diagrams, each produced by kink insertions and
    /// two-strand pokes, so all of them are realizable. The test below
    /// asserts that each one embeds in the sphere.
    fn unknot_corpus() -> Vec<GaussDiagram> {
        [
            "",
            "O1+ U1+",
            "U1- O1-",
            "O1- U1-",
            "U1+ O1+",
            "O1+ U1+ O2- U2-",
            "O1+ U1+ U2- O2-",
            // kink plus a poke over it (antiparallel)
            "O1+ O2+ O3- U3- U2+ U1+",
            // antiparallel folds, both handednesses
            "O1+ O2- U2- U1+",
            "O1- O2+ U2+ U1-",
            // fold plus a separate curl
            "O1+ O2- U2- U1+ O3+ U3+",
            // two folds stacked
            "O1+ O2- U2- U1+ O3+ O4- U4- U3+",
            // three curls in a row
            "U1- O1- U2- O2- U3- O3-",
        ]
        .iter()
        .map(|c| GaussDiagram::parse_gauss_code(c).unwrap())
        .collect()
    }

    #[test]
    fn unknot_corpus_is_realizable() {
        for d in unknot_corpus() {
            assert_eq!(crate::faces::genus(&d), 0, "corpus entry {} must be spherical", d);
        }
    }

    fn all_bases(d: &GaussDiagram) -> Vec<GaussDiagram> {
        let n = d.slots().len().max(1);
        (0..n).map(|g| d.with_base_gap(g)).collect()
    }

    #[test]
    fn oracle_values_on_fixtures() {
        assert_eq!(v2_oracle(&GaussDiagram::unknot()).unwrap(), 0);
        assert_eq!(v2_oracle(&right_trefoil()).unwrap(), 1);
        assert_eq!(v2_oracle(&left_trefoil()).unwrap(), 1);
        assert_eq!(v2_oracle(&figure_eight()).unwrap(), -1);
        assert_eq!(v2_oracle(&granny()).unwrap(), 2);
        for d in unknot_corpus() {
            for based in all_bases(&d) {
                assert_eq!(v2_oracle(&based).unwrap(), 0, "unknot oracle on {}", d);
            }
        }
    }

    /// The calibration that froze `FROZEN_V2_CONFIG`: over the four possible
    /// two-arrow configurations, exactly `TailHead` and `HeadTail` reproduce
    /// the forced values on the corpus for every base point, and they agree
    /// with each other and the oracle everywhere. `TailHead` is frozen.
    #[test]
    fn v2_configuration_calibration() {
        let mut survivors = Vec::new();
        for config in PairConfiguration::ALL {
            let mut ok = true;
            for d in unknot_corpus() {
                for based in all_bases(&d) {
                    ok &= v2_with_config(&based, config).unwrap() == 0;
                }
            }
            for based in all_bases(&right_trefoil()) {
                ok &= v2_with_config(&based, config).unwrap() == 1;
            }
            for based in all_bases(&figure_eight()) {
                ok &= v2_with_config(&based, config).unwrap() == -1;
            }
            if ok {
                survivors.push(config);
            }
        }
        assert_eq!(
            survivors,
            vec![PairConfiguration::TailHead, PairConfiguration::HeadTail],
            "calibration must single out the two equivalent configurations"
        );
        assert!(survivors.contains(&FROZEN_V2_CONFIG));
    }

    #[test]
    fn v2_matches_oracle_on_fixtures() {
        for d in [right_trefoil(), left_trefoil(), figure_eight(), granny()] {
            for based in all_bases(&d) {
                assert_eq!(v2(&based).unwrap(), v2_oracle(&based).unwrap(), "on {}", d);
            }
        }
    }

    #[test]
    fn v2_additive_and_mirror_invariant() {
        let t = right_trefoil();
        let f = figure_eight();
        let sum = t.connected_sum(&f).unwrap();
        assert_eq!(v2(&sum).unwrap(), 0);
        assert_eq!(v2(&t.mirror()).unwrap(), v2(&t).unwrap());
        assert_eq!(v2(&f.mirror()).unwrap(), v2(&f).unwrap());
    }

    #[test]
    fn v2_rejects_links() {
        let hopf = GaussDiagram::parse_gauss_code(HOPF_LINK).unwrap();
        assert_eq!(v2(&hopf).unwrap_err(), InvariantError::MultiComponent);
        assert_eq!(v2_oracle(&hopf).unwrap_err(), InvariantError::MultiComponent);
    }

    #[test]
    fn arf_values() {
        assert_eq!(arf(&GaussDiagram::unknot()).unwrap(), 0);
        assert_eq!(arf(&right_trefoil()).unwrap(), 1);
        assert_eq!(arf(&figure_eight()).unwrap(), 1);
        assert_eq!(arf(&granny()).unwrap(), 0);
    }

    #[test]
    fn linking_numbers() {
        let hopf = GaussDiagram::parse_gauss_code(HOPF_LINK).unwrap();
        assert_eq!(linking_number(&hopf, 0, 1).unwrap(), 1);
        assert_eq!(linking_number(&hopf, 1, 0).unwrap(), 1);
        assert_eq!(linking_number(&hopf, 0, 0).unwrap_err(), InvariantError::SameComponent);
        assert_eq!(linking_number(&hopf, 0, 2).unwrap_err(), InvariantError::BadComponent(2));

        // trefoil smoothed at one crossing: lk = +1
        let s = right_trefoil().smooth(crate::diagram::ArrowId(1)).unwrap();
        assert_eq!(linking_number(&s, 0, 1).unwrap(), 1);

        // unlink with no crossings
        let unlink = GaussDiagram::parse_gauss_code(".\n.").unwrap();
        assert_eq!(unlink.n_components(), 2);
        assert_eq!(linking_number(&unlink, 0, 1).unwrap(), 0);
    }
}
