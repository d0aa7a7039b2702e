//! Finite and matrix group algebra.
//!
//! Composition convention: `(a · b)(x) = a(b(x))` — the right factor acts
//! first. This matches matrix action on column vectors and is used by every
//! operation in this module (and by the branching-program evaluator).
//!
//! The commutator is `[g, h] = g⁻¹ · h⁻¹ · g · h`.

mod icosahedral;
mod matrix;
mod perm;
mod series;

pub use icosahedral::{
    icosahedral_permutation_generators, icosahedral_so3_generators, icosahedron_vertices,
    vertex_permutation,
};
pub use matrix::MatrixElement;
pub use perm::Permutation;
pub use series::{closure, derived_series, is_normal_subgroup, SolvabilityClass, SolvabilityLevel};

use thiserror::Error;

/// Default cap on the order of groups realized by closure enumeration.
pub const DEFAULT_ORDER_CAP: usize = 10_080;

/// Tolerance for identity / orthogonality checks on matrix elements.
pub const MATRIX_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("carrier mismatch: {0}")]
    CarrierMismatch(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("generator index {index} out of range for {count} generators")]
    InvalidIndex { index: usize, count: usize },
    #[error("group too large: closure exceeded order cap {cap}")]
    GroupTooLarge { cap: usize },
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, GroupError>;

/// One element of a transformation group: a permutation on `n` points or a
/// square real matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    Perm(Permutation),
    Matrix(MatrixElement),
}

impl GroupElement {
    /// The product `a · b` (apply `b` first, then `a`).
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        match (self, other) {
            (GroupElement::Perm(a), GroupElement::Perm(b)) => {
                Ok(GroupElement::Perm(a.compose(b)?))
            }
            (GroupElement::Matrix(a), GroupElement::Matrix(b)) => {
                Ok(GroupElement::Matrix(a.multiply(b)?))
            }
            _ => Err(GroupError::CarrierMismatch(
                "cannot compose a permutation with a matrix".into(),
            )),
        }
    }

    pub fn inverse(&self) -> Result<GroupElement> {
        match self {
            GroupElement::Perm(p) => Ok(GroupElement::Perm(p.inverse())),
            GroupElement::Matrix(m) => Ok(GroupElement::Matrix(m.inverse()?)),
        }
    }

    /// The commutator `[g, h] = g⁻¹ · h⁻¹ · g · h`.
    pub fn commutator(&self, other: &GroupElement) -> Result<GroupElement> {
        let gi = self.inverse()?;
        let hi = other.inverse()?;
        gi.compose(&hi)?.compose(self)?.compose(other)
    }

    /// Identity test; matrices are compared entrywise within [`MATRIX_TOL`].
    pub fn is_identity(&self) -> bool {
        match self {
            GroupElement::Perm(p) => p.is_identity(),
            GroupElement::Matrix(m) => m.is_identity(MATRIX_TOL),
        }
    }

    /// Identity element on the same carrier as `self`.
    pub fn identity_like(&self) -> GroupElement {
        match self {
            GroupElement::Perm(p) => GroupElement::Perm(Permutation::identity(p.degree())),
            GroupElement::Matrix(m) => {
                GroupElement::Matrix(MatrixElement::identity(m.dim(), m.rep_tag()))
            }
        }
    }

    fn carrier_label(&self) -> String {
        match self {
            GroupElement::Perm(p) => format!("perm/{}", p.degree()),
            GroupElement::Matrix(m) => format!("matrix/{}", m.dim()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    FinitePermutation,
    Matrix,
}

/// A transformation group given by its generators.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    generators: Vec<GroupElement>,
    names: Vec<String>,
    kind: GroupKind,
    order_cap: usize,
}

impl GroupSpec {
    pub fn new(generators: Vec<GroupElement>, names: Vec<String>) -> Result<Self> {
        if generators.is_empty() {
            return Err(GroupError::Invalid("generator set is empty".into()));
        }
        let carrier = generators[0].carrier_label();
        for g in &generators[1..] {
            if g.carrier_label() != carrier {
                return Err(GroupError::CarrierMismatch(format!(
                    "generators on mixed carriers: {} vs {}",
                    carrier,
                    g.carrier_label()
                )));
            }
        }
        let kind = match generators[0] {
            GroupElement::Perm(_) => GroupKind::FinitePermutation,
            GroupElement::Matrix(_) => GroupKind::Matrix,
        };
        let names = if names.is_empty() {
            (0..generators.len()).map(|i| format!("g{i}")).collect()
        } else {
            if names.len() != generators.len() {
                return Err(GroupError::Invalid(
                    "generator name count does not match generator count".into(),
                ));
            }
            names
        };
        Ok(GroupSpec {
            generators,
            names,
            kind,
            order_cap: DEFAULT_ORDER_CAP,
        })
    }

    pub fn from_permutations(perms: Vec<Permutation>) -> Result<Self> {
        Self::new(perms.into_iter().map(GroupElement::Perm).collect(), vec![])
    }

    /// Parse a spec from cycle-notation generator strings such as
    /// `["(0 1 2)", "(0 1)"]`. The degree is the largest moved point plus
    /// one unless `degree` forces a larger carrier.
    pub fn from_cycle_strings(cycles: &[&str], degree: Option<usize>) -> Result<Self> {
        if cycles.is_empty() {
            return Err(GroupError::Invalid("generator set is empty".into()));
        }
        let mut max_point = 0usize;
        let mut parsed = Vec::with_capacity(cycles.len());
        for text in cycles {
            let cyc = perm::parse_cycles(text)?;
            for c in &cyc {
                for &p in c {
                    max_point = max_point.max(p + 1);
                }
            }
            parsed.push(cyc);
        }
        let n = degree.unwrap_or(0).max(max_point).max(1);
        let perms = parsed
            .into_iter()
            .map(|cyc| Permutation::from_parsed_cycles(&cyc, n))
            .collect::<Result<Vec<_>>>()?;
        Self::from_permutations(perms)
    }

    pub fn with_order_cap(mut self, cap: usize) -> Self {
        self.order_cap = cap;
        self
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn order_cap(&self) -> usize {
        self.order_cap
    }

    pub fn generator(&self, index: usize) -> Result<&GroupElement> {
        self.generators.get(index).ok_or(GroupError::InvalidIndex {
            index,
            count: self.generators.len(),
        })
    }
}

/// One letter of a word over a generator set: a generator index plus an
/// inversion flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordTerm {
    pub index: usize,
    pub inverted: bool,
}

impl WordTerm {
    pub fn new(index: usize) -> Self {
        WordTerm { index, inverted: false }
    }

    pub fn inverse(index: usize) -> Self {
        WordTerm { index, inverted: true }
    }
}

/// Parse a word over generators written as whitespace-separated tokens
/// `g<k>` or `g<k>^-1`, e.g. `"g0 g1^-1 g0"`.
pub fn parse_word(text: &str) -> Result<Vec<WordTerm>> {
    let mut terms = Vec::new();
    let mut offset = 0usize;
    for token in text.split_whitespace() {
        let pos = text[offset..].find(token).map_or(offset, |p| offset + p);
        offset = pos + token.len();
        let err = |msg: &str| GroupError::Parse { pos, msg: msg.to_string() };
        let (body, inverted) = match token.strip_suffix("^-1") {
            Some(b) => (b, true),
            None => (token, false),
        };
        let index_text = body
            .strip_prefix('g')
            .ok_or_else(|| err("expected a token of the form g<index> or g<index>^-1"))?;
        let index: usize = index_text
            .parse()
            .map_err(|_| err("expected a generator index after 'g'"))?;
        terms.push(WordTerm { index, inverted });
    }
    Ok(terms)
}

/// Left-fold the product `Π gᵢ` of a word over the spec's generators.
pub fn word_evaluate(spec: &GroupSpec, word: &[WordTerm]) -> Result<GroupElement> {
    let mut acc = spec.generators[0].identity_like();
    for term in word {
        let g = spec.generator(term.index)?;
        let g = if term.inverted { g.inverse()? } else { g.clone() };
        acc = acc.compose(&g)?;
    }
    Ok(acc)
}

/// Apply a sequence of matrices to `z0` right-to-left: the result is
/// `ρ(g₁)·ρ(g₂)⋯ρ(gₙ)·z0`, i.e. the last matrix in the list acts first.
pub fn iterated_matrix_action(rho_images: &[MatrixElement], z0: &[f64]) -> Result<Vec<f64>> {
    let mut z = z0.to_vec();
    for m in rho_images.iter().rev() {
        z = m.apply(&z)?;
    }
    Ok(z)
}

/// Named group presets accepted by the CLI.
pub fn preset(name: &str) -> Option<GroupSpec> {
    let spec = match name {
        "Z5" | "z5" => GroupSpec::from_cycle_strings(&["(0 1 2 3 4)"], None),
        "S4" | "s4" => GroupSpec::from_cycle_strings(&["(0 1)", "(0 1 2 3)"], None),
        "A5" | "a5" => GroupSpec::from_cycle_strings(&["(0 1 2 3 4)", "(0 1 2)"], None),
        "icosahedral" => GroupSpec::from_permutations(icosahedral_permutation_generators()),
        _ => return None,
    };
    Some(spec.expect("presets are well-formed"))
}

pub fn preset_names() -> &'static [&'static str] {
    &["Z5", "S4", "A5", "icosahedral"]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rot_x, rot_z};

    fn p(images: &[usize]) -> GroupElement {
        GroupElement::Perm(Permutation::from_images(images.to_vec()).unwrap())
    }

    #[test]
    fn compose_identity_law() {
        let g = p(&[1, 2, 0]);
        let e = g.identity_like();
        assert_eq!(e.compose(&g).unwrap(), g);
        assert_eq!(g.compose(&e).unwrap(), g);
    }

    #[test]
    fn transposition_is_involution() {
        let t = p(&[1, 0]);
        assert!(t.compose(&t).unwrap().is_identity());
    }

    #[test]
    fn rotation_composition_matches_matrix_multiply() {
        let a = MatrixElement::from_mat3(&rot_x(30f64.to_radians()), "so3");
        let twice = GroupElement::Matrix(a.clone())
            .compose(&GroupElement::Matrix(a.clone()))
            .unwrap();
        // Independent oracle: direct matrix multiply of the 60° matrix.
        let expected = MatrixElement::from_mat3(&rot_x(60f64.to_radians()), "so3");
        match twice {
            GroupElement::Matrix(m) => assert!(m.frobenius_dist(&expected).unwrap() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn compose_rejects_mixed_carriers() {
        let g = p(&[1, 0]);
        let m = GroupElement::Matrix(MatrixElement::identity(3, "so3"));
        assert!(matches!(
            g.compose(&m),
            Err(GroupError::CarrierMismatch(_))
        ));
        let h = p(&[1, 0, 2]);
        assert!(g.compose(&h).is_err());
    }

    #[test]
    fn commutator_of_self_is_identity() {
        let g = p(&[1, 2, 0]);
        assert!(g.commutator(&g).unwrap().is_identity());
    }

    #[test]
    fn commutator_of_translations_is_identity() {
        // 2D translations as homogeneous 3×3 matrices.
        let t = |dx: f64, dy: f64| {
            GroupElement::Matrix(MatrixElement::from_mat3(
                &[[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]],
                "aff2",
            ))
        };
        let c = t(3.0, -1.0).commutator(&t(0.5, 7.0)).unwrap();
        assert!(c.is_identity());
    }

    #[test]
    fn commutator_in_s3() {
        // [g, h] = g⁻¹h⁻¹gh for g = (0 1 2), h = (0 1). Expanded by hand
        // under the right-factor-first convention:
        //   x=0: h→1, g→2, h⁻¹→2, g⁻¹→1
        //   x=1: h→0, g→1, h⁻¹→0, g⁻¹→2
        //   x=2: h→2, g→0, h⁻¹→1, g⁻¹→0
        let g = p(&[1, 2, 0]);
        let h = p(&[1, 0, 2]);
        let c = g.commutator(&h).unwrap();
        assert_eq!(c, p(&[1, 2, 0]));
    }

    #[test]
    fn word_with_inverse_suffix_reduces() {
        let spec = preset("A5").unwrap();
        let word = vec![WordTerm::new(0), WordTerm::new(1), WordTerm::inverse(1), WordTerm::inverse(0)];
        assert!(word_evaluate(&spec, &word).unwrap().is_identity());
    }

    #[test]
    fn empty_word_is_identity() {
        let spec = preset("S4").unwrap();
        assert!(word_evaluate(&spec, &[]).unwrap().is_identity());
    }

    #[test]
    fn word_rejects_bad_index() {
        let spec = preset("Z5").unwrap();
        assert!(matches!(
            word_evaluate(&spec, &[WordTerm::new(3)]),
            Err(GroupError::InvalidIndex { .. })
        ));
    }

    #[test]
    fn word_matches_naive_fold() {
        // Independent oracle: fold the raw permutations by hand.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        let spec = preset("A5").unwrap();
        for _ in 0..20 {
            let word: Vec<WordTerm> = (0..50)
                .map(|_| WordTerm {
                    index: rng.gen_range(0..spec.generators().len()),
                    inverted: rng.gen_bool(0.5),
                })
                .collect();
            let got = match word_evaluate(&spec, &word).unwrap() {
                GroupElement::Perm(p) => p,
                _ => unreachable!(),
            };
            let mut naive: Vec<usize> = (0..5).collect();
            for t in &word {
                let g = match spec.generator(t.index).unwrap() {
                    GroupElement::Perm(p) => p.clone(),
                    _ => unreachable!(),
                };
                let g = if t.inverted { g.inverse() } else { g };
                // acc = acc · g: apply g first, then acc.
                naive = (0..5).map(|x| naive[g.apply(x)]).collect();
            }
            assert_eq!(got.images(), naive.as_slice());
        }
    }

    #[test]
    fn iterated_action_empty_is_input() {
        let z = vec![1.0, 2.0, 3.0];
        assert_eq!(iterated_matrix_action(&[], &z).unwrap(), z);
    }

    #[test]
    fn twelve_rz30_close_the_circle() {
        let rz = MatrixElement::from_mat3(&rot_z(30f64.to_radians()), "so3");
        let mats = vec![rz; 12];
        let z = iterated_matrix_action(&mats, &[1.0, 0.0, 0.0]).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-9 && z[1].abs() < 1e-9 && z[2].abs() < 1e-9);
    }

    #[test]
    fn iterated_action_associativity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let mats: Vec<MatrixElement> = (0..8)
            .map(|_| {
                MatrixElement::from_mat3(
                    &crate::linalg::rot_axis_angle(
                        &[rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5],
                        rng.gen::<f64>() * 3.0,
                    ),
                    "so3",
                )
            })
            .collect();
        let z0 = vec![0.3, -1.0, 2.0];
        let seq = iterated_matrix_action(&mats, &z0).unwrap();
        // Pre-multiply into a single matrix, then apply once.
        let mut prod = MatrixElement::identity(3, "so3");
        for m in &mats {
            prod = prod.multiply(m).unwrap();
        }
        let once = prod.apply(&z0).unwrap();
        for (a, b) in seq.iter().zip(&once) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn parse_word_tokens() {
        let word = parse_word("g0 g1^-1 g2").unwrap();
        assert_eq!(
            word,
            vec![WordTerm::new(0), WordTerm::inverse(1), WordTerm::new(2)]
        );
        assert!(parse_word("h0").is_err());
        assert!(parse_word("g").is_err());
        assert!(parse_word("").unwrap().is_empty());
    }

    #[test]
    fn presets_exist() {
        for name in preset_names() {
            assert!(preset(name).is_some(), "missing preset {name}");
        }
        assert!(preset("nope").is_none());
    }
}
