use std::fmt;

use super::{GroupError, Result};

/// A permutation of the points `0..n`, stored as the image of each point.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation({})", self.cycle_notation())
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.cycle_notation())
    }
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation { images: (0..n).collect() }
    }

    /// Validates that `images` is a bijection on `0..images.len()`.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n {
                return Err(GroupError::InvalidPermutation(format!(
                    "image {i} out of range for degree {n}"
                )));
            }
            if seen[i] {
                return Err(GroupError::InvalidPermutation(format!(
                    "image {i} appears twice"
                )));
            }
            seen[i] = true;
        }
        Ok(Permutation { images })
    }

    /// Parse cycle notation, e.g. `"(0 1 2)(3 4)"`; `"()"` is the identity.
    /// The degree is the largest point plus one unless `degree` is larger.
    pub fn from_cycles(text: &str, degree: Option<usize>) -> Result<Self> {
        let cycles = parse_cycles(text)?;
        let max_point = cycles
            .iter()
            .flat_map(|c| c.iter().copied())
            .max()
            .map_or(0, |m| m + 1);
        let n = degree.unwrap_or(0).max(max_point).max(1);
        Self::from_parsed_cycles(&cycles, n)
    }

    pub(super) fn from_parsed_cycles(cycles: &[Vec<usize>], n: usize) -> Result<Self> {
        let mut images: Vec<usize> = (0..n).collect();
        let mut moved = vec![false; n];
        for cycle in cycles {
            for w in 0..cycle.len() {
                let from = cycle[w];
                let to = cycle[(w + 1) % cycle.len()];
                if from >= n || to >= n {
                    return Err(GroupError::InvalidPermutation(format!(
                        "point {} out of range for degree {n}",
                        from.max(to)
                    )));
                }
                if moved[from] {
                    return Err(GroupError::InvalidPermutation(format!(
                        "point {from} appears in two cycles"
                    )));
                }
                moved[from] = true;
                images[from] = to;
            }
        }
        Self::from_images(images)
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// Image of a single point.
    pub fn apply(&self, point: usize) -> usize {
        self.images[point]
    }

    /// The product `self · other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.degree() != other.degree() {
            return Err(GroupError::CarrierMismatch(format!(
                "permutation degrees differ: {} vs {}",
                self.degree(),
                other.degree()
            )));
        }
        Ok(Permutation {
            images: other.images.iter().map(|&i| self.images[i]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.images.len()];
        for (i, &img) in self.images.iter().enumerate() {
            inv[img] = i;
        }
        Permutation { images: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &img)| i == img)
    }

    /// Cycle lengths in decreasing order, fixed points omitted.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut lengths: Vec<usize> = self.cycles().iter().map(Vec::len).collect();
        lengths.sort_unstable_by(|a, b| b.cmp(a));
        lengths
    }

    /// True for even permutations.
    pub fn is_even(&self) -> bool {
        let transpositions: usize = self.cycles().iter().map(|c| c.len() - 1).sum();
        transpositions % 2 == 0
    }

    /// Nontrivial cycles, each starting from its smallest point, ordered by
    /// that point.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.images.len();
        let mut seen = vec![false; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if seen[start] || self.images[start] == start {
                seen[start] = true;
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut cur = self.images[start];
            while cur != start {
                seen[cur] = true;
                cycle.push(cur);
                cur = self.images[cur];
            }
            cycles.push(cycle);
        }
        cycles
    }

    pub fn cycle_notation(&self) -> String {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return "()".to_string();
        }
        cycles
            .iter()
            .map(|c| {
                let pts: Vec<String> = c.iter().map(usize::to_string).collect();
                format!("({})", pts.join(" "))
            })
            .collect()
    }
}

/// Parse `"(0 1 2)(3 4)"` into raw cycles; points may be separated by
/// whitespace or commas. Reports the byte position of the first error.
pub(super) fn parse_cycles(text: &str) -> Result<Vec<Vec<usize>>> {
    let bytes = text.as_bytes();
    let mut pos = 0usize;
    let mut cycles = Vec::new();
    let err = |pos: usize, msg: &str| GroupError::Parse { pos, msg: msg.to_string() };

    while pos < bytes.len() {
        match bytes[pos] {
            b' ' | b'\t' => pos += 1,
            b'(' => {
                pos += 1;
                let mut cycle = Vec::new();
                loop {
                    while pos < bytes.len() && matches!(bytes[pos], b' ' | b'\t' | b',') {
                        pos += 1;
                    }
                    if pos >= bytes.len() {
                        return Err(err(pos, "unterminated cycle"));
                    }
                    if bytes[pos] == b')' {
                        pos += 1;
                        break;
                    }
                    let start = pos;
                    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                        pos += 1;
                    }
                    if pos == start {
                        return Err(err(pos, "expected a point index"));
                    }
                    let point: usize = text[start..pos]
                        .parse()
                        .map_err(|_| err(start, "point index too large"))?;
                    cycle.push(point);
                }
                if cycle.len() == 1 {
                    // A singleton cycle is a fixed point; drop it.
                    cycle.clear();
                }
                if !cycle.is_empty() {
                    cycles.push(cycle);
                }
            }
            _ => return Err(err(pos, "expected '('")),
        }
    }
    Ok(cycles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_round_trip() {
        let p = Permutation::from_cycles("(0 1 2)(3 4)", None).unwrap();
        assert_eq!(p.degree(), 5);
        assert_eq!(p.cycle_notation(), "(0 1 2)(3 4)");
        assert_eq!(p.images(), &[1, 2, 0, 4, 3]);
    }

    #[test]
    fn parse_identity() {
        let p = Permutation::from_cycles("()", Some(4)).unwrap();
        assert!(p.is_identity());
        assert_eq!(p.degree(), 4);
    }

    #[test]
    fn parse_error_position() {
        let e = Permutation::from_cycles("(0 1) x", None).unwrap_err();
        match e {
            GroupError::Parse { pos, .. } => assert_eq!(pos, 6),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn reject_repeated_point() {
        assert!(Permutation::from_cycles("(0 1)(1 2)", None).is_err());
        assert!(Permutation::from_images(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_images(vec![0, 3]).is_err());
    }

    #[test]
    fn inverse_composes_to_identity() {
        let p = Permutation::from_cycles("(0 3 1)(2 4)", None).unwrap();
        assert!(p.compose(&p.inverse()).unwrap().is_identity());
        assert!(p.inverse().compose(&p).unwrap().is_identity());
    }

    #[test]
    fn parity() {
        assert!(Permutation::from_cycles("(0 1 2 3 4)", None).unwrap().is_even());
        assert!(!Permutation::from_cycles("(0 1)", None).unwrap().is_even());
        assert!(Permutation::from_cycles("(0 1)(2 3)", None).unwrap().is_even());
    }

    #[test]
    fn composition_applies_right_factor_first() {
        // a = (0 1), b = (1 2): (a·b)(1) = a(b(1)) = a(2) = 2.
        let a = Permutation::from_cycles("(0 1)", Some(3)).unwrap();
        let b = Permutation::from_cycles("(1 2)", Some(3)).unwrap();
        let ab = a.compose(&b).unwrap();
        assert_eq!(ab.apply(1), 2);
        assert_eq!(ab.apply(0), 1);
        assert_eq!(ab.apply(2), 0);
    }
}
