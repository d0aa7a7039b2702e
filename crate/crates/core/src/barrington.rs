//! Constructive compiler from Boolean formulas to width-5 permutation
//! branching programs over A₅.
//!
//! A program σ-computes a formula `f` when its instruction product is σ on
//! every satisfying assignment and the identity otherwise. Variables compile
//! to single instructions, AND to the four-block commutator construction,
//! and NOT/OR through De Morgan plus the inverse-target suffix trick, so a
//! formula of depth `d` always compiles to exactly `4^d` instructions.

use std::collections::HashMap;

use thiserror::Error;

use crate::groups::Permutation;

#[derive(Debug, Error)]
pub enum BarringtonError {
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("accept permutation must be a 5-cycle on 5 points, got {0}")]
    NotAFiveCycle(String),
    #[error("formula is not in normalized form (NOT above a non-variable node)")]
    NotNormalized,
    #[error("assignment of length {len} does not cover variable x{var}")]
    MissingVariable { var: usize, len: usize },
    #[error("compilation invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, BarringtonError>;

/// A Boolean formula over variables `x0, x1, …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BooleanFormula {
    Var(usize),
    Not(Box<BooleanFormula>),
    And(Box<BooleanFormula>, Box<BooleanFormula>),
    Or(Box<BooleanFormula>, Box<BooleanFormula>),
}

impl BooleanFormula {
    /// Longest root-to-leaf path counting AND/OR nodes only; NOT is free.
    pub fn depth(&self) -> usize {
        match self {
            BooleanFormula::Var(_) => 0,
            BooleanFormula::Not(f) => f.depth(),
            BooleanFormula::And(a, b) | BooleanFormula::Or(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// One past the largest referenced variable index.
    pub fn num_vars(&self) -> usize {
        match self {
            BooleanFormula::Var(i) => i + 1,
            BooleanFormula::Not(f) => f.num_vars(),
            BooleanFormula::And(a, b) | BooleanFormula::Or(a, b) => {
                a.num_vars().max(b.num_vars())
            }
        }
    }

    /// Direct evaluation; the assignment must cover all referenced vars.
    pub fn eval(&self, assignment: &[bool]) -> bool {
        match self {
            BooleanFormula::Var(i) => assignment[*i],
            BooleanFormula::Not(f) => !f.eval(assignment),
            BooleanFormula::And(a, b) => a.eval(assignment) && b.eval(assignment),
            BooleanFormula::Or(a, b) => a.eval(assignment) || b.eval(assignment),
        }
    }

    /// Push NOTs to the leaves (De Morgan) and drop double negations.
    pub fn normalize(self) -> BooleanFormula {
        match self {
            BooleanFormula::Var(i) => BooleanFormula::Var(i),
            BooleanFormula::And(a, b) => {
                BooleanFormula::And(Box::new(a.normalize()), Box::new(b.normalize()))
            }
            BooleanFormula::Or(a, b) => {
                BooleanFormula::Or(Box::new(a.normalize()), Box::new(b.normalize()))
            }
            BooleanFormula::Not(inner) => match *inner {
                BooleanFormula::Var(i) => {
                    BooleanFormula::Not(Box::new(BooleanFormula::Var(i)))
                }
                BooleanFormula::Not(f) => f.normalize(),
                BooleanFormula::And(a, b) => BooleanFormula::Or(
                    Box::new(BooleanFormula::Not(a).normalize()),
                    Box::new(BooleanFormula::Not(b).normalize()),
                ),
                BooleanFormula::Or(a, b) => BooleanFormula::And(
                    Box::new(BooleanFormula::Not(a).normalize()),
                    Box::new(BooleanFormula::Not(b).normalize()),
                ),
            },
        }
    }

    /// NOT appears only directly above variables.
    pub fn is_normalized(&self) -> bool {
        match self {
            BooleanFormula::Var(_) => true,
            BooleanFormula::Not(f) => matches!(**f, BooleanFormula::Var(_)),
            BooleanFormula::And(a, b) | BooleanFormula::Or(a, b) => {
                a.is_normalized() && b.is_normalized()
            }
        }
    }
}

/// Parse `f := xN | !f | (f & f) | (f | f)` and normalize the result.
pub fn parse_formula(text: &str) -> Result<BooleanFormula> {
    let mut p = Parser { bytes: text.as_bytes(), pos: 0 };
    p.skip_ws();
    let f = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(BarringtonError::Parse {
            pos: p.pos,
            msg: "unexpected trailing input".into(),
        });
    }
    Ok(f.normalize())
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn err<T>(&self, msg: &str) -> Result<T> {
        Err(BarringtonError::Parse { pos: self.pos, msg: msg.to_string() })
    }

    fn expr(&mut self) -> Result<BooleanFormula> {
        self.skip_ws();
        match self.bytes.get(self.pos) {
            Some(b'x') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if self.pos == start {
                    return self.err("expected a variable index after 'x'");
                }
                let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
                match text.parse() {
                    Ok(i) => Ok(BooleanFormula::Var(i)),
                    Err(_) => Err(BarringtonError::Parse {
                        pos: start,
                        msg: "variable index too large".into(),
                    }),
                }
            }
            Some(b'!') => {
                self.pos += 1;
                Ok(BooleanFormula::Not(Box::new(self.expr()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let lhs = self.expr()?;
                self.skip_ws();
                let op = match self.bytes.get(self.pos) {
                    Some(b'&') => b'&',
                    Some(b'|') => b'|',
                    _ => return self.err("expected '&' or '|'"),
                };
                self.pos += 1;
                let rhs = self.expr()?;
                self.skip_ws();
                if self.bytes.get(self.pos) != Some(&b')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(match op {
                    b'&' => BooleanFormula::And(Box::new(lhs), Box::new(rhs)),
                    _ => BooleanFormula::Or(Box::new(lhs), Box::new(rhs)),
                })
            }
            _ => self.err("expected 'xN', '!' or '('"),
        }
    }
}

/// One branching-program instruction: read a variable, multiply by one of
/// two permutations on 5 points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub var: usize,
    pub if_false: Permutation,
    pub if_true: Permutation,
}

/// A width-5 permutation branching program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchingProgram {
    pub instructions: Vec<Instruction>,
    pub accept_cycle: Permutation,
}

impl BranchingProgram {
    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }
}

/// The default accept cycle σ = (0 1 2 3 4).
pub fn default_sigma() -> Permutation {
    Permutation::from_cycles("(0 1 2 3 4)", Some(5)).expect("static cycle")
}

fn is_five_cycle(p: &Permutation) -> bool {
    p.degree() == 5 && p.cycle_type() == vec![5]
}

/// Compile a normalized formula into a program that σ-computes it.
pub fn compile(f: &BooleanFormula, sigma: &Permutation) -> Result<BranchingProgram> {
    if !is_five_cycle(sigma) {
        return Err(BarringtonError::NotAFiveCycle(sigma.cycle_notation()));
    }
    if !f.is_normalized() {
        return Err(BarringtonError::NotNormalized);
    }
    let mut cache = PairCache::new();
    let instructions = emit(f, sigma, &mut cache)?;
    Ok(BranchingProgram { instructions, accept_cycle: sigma.clone() })
}

/// Left-fold product of the selected instruction permutations.
pub fn evaluate(p: &BranchingProgram, assignment: &[bool]) -> Result<Permutation> {
    let mut acc = Permutation::identity(5);
    for instr in &p.instructions {
        let bit = *assignment.get(instr.var).ok_or(BarringtonError::MissingVariable {
            var: instr.var,
            len: assignment.len(),
        })?;
        let factor = if bit { &instr.if_true } else { &instr.if_false };
        acc = acc.compose(factor).expect("width-5 carriers match");
    }
    Ok(acc)
}

/// True iff the program product is the accept cycle; false iff it is the
/// identity. Any third value signals a compiler bug.
pub fn decide(p: &BranchingProgram, assignment: &[bool]) -> Result<bool> {
    let out = evaluate(p, assignment)?;
    if out.is_identity() {
        Ok(false)
    } else if out == p.accept_cycle {
        Ok(true)
    } else {
        Err(BarringtonError::InvariantViolation(format!(
            "program evaluated to {} (neither identity nor accept cycle {})",
            out.cycle_notation(),
            p.accept_cycle.cycle_notation()
        )))
    }
}

struct PairCache {
    five_cycles: Vec<Permutation>,
    pairs: HashMap<Permutation, (Permutation, Permutation)>,
}

impl PairCache {
    fn new() -> Self {
        PairCache { five_cycles: all_five_cycles(), pairs: HashMap::new() }
    }

    /// First pair (γ₁, γ₂) of 5-cycles in lexicographic order with
    /// γ₁·γ₂·γ₁⁻¹·γ₂⁻¹ = target.
    fn pair_for(&mut self, target: &Permutation) -> Result<(Permutation, Permutation)> {
        if let Some(p) = self.pairs.get(target) {
            return Ok(p.clone());
        }
        for c1 in &self.five_cycles {
            let c1_inv = c1.inverse();
            for c2 in &self.five_cycles {
                let comm = c1
                    .compose(c2)
                    .and_then(|p| p.compose(&c1_inv))
                    .and_then(|p| p.compose(&c2.inverse()))
                    .expect("degree-5 carriers match");
                if &comm == target {
                    let pair = (c1.clone(), c2.clone());
                    self.pairs.insert(target.clone(), pair.clone());
                    return Ok(pair);
                }
            }
        }
        Err(BarringtonError::InvariantViolation(format!(
            "no 5-cycle commutator pair found for {}",
            target.cycle_notation()
        )))
    }
}

/// All 24 five-cycles of S₅ in lexicographic image order.
fn all_five_cycles() -> Vec<Permutation> {
    let mut out = Vec::with_capacity(24);
    let mut images = [0usize; 5];
    let mut used = [false; 5];
    fn rec(
        depth: usize,
        images: &mut [usize; 5],
        used: &mut [bool; 5],
        out: &mut Vec<Permutation>,
    ) {
        if depth == 5 {
            let p = Permutation::from_images(images.to_vec()).unwrap();
            if p.cycle_type() == vec![5] {
                out.push(p);
            }
            return;
        }
        for v in 0..5 {
            if !used[v] {
                used[v] = true;
                images[depth] = v;
                rec(depth + 1, images, used, out);
                used[v] = false;
            }
        }
    }
    rec(0, &mut images, &mut used, &mut out);
    out
}

/// Emit a program whose product is `target` when `f` is true and the
/// identity otherwise. The emitted length is exactly `4^f.depth()`.
fn emit(
    f: &BooleanFormula,
    target: &Permutation,
    cache: &mut PairCache,
) -> Result<Vec<Instruction>> {
    match f {
        BooleanFormula::Var(i) => Ok(vec![Instruction {
            var: *i,
            if_false: Permutation::identity(5),
            if_true: target.clone(),
        }]),
        BooleanFormula::Not(inner) => {
            // Compile the child against target⁻¹, then multiply the tail by
            // target: true inputs cancel to the identity, false inputs
            // become target.
            let mut prog = emit(inner, &target.inverse(), cache)?;
            let last = prog.last_mut().expect("programs are nonempty");
            last.if_false = last.if_false.compose(target).expect("degree 5");
            last.if_true = last.if_true.compose(target).expect("degree 5");
            Ok(prog)
        }
        BooleanFormula::And(a, b) => {
            let (c1, c2) = cache.pair_for(target)?;
            let block_len = 4usize.pow((f.depth() - 1) as u32);
            let mut out = Vec::with_capacity(4 * block_len);
            for (sub, tgt) in [
                (a, c1.clone()),
                (b, c2.clone()),
                (a, c1.inverse()),
                (b, c2.inverse()),
            ] {
                let block = emit(sub, &tgt, cache)?;
                out.extend(pad_block(block, block_len));
            }
            Ok(out)
        }
        BooleanFormula::Or(a, b) => {
            // De Morgan through the single AND path.
            let inner = BooleanFormula::And(
                Box::new(BooleanFormula::Not(a.clone())),
                Box::new(BooleanFormula::Not(b.clone())),
            );
            let mut prog = emit(&inner, &target.inverse(), cache)?;
            let last = prog.last_mut().expect("programs are nonempty");
            last.if_false = last.if_false.compose(target).expect("degree 5");
            last.if_true = last.if_true.compose(target).expect("degree 5");
            Ok(prog)
        }
    }
}

/// Pad a block to `len` with no-op instructions so sibling blocks line up
/// and the 4^depth length law holds for unbalanced trees.
fn pad_block(mut block: Vec<Instruction>, len: usize) -> Vec<Instruction> {
    debug_assert!(block.len() <= len);
    let var = block[0].var;
    while block.len() < len {
        block.push(Instruction {
            var,
            if_false: Permutation::identity(5),
            if_true: Permutation::identity(5),
        });
    }
    block
}
