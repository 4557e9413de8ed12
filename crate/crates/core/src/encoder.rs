//! Fixed-length 0/1 encoding of atoms for network input.
//!
//! Layout: a predicate one-hot of length `np`, then for each of the `ma`
//! argument slots `[is_variable, is_empty]`, a variable one-hot (`nv`) and a
//! constant one-hot (`nc`). Unused slots of short atoms set only `is_empty`.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::logic::{Atom, Term, VarId, Vocabulary};

/// How variable ids reach the input layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VariableMode {
    /// The variable's own id picks its one-hot position.
    #[default]
    Identity,
    /// Variables are renumbered by first occurrence before encoding.
    Canonical,
}

impl FromStr for VariableMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(VariableMode::Identity),
            "canonical" => Ok(VariableMode::Canonical),
            _ => Err(Error::Config(format!("unknown variable mode `{s}`"))),
        }
    }
}

impl VariableMode {
    pub fn name(self) -> &'static str {
        match self {
            VariableMode::Identity => "identity",
            VariableMode::Canonical => "canonical",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomEncoding {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    vocab: Vocabulary,
    mode: VariableMode,
}

impl Encoder {
    pub fn new(vocab: Vocabulary, mode: VariableMode) -> Self {
        Encoder { vocab, mode }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn mode(&self) -> VariableMode {
        self.mode
    }

    fn slot_width(&self) -> usize {
        2 + self.vocab.num_variables() + self.vocab.num_constants()
    }

    /// `np + ma * (2 + nv + nc)`.
    pub fn dim(&self) -> usize {
        self.vocab.num_predicates() + self.vocab.max_arity() * self.slot_width()
    }

    /// Positions of the ones, in increasing order.
    pub fn active_indices(&self, atom: &Atom) -> Result<Vec<usize>> {
        let atom = match self.mode {
            VariableMode::Identity => std::borrow::Cow::Borrowed(atom),
            VariableMode::Canonical => std::borrow::Cow::Owned(atom.canonical()),
        };
        self.vocab
            .check_atom(&atom, false)
            .map_err(|e| Error::Encoding(e.to_string()))?;
        let np = self.vocab.num_predicates();
        let nv = self.vocab.num_variables();
        let width = self.slot_width();
        let mut out = Vec::with_capacity(1 + 2 * self.vocab.max_arity());
        out.push(atom.predicate as usize);
        for k in 0..self.vocab.max_arity() {
            let base = np + k * width;
            match atom.args.get(k) {
                Some(Term::Var(v)) => {
                    out.push(base);
                    out.push(base + 2 + *v as usize);
                }
                Some(Term::Const(c)) => out.push(base + 2 + nv + *c as usize),
                None => out.push(base + 1),
            }
        }
        Ok(out)
    }

    pub fn encode(&self, atom: &Atom) -> Result<AtomEncoding> {
        let mut values = vec![0.0; self.dim()];
        for i in self.active_indices(atom)? {
            values[i] = 1.0;
        }
        Ok(AtomEncoding { values })
    }

    /// Reconstructs the encoded atom (in canonical mode, its canonical form).
    pub fn decode(&self, enc: &AtomEncoding) -> Result<Atom> {
        if enc.values.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: enc.values.len(),
            });
        }
        let np = self.vocab.num_predicates();
        let nv = self.vocab.num_variables();
        let width = self.slot_width();
        let on = |i: usize| enc.values[i] > 0.5;
        let predicate = (0..np)
            .find(|&i| on(i))
            .ok_or_else(|| Error::Encoding("no predicate bit set".into()))? as u32;
        let mut args = Vec::new();
        for k in 0..self.vocab.max_arity() {
            let base = np + k * width;
            if on(base + 1) {
                break;
            }
            let term = if on(base) {
                (0..nv)
                    .find(|&v| on(base + 2 + v))
                    .map(|v| Term::Var(v as VarId))
            } else {
                (0..self.vocab.num_constants())
                    .find(|&c| on(base + 2 + nv + c))
                    .map(|c| Term::Const(c as u32))
            };
            args.push(term.ok_or_else(|| Error::Encoding(format!("slot {k} is empty")))?);
        }
        Ok(Atom::new(predicate, args))
    }

    /// See [`fit_to_pool`].
    pub fn fit_to_pool(&self, atom: &Atom) -> Atom {
        fit_to_pool(atom, self.vocab.num_variables())
    }
}

/// Maps variables outside a pool of `num_variables` ids (such as the fresh ids
/// a reasoner creates) onto unused pool ids, by first occurrence. Pool
/// variables keep their ids; distinct variables stay distinct whenever the
/// pool is large enough.
pub fn fit_to_pool(atom: &Atom, num_variables: usize) -> Atom {
    let nv = num_variables as VarId;
    let vars = atom.variables();
    if vars.iter().all(|&v| v < nv) {
        return atom.clone();
    }
    let mut free = (0..nv).filter(|v| !vars.contains(v));
    let map: BTreeMap<VarId, VarId> = vars
        .iter()
        .filter(|&&v| v >= nv)
        .map(|&v| (v, free.next().unwrap_or(v % nv)))
        .collect();
    atom.rename(&map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_atom;

    fn encoder() -> Encoder {
        let mut arities = vec![2; 20];
        arities[2] = 1;
        Encoder::new(
            Vocabulary::new(arities, 200, 10, 2).unwrap(),
            VariableMode::Identity,
        )
    }

    #[test]
    fn dimension() {
        assert_eq!(encoder().dim(), 444);
    }

    #[test]
    fn duplicate_variables_are_visible() {
        let e = encoder();
        let dup = e.encode(&parse_atom("p6(V1, V1)").unwrap()).unwrap();
        let two = e.encode(&parse_atom("p6(V1, V2)").unwrap()).unwrap();
        assert_ne!(dup, two);
        let idx = e.active_indices(&parse_atom("p6(V1, V1)").unwrap()).unwrap();
        assert_eq!(idx[2] - 20, idx[4] - 20 - 212);
    }

    #[test]
    fn unary_padding() {
        let e = encoder();
        let idx = e.active_indices(&parse_atom("p2(c1)").unwrap()).unwrap();
        assert_eq!(idx, vec![2, 20 + 2 + 10 + 1, 20 + 212 + 1]);
    }

    #[test]
    fn name_sensitive_in_identity_mode() {
        let e = encoder();
        let a = e.encode(&parse_atom("p6(V1, c1)").unwrap()).unwrap();
        let b = e.encode(&parse_atom("p6(V2, c1)").unwrap()).unwrap();
        assert_ne!(a, b);
        let canonical = Encoder::new(e.vocabulary().clone(), VariableMode::Canonical);
        assert_eq!(
            canonical.encode(&parse_atom("p6(V1, c1)").unwrap()).unwrap(),
            canonical.encode(&parse_atom("p6(V2, c1)").unwrap()).unwrap()
        );
    }

    #[test]
    fn out_of_vocabulary() {
        let e = encoder();
        assert!(e.encode(&parse_atom("p6(V11, c1)").unwrap()).is_err());
        assert!(e.encode(&parse_atom("p6(c200, c1)").unwrap()).is_err());
        assert!(e.encode(&parse_atom("p2(c1, c1)").unwrap()).is_err());
        assert!(e.encode(&parse_atom("p20(c1)").unwrap()).is_err());
    }

    #[test]
    fn fresh_variables_fit_the_pool() {
        let e = encoder();
        let a = parse_atom("p6(V3, V57)").unwrap();
        let fitted = e.fit_to_pool(&a);
        assert_eq!(fitted, parse_atom("p6(V3, V0)").unwrap());
        let b = e.fit_to_pool(&parse_atom("p6(V40, V40)").unwrap());
        assert_eq!(b, parse_atom("p6(V0, V0)").unwrap());
    }
}
