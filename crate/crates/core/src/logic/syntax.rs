//! Textual clause syntax.
//!
//! ```text
//! % comment
//! p6(c1, c2).
//! p1(V1) :- p2(V1, c3), p4(V1).
//! ```
//!
//! Tokens starting with an uppercase letter or `_` are variables, everything
//! else is a constant. The plain parsers expect the numeric naming scheme
//! (`p<i>`, `c<i>`, `V<i>`); a [`SymbolTable`] interns arbitrary names.

use std::collections::HashMap;
use std::fmt;

use super::{Atom, Clause, ConstId, PredicateId, Term, VarId};
use crate::error::{Error, Result};

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "V{v}"),
            Term::Const(c) => write!(f, "c{c}"),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}(", self.predicate)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, a) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{a}")?;
            }
        }
        write!(f, ".")
    }
}

trait Resolver {
    fn predicate(&mut self, name: &str, arity: usize) -> std::result::Result<PredicateId, String>;
    fn constant(&mut self, name: &str) -> std::result::Result<ConstId, String>;
    fn variable(&mut self, name: &str) -> std::result::Result<VarId, String>;
}

struct Numeric;

fn numeric_suffix(name: &str, prefix: char) -> Option<u32> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

impl Resolver for Numeric {
    fn predicate(&mut self, name: &str, _arity: usize) -> std::result::Result<PredicateId, String> {
        numeric_suffix(name, 'p').ok_or_else(|| format!("expected predicate `p<n>`, found `{name}`"))
    }

    fn constant(&mut self, name: &str) -> std::result::Result<ConstId, String> {
        numeric_suffix(name, 'c').ok_or_else(|| format!("expected constant `c<n>`, found `{name}`"))
    }

    fn variable(&mut self, name: &str) -> std::result::Result<VarId, String> {
        numeric_suffix(name, 'V').ok_or_else(|| format!("expected variable `V<n>`, found `{name}`"))
    }
}

/// Interns arbitrary symbol names, e.g. `mom(X, john)`.
///
/// Ids are handed out in order of first appearance per symbol kind.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    predicates: Vec<(String, usize)>,
    constants: Vec<String>,
    variables: Vec<String>,
    predicate_ids: HashMap<String, PredicateId>,
    constant_ids: HashMap<String, ConstId>,
    variable_ids: HashMap<String, VarId>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse_atom(&mut self, text: &str) -> Result<Atom> {
        let mut p = Parser::new(text);
        let atom = p.atom(self)?;
        p.finish()?;
        Ok(atom)
    }

    pub fn parse_clause(&mut self, text: &str) -> Result<Clause> {
        let mut p = Parser::new(text);
        let clause = p.clause(self)?;
        p.finish()?;
        Ok(clause)
    }

    /// Arities of the interned predicates, in id order.
    pub fn arities(&self) -> Vec<usize> {
        self.predicates.iter().map(|(_, a)| *a).collect()
    }

    pub fn num_constants(&self) -> usize {
        self.constants.len()
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn constant_id(&self, name: &str) -> Option<ConstId> {
        self.constant_ids.get(name).copied()
    }

    pub fn variable_id(&self, name: &str) -> Option<VarId> {
        self.variable_ids.get(name).copied()
    }

    fn term_name(&self, t: Term) -> String {
        match t {
            Term::Var(v) => self
                .variables
                .get(v as usize)
                .cloned()
                .unwrap_or_else(|| format!("_G{v}")),
            Term::Const(c) => self
                .constants
                .get(c as usize)
                .cloned()
                .unwrap_or_else(|| format!("c{c}")),
        }
    }

    /// Formats an atom with the interned names.
    pub fn format_atom(&self, atom: &Atom) -> String {
        let pred = self
            .predicates
            .get(atom.predicate as usize)
            .map(|(n, _)| n.clone())
            .unwrap_or_else(|| format!("p{}", atom.predicate));
        let args: Vec<String> = atom.args.iter().map(|t| self.term_name(*t)).collect();
        format!("{pred}({})", args.join(", "))
    }
}

impl Resolver for SymbolTable {
    fn predicate(&mut self, name: &str, arity: usize) -> std::result::Result<PredicateId, String> {
        if let Some(&id) = self.predicate_ids.get(name) {
            let known = self.predicates[id as usize].1;
            if known != arity {
                return Err(format!("`{name}` used with arity {arity}, earlier {known}"));
            }
            return Ok(id);
        }
        let id = self.predicates.len() as PredicateId;
        self.predicates.push((name.to_string(), arity));
        self.predicate_ids.insert(name.to_string(), id);
        Ok(id)
    }

    fn constant(&mut self, name: &str) -> std::result::Result<ConstId, String> {
        let next = self.constants.len() as ConstId;
        let id = *self.constant_ids.entry(name.to_string()).or_insert(next);
        if id == next {
            self.constants.push(name.to_string());
        }
        Ok(id)
    }

    fn variable(&mut self, name: &str) -> std::result::Result<VarId, String> {
        let next = self.variables.len() as VarId;
        let id = *self.variable_ids.entry(name.to_string()).or_insert(next);
        if id == next {
            self.variables.push(name.to_string());
        }
        Ok(id)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
            line: 1,
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: self.line,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() {
            match self.src[self.pos] {
                b'\n' => {
                    self.line += 1;
                    self.pos += 1;
                }
                b'%' => {
                    while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s.as_bytes()) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        if self.eat(s) {
            Ok(())
        } else {
            let found = self
                .src
                .get(self.pos)
                .map_or("end of input".to_string(), |b| format!("`{}`", *b as char));
            self.err(format!("expected `{s}`, found {found}"))
        }
    }

    fn ident(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected an identifier");
        }
        // Identifier bytes are ASCII, so this slice is valid UTF-8.
        Ok(std::str::from_utf8(&self.src[start..self.pos]).unwrap())
    }

    fn term<R: Resolver>(&mut self, r: &mut R) -> Result<Term> {
        let name = self.ident()?;
        let first = name.as_bytes()[0];
        let res = if first.is_ascii_uppercase() || first == b'_' {
            r.variable(name).map(Term::Var)
        } else {
            r.constant(name).map(Term::Const)
        };
        res.or_else(|m| self.err(m))
    }

    fn atom<R: Resolver>(&mut self, r: &mut R) -> Result<Atom> {
        let name = self.ident()?;
        let first = name.as_bytes()[0];
        if first.is_ascii_uppercase() || first == b'_' {
            return self.err(format!("predicate `{name}` must not look like a variable"));
        }
        self.expect("(")?;
        let mut args = vec![self.term(r)?];
        while self.eat(",") {
            args.push(self.term(r)?);
        }
        self.expect(")")?;
        let pred = r.predicate(name, args.len()).or_else(|m| self.err(m))?;
        Ok(Atom::new(pred, args))
    }

    fn clause<R: Resolver>(&mut self, r: &mut R) -> Result<Clause> {
        let head = self.atom(r)?;
        let mut body = Vec::new();
        if self.eat(":-") {
            body.push(self.atom(r)?);
            while self.eat(",") {
                body.push(self.atom(r)?);
            }
        }
        self.expect(".")?;
        Ok(Clause { head, body })
    }

    fn finish(&mut self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            self.err("trailing input")
        }
    }
}

/// Parses one atom in the numeric naming scheme, e.g. `p6(V1, c2)`.
pub fn parse_atom(text: &str) -> Result<Atom> {
    let mut p = Parser::new(text);
    let atom = p.atom(&mut Numeric)?;
    p.finish()?;
    Ok(atom)
}

pub fn parse_term(text: &str) -> Result<Term> {
    let mut p = Parser::new(text);
    let t = p.term(&mut Numeric)?;
    p.finish()?;
    Ok(t)
}

/// Parses one clause including its terminating period.
pub fn parse_clause(text: &str) -> Result<Clause> {
    let mut p = Parser::new(text);
    let clause = p.clause(&mut Numeric)?;
    p.finish()?;
    Ok(clause)
}

/// Parses a whole program: any number of clauses, comments and blank lines.
pub fn parse_clauses(text: &str) -> Result<Vec<Clause>> {
    let mut p = Parser::new(text);
    let mut out = Vec::new();
    while !p.at_end() {
        out.push(p.clause(&mut Numeric)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fact_and_rule() {
        let text = "% header\np6(c1, c2).\n\np1(V1) :- p2(V1, c3), p4(V1).\n";
        let clauses = parse_clauses(text).unwrap();
        assert_eq!(clauses.len(), 2);
        assert_eq!(clauses[0].to_string(), "p6(c1, c2).");
        assert_eq!(clauses[1].to_string(), "p1(V1) :- p2(V1, c3), p4(V1).");
        assert_eq!(parse_clauses(&format!("{}\n{}", clauses[0], clauses[1])).unwrap(), clauses);
    }

    #[test]
    fn whitespace_insensitive() {
        let a = parse_clause("p1 ( V1 ) :-p2(V1,c3) ,p4( V1 ) .").unwrap();
        assert_eq!(a, parse_clause("p1(V1) :- p2(V1, c3), p4(V1).").unwrap());
    }

    #[test]
    fn reports_line_numbers() {
        match parse_clauses("p1(c0).\np2(c0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_atom("mom(X, john)").is_err());
    }

    #[test]
    fn symbol_table_interns_names() {
        let mut table = SymbolTable::new();
        let a = table.parse_atom("mom(X, john)").unwrap();
        let b = table.parse_atom("mom(mary, john)").unwrap();
        assert_eq!(a.predicate, b.predicate);
        assert_eq!(table.format_atom(&b), "mom(mary, john)");
        assert!(table.parse_atom("mom(X)").is_err());
        let r = table.parse_clause("parent(X, Y) :- mom(X, Y).").unwrap();
        assert_eq!(r.body[0].predicate, a.predicate);
    }
}
