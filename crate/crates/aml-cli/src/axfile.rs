//! Hand-written axiom files.
//!
//! One duple per line: `a b <= c`, `a !<= b c`, or `a = b` for both
//! directions. Constants are whitespace-separated names, numbered in order
//! of first appearance. `#` starts a comment.

use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use aml::{Axioms, Duple, Term, Universe};

pub fn parse(text: &str) -> Result<(Arc<Universe>, Axioms)> {
    let mut names: Vec<String> = Vec::new();
    let mut lines = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (op, at) = ["!<=", "<=", "="]
            .iter()
            .find_map(|op| line.find(op).map(|i| (*op, i)))
            .ok_or_else(|| anyhow!("line {}: expected <=, !<= or =", no + 1))?;
        let (l, r) = (&line[..at], &line[at + op.len()..]);
        let side = |s: &str, names: &mut Vec<String>| -> Result<Vec<usize>> {
            let ids: Vec<usize> = s
                .split_whitespace()
                .map(|n| match names.iter().position(|x| x == n) {
                    Some(i) => i,
                    None => {
                        names.push(n.to_string());
                        names.len() - 1
                    }
                })
                .collect();
            if ids.is_empty() {
                bail!("line {}: empty term", no + 1);
            }
            Ok(ids)
        };
        let left = side(l, &mut names)?;
        let right = side(r, &mut names)?;
        lines.push((op, left, right));
    }
    if names.is_empty() {
        bail!("no duples found");
    }
    let universe = Arc::new(Universe::new(names)?);
    let n = universe.len();
    let term = |ids: Vec<usize>| Term::new(n, ids);
    let mut ax = Axioms::default();
    for (op, l, r) in lines {
        match op {
            "<=" => ax.positives.push(Duple::positive(term(l)?, term(r)?)),
            "!<=" => ax.negatives.push(Duple::negative(term(l)?, term(r)?)),
            _ => {
                ax.positives.push(Duple::positive(term(l.clone())?, term(r.clone())?));
                ax.positives.push(Duple::positive(term(r)?, term(l)?));
            }
        }
    }
    Ok((universe, ax))
}

/// Writes axioms in the format [`parse`] reads.
pub fn render(universe: &Universe, ax: &Axioms) -> String {
    let names = |t: &Term| t.constants().iter().map(|c| universe.name(c)).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    for d in ax.iter() {
        let op = if d.is_positive() { "<=" } else { "!<=" };
        out.push_str(&format!("{} {op} {}\n", names(&d.left), names(&d.right)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        let (u, ax) = parse("# demo\na b <= c\nc !<= a\nd = a  # both ways\n").unwrap();
        assert_eq!(u.names(), &["a", "b", "c", "d"]);
        assert_eq!(ax.positives.len(), 3);
        assert_eq!(ax.negatives.len(), 1);
        assert_eq!(ax.negatives[0].left.constants().to_vec(), vec![2]);
    }

    #[test]
    fn round_trips() {
        let text = "a b <= c\nc !<= a\n";
        let (u, ax) = parse(text).unwrap();
        assert_eq!(render(&u, &ax), text);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse("a b c").is_err());
        assert!(parse("<= a").is_err());
        assert!(parse("# nothing\n").is_err());
    }
}
