//! Text format for MPT models.
//!
//! ```text
//! # comment
//! model ttb
//! params e
//! bound e <= 1/2
//! tree type1 weight 1/3
//! cat consistent: (1-e)
//! cat inconsistent: e
//! ```
//!
//! Other directives: `order a <= b [<= c ...] [<= value]` (a trailing number
//! bounds the last parameter of the chain) and `equal a = b`, which makes `a`
//! an alias of the free parameter `b`. Terms are `*`-separated products of
//! `param`, `(1-param)` and an optional leading rational coefficient; a
//! category is a `+`-separated sum of terms.
//!
//! `model`, `params` and `tree` are optional for small models: parameters are
//! then declared by first use and a single implicit tree of weight 1 is used.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{BranchTerm, Category, MptModel, ParameterSpace, Rational, Tree};

struct TreeDraft {
    label: String,
    weight: Rational,
    categories: Vec<Category>,
}

#[derive(Default)]
struct Draft {
    name: Option<String>,
    declared: Option<Vec<String>>,
    inferred: Vec<String>,
    aliases: BTreeMap<String, String>,
    bounds: Vec<(String, Rational, usize)>,
    orders: Vec<(String, String, usize)>,
    trees: Vec<TreeDraft>,
}

impl Draft {
    /// Resolve a name through aliases; registers it when no `params` line
    /// exists.
    fn resolve(&mut self, name: &str, line: usize) -> Result<String> {
        let mut current = name.to_string();
        let mut hops = 0;
        while let Some(next) = self.aliases.get(&current) {
            current = next.clone();
            hops += 1;
            if hops > self.aliases.len() {
                return Err(Error::Syntax {
                    line,
                    column: 1,
                    message: format!("alias cycle through `{name}`"),
                });
            }
        }
        match &self.declared {
            Some(decl) => {
                if decl.contains(&current) {
                    Ok(current)
                } else {
                    Err(Error::UnknownParameter {
                        name: name.to_string(),
                        line,
                    })
                }
            }
            None => {
                if !self.inferred.contains(&current) {
                    self.inferred.push(current.clone());
                }
                Ok(current)
            }
        }
    }
}

pub fn parse_model(text: &str) -> Result<MptModel> {
    let mut d = Draft::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        let (keyword, rest) = match trimmed.find(char::is_whitespace) {
            Some(i) => (&trimmed[..i], trimmed[i..].trim_start()),
            None => (trimmed, ""),
        };
        let rest_col = indent + (trimmed.len() - rest.len()) + 1;
        let syntax = |column: usize, message: String| Error::Syntax {
            line: line_no,
            column,
            message,
        };
        match keyword {
            "model" => {
                let name = single_word(rest).ok_or_else(|| {
                    syntax(rest_col, "expected `model <name>`".into())
                })?;
                d.name = Some(name.to_string());
            }
            "params" => {
                if !d.trees.is_empty() {
                    return Err(syntax(1, "`params` must precede tree blocks".into()));
                }
                let decl = d.declared.get_or_insert_with(Vec::new);
                for word in rest.split_whitespace() {
                    if !is_identifier(word) {
                        return Err(syntax(
                            rest_col + rest.find(word).unwrap_or(0),
                            format!("`{word}` is not a valid parameter name"),
                        ));
                    }
                    if decl.iter().any(|p| p == word) {
                        return Err(syntax(rest_col, format!("parameter `{word}` declared twice")));
                    }
                    decl.push(word.to_string());
                }
            }
            "equal" => {
                if !d.trees.is_empty() {
                    return Err(syntax(1, "`equal` must precede tree blocks".into()));
                }
                let parts: Vec<&str> = rest.split('=').map(str::trim).collect();
                if parts.len() != 2 || !is_identifier(parts[0]) || !is_identifier(parts[1]) {
                    return Err(syntax(rest_col, "expected `equal <param> = <param>`".into()));
                }
                let (alias, target) = (parts[0].to_string(), parts[1].to_string());
                if let Some(decl) = &d.declared {
                    for p in [&alias, &target] {
                        if !decl.contains(p) && !d.aliases.contains_key(p) {
                            return Err(Error::UnknownParameter {
                                name: p.clone(),
                                line: line_no,
                            });
                        }
                    }
                }
                if alias == target {
                    return Err(syntax(rest_col, "parameter set equal to itself".into()));
                }
                if let Some(decl) = d.declared.as_mut() {
                    decl.retain(|p| p != &alias);
                }
                d.inferred.retain(|p| p != &alias);
                d.aliases.insert(alias, target);
            }
            "bound" => {
                let parts: Vec<&str> = rest.split("<=").map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(syntax(rest_col, "expected `bound <param> <= <value>`".into()));
                }
                let value = parse_rational(parts[1]).ok_or_else(|| {
                    syntax(rest_col, format!("`{}` is not a number", parts[1]))
                })?;
                d.bounds.push((parts[0].to_string(), value, line_no));
            }
            "order" | "constraint" => {
                let parts: Vec<&str> = rest.split("<=").map(str::trim).collect();
                if parts.len() < 2 {
                    return Err(syntax(rest_col, "expected `order <p> <= <q> ...`".into()));
                }
                let mut params: Vec<&str> = parts.clone();
                if let Some(value) = parse_rational(parts[parts.len() - 1]) {
                    params.pop();
                    let last = *params.last().ok_or_else(|| {
                        syntax(rest_col, "bound without a parameter".into())
                    })?;
                    d.bounds.push((last.to_string(), value, line_no));
                }
                for p in &params {
                    if !is_identifier(p) {
                        return Err(syntax(rest_col, format!("`{p}` is not a parameter name")));
                    }
                }
                for w in params.windows(2) {
                    d.orders.push((w[0].to_string(), w[1].to_string(), line_no));
                }
            }
            "tree" => {
                let words: Vec<&str> = rest.split_whitespace().collect();
                let (label, weight) = match words.as_slice() {
                    [label] => (*label, Rational::from_integer(1)),
                    [label, "weight", w] => {
                        let weight = parse_rational(w).ok_or_else(|| {
                            syntax(rest_col, format!("`{w}` is not a valid weight"))
                        })?;
                        (*label, weight)
                    }
                    _ => {
                        return Err(syntax(
                            rest_col,
                            "expected `tree <label> weight <num>/<den>`".into(),
                        ))
                    }
                };
                if !is_label(label) {
                    return Err(syntax(rest_col, format!("`{label}` is not a valid label")));
                }
                d.trees.push(TreeDraft {
                    label: label.to_string(),
                    weight,
                    categories: Vec::new(),
                });
            }
            "cat" => {
                let colon = rest
                    .find(':')
                    .ok_or_else(|| syntax(rest_col, "expected `cat <label>: <terms>`".into()))?;
                let label = rest[..colon].trim();
                if !is_label(label) {
                    return Err(syntax(rest_col, format!("`{label}` is not a valid label")));
                }
                let expr_col = rest_col + colon + 1;
                let branches = parse_expression(&mut d, &rest[colon + 1..], line_no, expr_col)?;
                if d.trees.is_empty() {
                    d.trees.push(TreeDraft {
                        label: "tree".into(),
                        weight: Rational::from_integer(1),
                        categories: Vec::new(),
                    });
                }
                d.trees.last_mut().unwrap().categories.push(Category {
                    label: label.to_string(),
                    branches,
                });
            }
            other => {
                return Err(syntax(indent + 1, format!("unknown directive `{other}`")));
            }
        }
    }
    finish(d)
}

fn finish(mut d: Draft) -> Result<MptModel> {
    let names = d.declared.clone().unwrap_or_else(|| d.inferred.clone());
    let mut bounds = BTreeMap::new();
    for (name, value, line) in std::mem::take(&mut d.bounds) {
        let resolved = d.resolve(&name, line)?;
        let idx = names.iter().position(|n| *n == resolved).unwrap();
        let entry = bounds.entry(idx).or_insert(value);
        if value < *entry {
            *entry = value;
        }
    }
    let mut orders = Vec::new();
    for (a, b, line) in std::mem::take(&mut d.orders) {
        let ra = d.resolve(&a, line)?;
        let rb = d.resolve(&b, line)?;
        let ia = names.iter().position(|n| *n == ra).unwrap();
        let ib = names.iter().position(|n| *n == rb).unwrap();
        orders.push((ia, ib));
    }
    let space = ParameterSpace::new(names.clone(), bounds, orders)?;
    let trees = d
        .trees
        .into_iter()
        .map(|t| Tree {
            label: t.label,
            weight: t.weight,
            categories: t.categories,
        })
        .collect();
    MptModel::new(d.name.unwrap_or_else(|| "model".into()), trees, space)
}

/// Parse `term + term + ...`; exponent keys are final parameter indices.
fn parse_expression(d: &mut Draft, expr: &str, line: usize, col0: usize) -> Result<Vec<BranchTerm>> {
    let mut branches = Vec::new();
    let mut offset = 0;
    for term in expr.split('+') {
        let col = col0 + offset;
        offset += term.len() + 1;
        if term.trim().is_empty() {
            return Err(Error::Syntax {
                line,
                column: col,
                message: "empty term".into(),
            });
        }
        let mut coefficient = Rational::from_integer(1);
        let mut exponents: BTreeMap<usize, (u32, u32)> = BTreeMap::new();
        let mut foffset = 0;
        for (k, raw) in term.split('*').enumerate() {
            let fcol = col + foffset + (raw.len() - raw.trim_start().len());
            foffset += raw.len() + 1;
            let f = raw.trim();
            let err = |message: String| Error::Syntax {
                line,
                column: fcol,
                message,
            };
            if f.is_empty() {
                return Err(err("empty factor".into()));
            }
            if let Some(inner) = f.strip_prefix('(') {
                let inner = inner
                    .strip_suffix(')')
                    .ok_or_else(|| err(format!("unbalanced parenthesis in `{f}`")))?;
                let (one, name) = inner
                    .split_once('-')
                    .ok_or_else(|| err(format!("expected `(1-param)`, found `{f}`")))?;
                if one.trim() != "1" || !is_identifier(name.trim()) {
                    return Err(err(format!("expected `(1-param)`, found `{f}`")));
                }
                let idx = param_index(d, name.trim(), line)?;
                exponents.entry(idx).or_insert((0, 0)).1 += 1;
            } else if f.starts_with(|c: char| c.is_ascii_digit()) {
                if k != 0 {
                    return Err(err("a coefficient must lead its term".into()));
                }
                coefficient = parse_rational(f)
                    .ok_or_else(|| err(format!("`{f}` is not a rational coefficient")))?;
                if *coefficient.numer() == 0 {
                    return Err(err("coefficient must be positive".into()));
                }
            } else if is_identifier(f) {
                let idx = param_index(d, f, line)?;
                exponents.entry(idx).or_insert((0, 0)).0 += 1;
            } else {
                return Err(err(format!("unexpected factor `{f}`")));
            }
        }
        branches.push(BranchTerm::new(coefficient, exponents));
    }
    Ok(branches)
}

fn param_index(d: &mut Draft, name: &str, line: usize) -> Result<usize> {
    let resolved = d.resolve(name, line)?;
    let names = d.declared.as_ref().unwrap_or(&d.inferred);
    Ok(names.iter().position(|n| *n == resolved).unwrap())
}

fn single_word(s: &str) -> Option<&str> {
    let mut it = s.split_whitespace();
    let w = it.next()?;
    if it.next().is_some() || !is_label(w) {
        return None;
    }
    Some(w)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_label(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '\'' | '%'))
}

/// `3`, `1/4` or a decimal such as `0.25`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().ok()?;
        let d: u64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || frac.len() > 18 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
        let den = 10u64.pow(frac.len() as u32);
        let num = int.checked_mul(den)?.checked_add(frac.parse().ok()?)?;
        return Some(Rational::new(num, den));
    }
    s.parse::<u64>().ok().map(Rational::from_integer)
}

fn format_rational(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Canonical text form; `parse_model(&serialize_model(m)) == m`.
pub fn serialize_model(model: &MptModel) -> String {
    let names = model.space().names();
    let mut out = String::new();
    writeln!(out, "model {}", model.name()).unwrap();
    writeln!(out, "params {}", names.join(" ")).unwrap();
    for (&i, b) in model.space().declared_upper_bounds() {
        writeln!(out, "bound {} <= {}", names[i], format_rational(b)).unwrap();
    }
    for &(i, j) in model.space().order_constraints() {
        writeln!(out, "order {} <= {}", names[i], names[j]).unwrap();
    }
    for tree in model.trees() {
        writeln!(out, "tree {} weight {}", tree.label, format_rational(&tree.weight)).unwrap();
        for cat in &tree.categories {
            let terms: Vec<String> = cat
                .branches
                .iter()
                .map(|b| format_term(b, names))
                .collect();
            writeln!(out, "cat {}: {}", cat.label, terms.join(" + ")).unwrap();
        }
    }
    out
}

fn format_term(b: &BranchTerm, names: &[String]) -> String {
    let mut factors = Vec::new();
    if *b.coefficient.numer() != *b.coefficient.denom() || b.exponents.is_empty() {
        factors.push(format_rational(&b.coefficient));
    }
    for (&s, &(a, c)) in &b.exponents {
        for _ in 0..a {
            factors.push(names[s].clone());
        }
        for _ in 0..c {
            factors.push(format!("(1-{})", names[s]));
        }
    }
    factors.join("*")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_bernoulli() {
        let m = parse_model("cat hit: p\ncat miss: (1-p)").unwrap();
        assert_eq!(m.free_count(), 1);
        assert_eq!(m.trees().len(), 1);
        assert_eq!(m.trees()[0].categories.len(), 2);
        let p = m.category_probabilities(&[0.3]).unwrap();
        assert!((p[0][0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn order_chain_with_trailing_bound() {
        let text = "params e1 e2 e3\norder e1 <= e3 <= e2 <= 0.5\n\
                    tree t1 weight 1/3\ncat c: (1-e1)\ncat e: e1\n\
                    tree t2 weight 1/3\ncat c: e2\ncat e: (1-e2)\n\
                    tree t3 weight 1/3\ncat c: (1-e3)\ncat e: e3\n";
        let m = parse_model(text).unwrap();
        let space = m.space();
        let e1 = space.index_of("e1").unwrap();
        let e2 = space.index_of("e2").unwrap();
        let e3 = space.index_of("e3").unwrap();
        assert_eq!(space.order_constraints(), &[(e1, e3), (e3, e2)][..]);
        assert_eq!(space.declared_upper_bounds().len(), 1);
        assert_eq!(space.declared_upper_bounds()[&e2], Rational::new(1, 2));
    }

    #[test]
    fn equal_directive_shares_index() {
        let text = "params a b g\nequal g = a\ncat x: a*b\ncat y: g*(1-b) + (1-a)\n";
        let m = parse_model(text).unwrap();
        assert_eq!(m.free_count(), 2);
        assert_eq!(m.space().names(), &["a".to_string(), "b".to_string()]);
        let p = m.category_probabilities(&[0.4, 0.25]).unwrap();
        assert!((p[0][0] - 0.1).abs() < 1e-15);
        assert!((p[0][1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn coefficients_and_repeated_factors() {
        let m = parse_model("cat a: 1/4*p*p\ncat b: 3/4*p*p + (1-p)*(1-p) + 2*p*(1-p)").unwrap();
        let br = &m.trees()[0].categories[0].branches[0];
        assert_eq!(br.coefficient, Rational::new(1, 4));
        assert_eq!(br.exponents[&0], (2, 0));
        let p = m.category_probabilities(&[0.5]).unwrap();
        assert!((p[0][0] + p[0][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_model("params p\ncat hit: p\ncat miss: (1-p\n").unwrap_err();
        match err {
            Error::Syntax { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, 11);
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_model("params p\nfoo bar\n").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 2, column: 1, .. }));
    }

    #[test]
    fn unknown_parameter() {
        let err = parse_model("params p\ncat hit: q\ncat miss: (1-q)\n").unwrap_err();
        assert_eq!(
            err,
            Error::UnknownParameter {
                name: "q".into(),
                line: 2
            }
        );
    }

    #[test]
    fn weights_not_summing_to_one() {
        let text = "params p\ntree a weight 1/2\ncat x: p\ncat y: (1-p)\n\
                    tree b weight 1/3\ncat x: p\ncat y: (1-p)\n";
        assert_eq!(
            parse_model(text).unwrap_err(),
            Error::WeightSum { sum: "5/6".into() }
        );
    }

    #[test]
    fn cyclic_constraints() {
        let text = "params a b\norder a <= b\norder b <= a\ncat x: a*b\ncat y: (1-a) + a*(1-b)\n";
        assert!(matches!(
            parse_model(text).unwrap_err(),
            Error::CyclicOrder { .. }
        ));
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("0.5"), Some(Rational::new(1, 2)));
        assert_eq!(parse_rational("3/12"), Some(Rational::new(1, 4)));
        assert_eq!(parse_rational("2"), Some(Rational::from_integer(2)));
        assert_eq!(parse_rational(".25"), Some(Rational::new(1, 4)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
    }

    #[test]
    fn serialization_is_canonical() {
        let m = parse_model("model toy\ncat a: 1/4*p*q\ncat b: 3/4*q*p + (1-q)\n").unwrap();
        let text = serialize_model(&m);
        assert_eq!(
            text,
            "model toy\nparams p q\ntree tree weight 1\ncat a: 1/4*p*q\ncat b: 3/4*p*q + (1-q)\n"
        );
        assert_eq!(parse_model(&text).unwrap(), m);
    }
}
