//! Terms, bindings and literals shared by every layer of the engine.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A first-order term in the Prolog style.
///
/// Symbols start lowercase, variables uppercase and wildcards with `_`.
/// A wildcard matches anything and never binds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Int(i64),
    Sym(String),
    Var(String),
    Wild(String),
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn sym(name: impl Into<String>) -> Self {
        Term::Sym(name.into())
    }

    pub fn int(value: i64) -> Self {
        Term::Int(value)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn wild(name: impl Into<String>) -> Self {
        Term::Wild(name.into())
    }

    /// Builds a compound; an empty argument list collapses to a symbol.
    pub fn compound(functor: impl Into<String>, args: Vec<Term>) -> Self {
        let functor = functor.into();
        if args.is_empty() {
            Term::Sym(functor)
        } else {
            Term::Compound(functor, args)
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Int(_) | Term::Sym(_) => true,
            Term::Var(_) | Term::Wild(_) => false,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Term::Int(_) | Term::Sym(_))
    }

    /// `(name, arity)` for symbols and compounds; `None` otherwise.
    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            Term::Sym(s) => Some((s, 0)),
            Term::Compound(f, args) => Some((f, args.len())),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(_, args) => args,
            _ => &[],
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Replaces bound variables. Unbound variables and wildcards stay.
    pub fn apply(&self, binding: &Binding) -> Term {
        match self {
            Term::Var(v) => binding.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Compound(f, args) => {
                Term::Compound(f.clone(), args.iter().map(|a| a.apply(binding)).collect())
            }
            _ => self.clone(),
        }
    }

    /// Renames the outermost functor, keeping the arguments.
    pub fn with_functor(&self, name: &str) -> Term {
        match self {
            Term::Sym(_) => Term::Sym(name.to_string()),
            Term::Compound(_, args) => Term::Compound(name.to_string(), args.clone()),
            other => other.clone(),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(v) => write!(f, "{v}"),
            Term::Sym(s) | Term::Var(s) | Term::Wild(s) => f.write_str(s),
            Term::Compound(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Variable name to ground term.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Binding(BTreeMap<String, Term>);

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    /// Binds `var` to a ground value. Panics in debug builds on non-ground values.
    pub fn bind(&mut self, var: impl Into<String>, value: Term) {
        debug_assert!(value.is_ground(), "binding to non-ground term {value}");
        self.0.insert(var.into(), value);
    }

    pub fn remove(&mut self, var: &str) -> Option<Term> {
        self.0.remove(var)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.0.contains_key(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.0.iter()
    }

    /// Adds every entry of `other` not already bound here.
    pub fn merge_missing(&mut self, other: &Binding) {
        for (k, v) in other.iter() {
            self.0.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

impl FromIterator<(String, Term)> for Binding {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        Binding(iter.into_iter().collect())
    }
}

/// Matches `pattern` against a ground term, extending `binding` in place.
///
/// On failure the binding is left exactly as it was.
pub fn match_ground(pattern: &Term, ground: &Term, binding: &mut Binding) -> bool {
    let mut added = Vec::new();
    if match_inner(pattern, ground, binding, &mut added) {
        true
    } else {
        for v in added {
            binding.remove(&v);
        }
        false
    }
}

fn match_inner(pattern: &Term, ground: &Term, b: &mut Binding, added: &mut Vec<String>) -> bool {
    match pattern {
        Term::Wild(_) => true,
        Term::Var(v) => match b.get(v) {
            Some(bound) => bound == ground,
            None => {
                if !ground.is_ground() {
                    return false;
                }
                b.bind(v.clone(), ground.clone());
                added.push(v.clone());
                true
            }
        },
        Term::Int(_) | Term::Sym(_) => pattern == ground,
        Term::Compound(f, args) => match ground {
            Term::Compound(g, gargs) if f == g && args.len() == gargs.len() => args
                .iter()
                .zip(gargs)
                .all(|(p, g)| match_inner(p, g, b, added)),
            _ => false,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "\\=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Goal {
    Atom(Term),
    Compare(Term, CmpOp, Term),
}

/// A possibly negated atom or comparison inside a conjunction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub negated: bool,
    pub goal: Goal,
}

impl Literal {
    pub fn atom(t: Term) -> Self {
        Literal { negated: false, goal: Goal::Atom(t) }
    }

    pub fn not(t: Term) -> Self {
        Literal { negated: true, goal: Goal::Atom(t) }
    }

    pub fn cmp(lhs: Term, op: CmpOp, rhs: Term) -> Self {
        Literal { negated: false, goal: Goal::Compare(lhs, op, rhs) }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match &self.goal {
            Goal::Atom(t) => t.collect_vars(out),
            Goal::Compare(l, _, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        match &self.goal {
            Goal::Atom(t) => write!(f, "{t}"),
            Goal::Compare(l, op, r) => write!(f, "{l} {} {r}", op.symbol()),
        }
    }
}

pub fn conj_vars(conj: &[Literal]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    conj.iter().for_each(|l| l.collect_vars(&mut out));
    out
}

pub fn fmt_conj(conj: &[Literal]) -> String {
    conj.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}
