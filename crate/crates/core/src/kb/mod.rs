//! Ground fact store with conjunctive queries, negation as failure and
//! registered built-in relations.

mod term;

pub use term::{conj_vars, fmt_conj, match_ground, Binding, CmpOp, Goal, Literal, Term};

use std::collections::HashMap;
use std::fmt;
use std::iter;
use std::sync::Arc;

use indexmap::{IndexMap, IndexSet};
use thiserror::Error;

use crate::events::split_kind_suffix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbError {
    #[error("fact is not ground: {0}")]
    NonGroundFact(Term),
    #[error("functor {0} is reserved")]
    ReservedFunctor(String),
    #[error("insufficiently instantiated arguments in `{0}`")]
    UnboundBuiltinArg(String),
    #[error("negated literal `{0}` has unbound variables")]
    UnboundNegation(String),
    #[error("type mismatch in `{0}`: integers required")]
    TypeMismatch(String),
    #[error("built-in {name} failed: {message}")]
    Builtin { name: String, message: String },
}

/// A built-in relation. It receives the call arguments with the current
/// binding applied (unbound variables may remain) and returns every ground
/// argument tuple it accepts. The caller matches the tuples back onto the
/// arguments.
pub type Builtin = Arc<dyn Fn(&[Term]) -> Result<Vec<Vec<Term>>, KbError> + Send + Sync>;

/// Extra relations resolved outside the fact store, such as event lookups.
pub trait Extension {
    /// Candidate ground terms for `functor/arity`, or `None` if not handled.
    fn candidates(&self, functor: &str, arity: usize) -> Option<Vec<Term>>;
}

pub type Solutions<'a> = Box<dyn Iterator<Item = Result<Binding, KbError>> + 'a>;

#[derive(Clone)]
pub struct FactBase {
    facts: IndexMap<String, IndexMap<usize, IndexSet<Term>>>,
    builtins: HashMap<String, HashMap<usize, Builtin>>,
    len: usize,
    version: u64,
}

impl fmt::Debug for FactBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FactBase")
            .field("facts", &self.iter().collect::<Vec<_>>())
            .field("version", &self.version)
            .finish()
    }
}

impl Default for FactBase {
    fn default() -> Self {
        Self::new()
    }
}

impl FactBase {
    /// An empty store with the arithmetic built-ins `plus/3`, `minus/3` and `times/3`.
    pub fn new() -> Self {
        let mut kb = FactBase {
            facts: IndexMap::new(),
            builtins: HashMap::new(),
            len: 0,
            version: 0,
        };
        kb.install_arith("plus", |a, b| a.checked_add(b));
        kb.install_arith("minus", |a, b| a.checked_sub(b));
        kb.install_arith("times", |a, b| a.checked_mul(b));
        kb
    }

    fn install_arith(&mut self, name: &'static str, op: fn(i64, i64) -> Option<i64>) {
        let f: Builtin = Arc::new(move |args: &[Term]| {
            let (Some(a), Some(b)) = (args[0].as_int(), args[1].as_int()) else {
                let call = Term::compound(name, args.to_vec());
                return if args[0].is_ground() && args[1].is_ground() {
                    Err(KbError::TypeMismatch(call.to_string()))
                } else {
                    Err(KbError::UnboundBuiltinArg(call.to_string()))
                };
            };
            let c = op(a, b).ok_or_else(|| KbError::Builtin {
                name: name.to_string(),
                message: "integer overflow".into(),
            })?;
            Ok(vec![vec![Term::int(a), Term::int(b), Term::int(c)]])
        });
        self.builtins.entry(name.to_string()).or_default().insert(3, f);
    }

    pub fn register_builtin(
        &mut self,
        name: &str,
        arity: usize,
        f: Builtin,
    ) -> Result<(), KbError> {
        let clashes = self
            .facts
            .get(name)
            .and_then(|m| m.get(&arity))
            .is_some_and(|s| !s.is_empty());
        if clashes || split_kind_suffix(name).is_some() {
            return Err(KbError::ReservedFunctor(format!("{name}/{arity}")));
        }
        self.builtins.entry(name.to_string()).or_default().insert(arity, f);
        Ok(())
    }

    pub fn is_builtin(&self, name: &str, arity: usize) -> bool {
        self.builtins.get(name).is_some_and(|m| m.contains_key(&arity))
    }

    fn builtin(&self, name: &str, arity: usize) -> Option<&Builtin> {
        self.builtins.get(name).and_then(|m| m.get(&arity))
    }

    /// Inserts a ground fact. Returns `false` if it was already present.
    pub fn assert_fact(&mut self, fact: Term) -> Result<bool, KbError> {
        if !fact.is_ground() {
            return Err(KbError::NonGroundFact(fact));
        }
        let Some((name, arity)) = fact.functor() else {
            return Err(KbError::NonGroundFact(fact));
        };
        if self.is_builtin(name, arity) || split_kind_suffix(name).is_some() {
            return Err(KbError::ReservedFunctor(format!("{name}/{arity}")));
        }
        let set = self
            .facts
            .entry(name.to_string())
            .or_default()
            .entry(arity)
            .or_default();
        let inserted = set.insert(fact);
        if inserted {
            self.len += 1;
            self.version += 1;
        }
        Ok(inserted)
    }

    /// Removes a fact. Returns `false` if it was absent.
    pub fn retract_fact(&mut self, fact: &Term) -> bool {
        let Some((name, arity)) = fact.functor() else {
            return false;
        };
        let removed = self
            .facts
            .get_mut(name)
            .and_then(|m| m.get_mut(&arity))
            .is_some_and(|s| s.shift_remove(fact));
        if removed {
            self.len -= 1;
            self.version += 1;
        }
        removed
    }

    pub fn contains(&self, fact: &Term) -> bool {
        fact.functor()
            .and_then(|(n, a)| self.facts.get(n).and_then(|m| m.get(&a)))
            .is_some_and(|s| s.contains(fact))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Monotone counter bumped on every successful mutation.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn iter(&self) -> impl Iterator<Item = &Term> {
        self.facts.values().flat_map(|m| m.values()).flatten()
    }

    fn facts_for(&self, name: &str, arity: usize) -> impl Iterator<Item = &Term> {
        self.facts
            .get(name)
            .and_then(|m| m.get(&arity))
            .into_iter()
            .flatten()
    }

    /// Lazily enumerates the bindings that satisfy `conj`, left to right.
    pub fn query<'a>(&'a self, conj: &'a [Literal], seed: Binding) -> Solutions<'a> {
        solve(Ctx { kb: self, ext: None }, conj, seed)
    }

    /// Like [`FactBase::query`], consulting `ext` for relations it handles.
    pub fn query_with<'a>(
        &'a self,
        ext: &'a dyn Extension,
        conj: &'a [Literal],
        seed: Binding,
    ) -> Solutions<'a> {
        solve(Ctx { kb: self, ext: Some(ext) }, conj, seed)
    }
}

#[derive(Clone, Copy)]
struct Ctx<'a> {
    kb: &'a FactBase,
    ext: Option<&'a dyn Extension>,
}

fn solve<'a>(ctx: Ctx<'a>, lits: &'a [Literal], b: Binding) -> Solutions<'a> {
    let Some((first, rest)) = lits.split_first() else {
        return Box::new(iter::once(Ok(b)));
    };
    match step(ctx, first, &b) {
        Err(e) => Box::new(iter::once(Err(e))),
        Ok(next) => Box::new(next.into_iter().flat_map(move |nb| solve(ctx, rest, nb))),
    }
}

fn step(ctx: Ctx<'_>, lit: &Literal, b: &Binding) -> Result<Vec<Binding>, KbError> {
    match &lit.goal {
        Goal::Atom(atom) => {
            if lit.negated {
                let inst = atom.apply(b);
                if !inst.vars().is_empty() {
                    return Err(KbError::UnboundNegation(lit.to_string()));
                }
                let found = !match_atom(ctx, &inst, b)?.is_empty();
                Ok(if found { vec![] } else { vec![b.clone()] })
            } else {
                match_atom(ctx, atom, b)
            }
        }
        Goal::Compare(l, op, r) => {
            let l = l.apply(b);
            let r = r.apply(b);
            if lit.negated {
                if !(l.vars().is_empty() && r.vars().is_empty()) {
                    return Err(KbError::UnboundNegation(lit.to_string()));
                }
                let ok = compare(&l, *op, &r, b, lit)?;
                Ok(if ok.is_empty() { vec![b.clone()] } else { vec![] })
            } else {
                compare(&l, *op, &r, b, lit)
            }
        }
    }
}

fn match_atom(ctx: Ctx<'_>, atom: &Term, b: &Binding) -> Result<Vec<Binding>, KbError> {
    let Some((name, arity)) = atom.functor() else {
        return Err(KbError::TypeMismatch(atom.to_string()));
    };
    let mut out = Vec::new();
    if let Some(f) = ctx.kb.builtin(name, arity) {
        let args: Vec<Term> = atom.args().iter().map(|a| a.apply(b)).collect();
        for tuple in f(&args)? {
            let mut nb = b.clone();
            let ok = tuple.len() == arity
                && atom.args().iter().zip(&tuple).all(|(p, g)| match_ground(p, g, &mut nb));
            if ok {
                out.push(nb);
            }
        }
        return Ok(out);
    }
    if let Some(cands) = ctx.ext.and_then(|e| e.candidates(name, arity)) {
        for c in &cands {
            let mut nb = b.clone();
            if match_ground(atom, c, &mut nb) {
                out.push(nb);
            }
        }
        return Ok(out);
    }
    for fact in ctx.kb.facts_for(name, arity).filter(|f| may_match(atom, f, b)) {
        let mut nb = b.clone();
        if match_ground(atom, fact, &mut nb) {
            out.push(nb);
        }
    }
    Ok(out)
}

/// Cheap test that rules out most non-matching facts without cloning `b`.
fn may_match(pattern: &Term, ground: &Term, b: &Binding) -> bool {
    match pattern {
        Term::Wild(_) => true,
        Term::Var(v) => b.get(v).is_none_or(|bound| bound == ground),
        Term::Int(_) | Term::Sym(_) => pattern == ground,
        Term::Compound(f, args) => match ground {
            Term::Compound(g, gargs) => {
                f == g
                    && args.len() == gargs.len()
                    && args.iter().zip(gargs).all(|(p, g)| may_match(p, g, b))
            }
            _ => false,
        },
    }
}

/// Evaluates a comparison whose sides already have the binding applied.
fn compare(l: &Term, op: CmpOp, r: &Term, b: &Binding, lit: &Literal) -> Result<Vec<Binding>, KbError> {
    let yes = || Ok(vec![b.clone()]);
    let no = || Ok(vec![]);
    match op {
        CmpOp::Eq => {
            if l.is_ground() && r.is_ground() {
                return if l == r { yes() } else { no() };
            }
            let mut nb = b.clone();
            match (l, r) {
                (Term::Var(_), g) | (g, Term::Var(_)) if g.is_ground() => {
                    let pat = if l.is_ground() { r } else { l };
                    if match_ground(pat, g, &mut nb) {
                        Ok(vec![nb])
                    } else {
                        no()
                    }
                }
                (Term::Wild(_), _) | (_, Term::Wild(_)) => yes(),
                _ => Err(KbError::UnboundBuiltinArg(lit.to_string())),
            }
        }
        CmpOp::Ne => {
            if l.is_ground() && r.is_ground() {
                if l != r {
                    yes()
                } else {
                    no()
                }
            } else {
                Err(KbError::UnboundBuiltinArg(lit.to_string()))
            }
        }
        _ => {
            let (Some(x), Some(y)) = (l.as_int(), r.as_int()) else {
                return if l.is_ground() && r.is_ground() {
                    Err(KbError::TypeMismatch(lit.to_string()))
                } else {
                    Err(KbError::UnboundBuiltinArg(lit.to_string()))
                };
            };
            let holds = match op {
                CmpOp::Lt => x < y,
                CmpOp::Gt => x > y,
                CmpOp::Le => x <= y,
                CmpOp::Ge => x >= y,
                CmpOp::Eq | CmpOp::Ne => unreachable!(),
            };
            if holds {
                yes()
            } else {
                no()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(f: &str, args: Vec<Term>) -> Term {
        Term::compound(f, args)
    }
    fn s(x: &str) -> Term {
        Term::sym(x)
    }
    fn i(x: i64) -> Term {
        Term::int(x)
    }
    fn v(x: &str) -> Term {
        Term::var(x)
    }

    fn all(kb: &FactBase, conj: &[Literal]) -> Vec<Binding> {
        kb.query(conj, Binding::new()).collect::<Result<_, _>>().unwrap()
    }

    #[test]
    fn assert_is_idempotent() {
        let mut kb = FactBase::new();
        assert!(kb.assert_fact(t("in_queue", vec![s("e1"), i(42)])).unwrap());
        assert!(kb.contains(&t("in_queue", vec![s("e1"), i(42)])));
        assert!(!kb.assert_fact(t("in_queue", vec![s("e1"), i(42)])).unwrap());
        assert_eq!(kb.len(), 1);
    }

    #[test]
    fn assert_rejects_non_ground_and_reserved() {
        let mut kb = FactBase::new();
        assert!(matches!(
            kb.assert_fact(t("quantity", vec![s("r"), v("V")])),
            Err(KbError::NonGroundFact(_))
        ));
        assert!(matches!(
            kb.assert_fact(t("plus", vec![i(1), i(2), i(3)])),
            Err(KbError::ReservedFunctor(_))
        ));
        assert!(matches!(
            kb.assert_fact(t("temperature_N", vec![i(20)])),
            Err(KbError::ReservedFunctor(_))
        ));
    }

    #[test]
    fn retract_reports_presence() {
        let mut kb = FactBase::new();
        let a = t("in_queue", vec![s("e1"), i(42)]);
        let b = t("in_queue", vec![s("e2"), i(7)]);
        kb.assert_fact(a.clone()).unwrap();
        kb.assert_fact(b.clone()).unwrap();
        assert!(kb.retract_fact(&a));
        assert!(!kb.contains(&a));
        assert!(kb.contains(&b));
        assert!(!kb.retract_fact(&t("never", vec![i(1)])));
    }

    #[test]
    fn comparison_filters_solutions() {
        let mut kb = FactBase::new();
        kb.assert_fact(t("quantity", vec![s("r"), i(7)])).unwrap();
        let q = [
            Literal::atom(t("quantity", vec![s("r"), v("V")])),
            Literal::cmp(v("V"), CmpOp::Lt, i(10)),
        ];
        let sols = all(&kb, &q);
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].get("V"), Some(&i(7)));
    }

    #[test]
    fn duplicate_detection_query() {
        let mut kb = FactBase::new();
        kb.assert_fact(t("in_queue", vec![s("e1"), i(5)])).unwrap();
        kb.assert_fact(t("in_queue", vec![s("e2"), i(5)])).unwrap();
        let q = [
            Literal::atom(t("in_queue", vec![v("X"), v("R")])),
            Literal::atom(t("in_queue", vec![v("Y"), v("R")])),
            Literal::cmp(v("X"), CmpOp::Ne, v("Y")),
        ];
        let sols = all(&kb, &q);
        assert_eq!(sols.len(), 2);
        assert_eq!(sols[0].get("X"), Some(&s("e1")));
        assert_eq!(sols[0].get("Y"), Some(&s("e2")));
    }

    #[test]
    fn empty_store_yields_nothing() {
        let kb = FactBase::new();
        assert!(all(&kb, &[Literal::atom(t("p", vec![v("X")]))]).is_empty());
    }

    #[test]
    fn unbound_comparison_is_an_error() {
        let kb = FactBase::new();
        let q = [Literal::cmp(v("V"), CmpOp::Lt, i(3))];
        let r: Result<Vec<_>, _> = kb.query(&q, Binding::new()).collect();
        assert!(matches!(r, Err(KbError::UnboundBuiltinArg(_))));
    }

    #[test]
    fn negation_as_failure() {
        let mut kb = FactBase::new();
        kb.assert_fact(t("goal", vec![s("g1")])).unwrap();
        kb.assert_fact(t("goal", vec![s("g2")])).unwrap();
        kb.assert_fact(t("achieved", vec![s("g1")])).unwrap();
        let q = [
            Literal::atom(t("goal", vec![v("G")])),
            Literal::not(t("achieved", vec![v("G")])),
        ];
        let sols = all(&kb, &q);
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].get("G"), Some(&s("g2")));
        let bad = [Literal::not(t("achieved", vec![v("G")]))];
        let r: Result<Vec<_>, _> = kb.query(&bad, Binding::new()).collect();
        assert!(matches!(r, Err(KbError::UnboundNegation(_))));
        // wildcards are allowed in negated literals
        let ok = [Literal::not(t("achieved", vec![Term::wild("_x")]))];
        assert!(all(&kb, &ok).is_empty());
    }

    #[test]
    fn arithmetic_builtin() {
        let kb = FactBase::new();
        let q = [Literal::atom(t("plus", vec![i(2), i(3), v("Z")]))];
        assert_eq!(all(&kb, &q)[0].get("Z"), Some(&i(5)));
        let q = [Literal::atom(t("plus", vec![v("X"), i(3), v("Z")]))];
        let r: Result<Vec<_>, _> = kb.query(&q, Binding::new()).collect();
        assert!(matches!(r, Err(KbError::UnboundBuiltinArg(_))));
    }

    #[test]
    fn registered_handler() {
        let mut kb = FactBase::new();
        let ethical: Builtin = Arc::new(|args: &[Term]| {
            let ok = args[2] != Term::sym("shoot") || args[0] == Term::sym("video_game");
            Ok(if ok { vec![args.to_vec()] } else { vec![] })
        });
        kb.register_builtin("ethical", 3, ethical).unwrap();
        let q = [Literal::atom(t("ethical", vec![s("reality"), s("citizen"), s("shoot")]))];
        assert!(all(&kb, &q).is_empty());
        let q = [Literal::atom(t("ethical", vec![s("video_game"), s("player"), s("shoot")]))];
        assert_eq!(all(&kb, &q).len(), 1);
        assert!(matches!(
            kb.assert_fact(t("ethical", vec![s("a"), s("b"), s("c")])),
            Err(KbError::ReservedFunctor(_))
        ));
    }

    #[test]
    fn equality_binds_unbound_side() {
        let kb = FactBase::new();
        let q = [Literal::cmp(v("X"), CmpOp::Eq, i(4)), Literal::cmp(v("X"), CmpOp::Ge, i(4))];
        assert_eq!(all(&kb, &q)[0].get("X"), Some(&i(4)));
    }
}
