//! Nestable forward-mode differentiation.
//!
//! A [`Num`] is a truncated polynomial in any number of nilpotent
//! perturbations `ε_t` (`ε_t² = 0`), one per differentiation scope. Each
//! scope draws a fresh [`Tag`] from a global monotone counter, so two scopes
//! never share a perturbation and derivatives of derivatives stay separate.
//!
//! Internally a number is stored as a tower: `primal + ε_t · tangent`, where
//! `t` is the largest tag present and `primal`/`tangent` only mention smaller
//! tags. Any total order on tags yields a canonical form because the
//! perturbations commute; the creation order is simply the convenient one.
//!
//! [`stop_gradient`] drops every perturbation and keeps the primal value.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

static NEXT_TAG: AtomicU64 = AtomicU64::new(1);

/// Identifier of one differentiation scope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(u64);

impl Tag {
    /// Issues a tag that no other scope, on any thread, has seen.
    pub fn fresh() -> Self {
        Tag(NEXT_TAG.fetch_add(1, Ordering::Relaxed))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("derivative is not finite ({0})")]
    NonFinite(f64),
}

/// Scalar algebra that game values are written against.
///
/// Implemented for plain `f64` and for the dual [`Num`], so one code path
/// serves evaluation and differentiation.
pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn constant(x: f64) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }

    fn one() -> Self {
        Self::constant(1.0)
    }

    /// Multiplication by a real constant.
    fn scale(&self, c: f64) -> Self;

    /// The real part with all perturbations discarded.
    fn real(&self) -> f64;
}

impl Scalar for f64 {
    fn constant(x: f64) -> Self {
        x
    }

    fn scale(&self, c: f64) -> Self {
        self * c
    }

    fn real(&self) -> f64 {
        *self
    }
}

/// Dual scalar with tagged, nestable perturbations.
#[derive(Clone)]
pub enum Num {
    Real(f64),
    Dual(Rc<Node>),
}

#[derive(Debug)]
pub struct Node {
    tag: Tag,
    primal: Num,
    tangent: Num,
}

impl Num {
    /// `x + ε_tag`: the variable a scope differentiates with respect to.
    pub fn seed(x: Num, tag: Tag) -> Num {
        debug_assert!(x.top_tag().is_none_or(|t| t < tag));
        Num::Dual(Rc::new(Node {
            tag,
            primal: x,
            tangent: Num::Real(1.0),
        }))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Num::Real(x) if *x == 0.0)
    }

    /// Outermost (largest) perturbation tag, if any.
    pub fn top_tag(&self) -> Option<Tag> {
        match self {
            Num::Real(_) => None,
            Num::Dual(n) => Some(n.tag),
        }
    }

    /// The coefficient of `ε_tag`, itself a dual number in the remaining tags.
    pub fn tangent(&self, tag: Tag) -> Num {
        match self {
            Num::Real(_) => Num::Real(0.0),
            Num::Dual(n) if n.tag == tag => n.tangent.clone(),
            Num::Dual(n) if n.tag < tag => Num::Real(0.0),
            Num::Dual(n) => make(n.tag, n.primal.tangent(tag), n.tangent.tangent(tag)),
        }
    }

    /// Primal with the perturbation `tag` removed, other tags kept.
    pub fn without(&self, tag: Tag) -> Num {
        match self {
            Num::Real(_) => self.clone(),
            Num::Dual(n) if n.tag == tag => n.primal.clone(),
            Num::Dual(n) if n.tag < tag => self.clone(),
            Num::Dual(n) => make(n.tag, n.primal.without(tag), n.tangent.without(tag)),
        }
    }

    pub fn value(&self) -> f64 {
        let mut cur = self;
        loop {
            match cur {
                Num::Real(x) => return *x,
                Num::Dual(n) => cur = &n.primal,
            }
        }
    }

    fn split(&self, tag: Tag) -> (Num, Num) {
        match self {
            Num::Dual(n) if n.tag == tag => (n.primal.clone(), n.tangent.clone()),
            _ => (self.clone(), Num::Real(0.0)),
        }
    }

    /// Applies a smooth unary function given its derivative, by the chain rule.
    fn lift(&self, f: &dyn Fn(&Num) -> Num, df: &dyn Fn(&Num) -> Num) -> Num {
        match self {
            Num::Real(_) => f(self),
            Num::Dual(n) => make(
                n.tag,
                n.primal.lift(f, df),
                df(&n.primal) * n.tangent.clone(),
            ),
        }
    }

    pub fn recip(&self) -> Num {
        self.lift(&|x| Num::Real(1.0 / x.as_real()), &|x| {
            let r = x.recip();
            -(r.clone() * r)
        })
    }

    pub fn exp(&self) -> Num {
        self.lift(&|x| Num::Real(x.as_real().exp()), &|x| x.exp())
    }

    pub fn ln(&self) -> Num {
        self.lift(&|x| Num::Real(x.as_real().ln()), &|x| x.recip())
    }

    pub fn sin(&self) -> Num {
        self.lift(&|x| Num::Real(x.as_real().sin()), &|x| x.cos())
    }

    pub fn cos(&self) -> Num {
        self.lift(&|x| Num::Real(x.as_real().cos()), &|x| -x.sin())
    }

    pub fn sqrt(&self) -> Num {
        self.lift(&|x| Num::Real(x.as_real().sqrt()), &|x| {
            x.sqrt().recip().scale(0.5)
        })
    }

    pub fn powi(&self, n: i32) -> Num {
        match n {
            0 => Num::Real(1.0),
            _ => self.lift(&move |x| Num::Real(x.as_real().powi(n)), &move |x| {
                x.powi(n - 1).scale(n as f64)
            }),
        }
    }

    // Only reached from `lift` on the innermost layer.
    fn as_real(&self) -> f64 {
        match self {
            Num::Real(x) => *x,
            Num::Dual(_) => unreachable!("lift recursion bottoms out at reals"),
        }
    }
}

fn make(tag: Tag, primal: Num, tangent: Num) -> Num {
    if tangent.is_zero() {
        primal
    } else {
        Num::Dual(Rc::new(Node {
            tag,
            primal,
            tangent,
        }))
    }
}

fn joint_tag(a: &Num, b: &Num) -> Tag {
    match (a.top_tag(), b.top_tag()) {
        (Some(x), Some(y)) => x.max(y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => unreachable!("real fast path handled by caller"),
    }
}

/// Removes every perturbation; the value passes through unchanged.
pub fn stop_gradient(x: &Num) -> Num {
    Num::Real(x.value())
}

impl Scalar for Num {
    fn constant(x: f64) -> Self {
        Num::Real(x)
    }

    fn scale(&self, c: f64) -> Self {
        match self {
            Num::Real(x) => Num::Real(x * c),
            _ if c == 0.0 => Num::Real(0.0),
            Num::Dual(n) => make(n.tag, n.primal.scale(c), n.tangent.scale(c)),
        }
    }

    fn real(&self) -> f64 {
        self.value()
    }
}

impl From<f64> for Num {
    fn from(x: f64) -> Self {
        Num::Real(x)
    }
}

impl fmt::Debug for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Real(x) => write!(f, "{x:?}"),
            Num::Dual(n) => write!(f, "({:?} + ε{}·{:?})", n.primal, n.tag.0, n.tangent),
        }
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.value(), f)
    }
}

impl Add for Num {
    type Output = Num;

    fn add(self, rhs: Num) -> Num {
        match (&self, &rhs) {
            (Num::Real(a), Num::Real(b)) => Num::Real(a + b),
            _ => {
                let tag = joint_tag(&self, &rhs);
                let (ap, at) = self.split(tag);
                let (bp, bt) = rhs.split(tag);
                make(tag, ap + bp, at + bt)
            }
        }
    }
}

impl Neg for Num {
    type Output = Num;

    fn neg(self) -> Num {
        self.scale(-1.0)
    }
}

impl Sub for Num {
    type Output = Num;

    fn sub(self, rhs: Num) -> Num {
        match (&self, &rhs) {
            (Num::Real(a), Num::Real(b)) => Num::Real(a - b),
            _ => self + (-rhs),
        }
    }
}

impl Mul for Num {
    type Output = Num;

    fn mul(self, rhs: Num) -> Num {
        match (&self, &rhs) {
            (Num::Real(a), _) => rhs.scale(*a),
            (_, Num::Real(b)) => self.scale(*b),
            _ => {
                let tag = joint_tag(&self, &rhs);
                let (ap, at) = self.split(tag);
                let (bp, bt) = rhs.split(tag);
                let tangent = ap.clone() * bt + at * bp.clone();
                make(tag, ap * bp, tangent)
            }
        }
    }
}

/// Derivative of `f` at a (possibly already perturbed) point, as a dual
/// number in the enclosing scopes' tags.
pub fn derivative_num<F>(f: F, at: &Num) -> Num
where
    F: FnOnce(Num) -> Num,
{
    let tag = Tag::fresh();
    f(Num::seed(at.clone(), tag)).tangent(tag)
}

/// `df/dx` at a real point.
pub fn derivative<F>(f: F, at: f64) -> Result<f64, DiffError>
where
    F: FnOnce(Num) -> Num,
{
    finite(derivative_num(f, &Num::Real(at)).value())
}

/// Partial derivatives of `f` with respect to every coordinate of `at`.
///
/// Coordinates may carry perturbations of enclosing scopes; the returned
/// gradient then carries them too, which is what lets an outer scope
/// differentiate through an inner gradient step.
pub fn gradient_num<F>(f: F, at: &[Num]) -> Vec<Num>
where
    F: Fn(&[Num]) -> Num,
{
    let mut point = at.to_vec();
    (0..at.len())
        .map(|c| {
            let tag = Tag::fresh();
            point[c] = Num::seed(at[c].clone(), tag);
            let d = f(&point).tangent(tag);
            point[c] = at[c].clone();
            d
        })
        .collect()
}

/// Gradient of `f` over one parameter block at a real point.
pub fn gradient_block<F>(f: F, at: &[f64]) -> Result<Vec<f64>, DiffError>
where
    F: Fn(&[Num]) -> Num,
{
    let at: Vec<Num> = at.iter().map(|&x| Num::Real(x)).collect();
    gradient_num(f, &at)
        .iter()
        .map(|d| finite(d.value()))
        .collect()
}

/// Gradient over an outer block of an expression that itself takes
/// gradients. `inner` receives the seeded outer block and is free to open
/// its own scopes (via [`gradient_num`] or [`derivative_num`]).
pub fn nested_gradient<F>(outer: &[f64], inner: F) -> Result<Vec<f64>, DiffError>
where
    F: Fn(&[Num]) -> Num,
{
    gradient_block(inner, outer)
}

fn finite(x: f64) -> Result<f64, DiffError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(DiffError::NonFinite(x))
    }
}
