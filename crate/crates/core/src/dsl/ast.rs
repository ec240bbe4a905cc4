//! Typed expression trees and their evaluation.
//!
//! The parser lowers source text into two mutually recursive trees, one for
//! integer-valued and one for boolean-valued expressions. Booleans used in an
//! arithmetic position are coerced to 0/1 through [`IntExpr::FromBool`].

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    /// Euclidean quotient.
    Div,
    /// Euclidean remainder, always in `[0, |m|)`.
    Mod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn holds(self, l: i64, r: i64) -> bool {
        match self {
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Gt => l > r,
            CmpOp::Ge => l >= r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntExpr {
    Lit(i64),
    /// Index into `(a, b, c)`.
    Var(usize),
    Neg(Box<IntExpr>),
    Arith(ArithOp, Box<IntExpr>, Box<IntExpr>),
    Abs(Box<IntExpr>),
    LastDigit(Box<IntExpr>),
    DistinctCount(Vec<IntExpr>),
    FromBool(Box<BoolExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Lit(bool),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
    /// Chained comparison `x0 op1 x1 op2 x2 ...`, true when every link holds.
    Compare(IntExpr, Vec<(CmpOp, IntExpr)>),
    In(IntExpr, Vec<i64>),
    IsPrime(IntExpr),
    IsCube(IntExpr),
}

pub fn euclid_mod(n: i64, m: i64) -> Result<i64, EvalError> {
    if m == 0 {
        return Err(EvalError::ZeroDivisor);
    }
    n.checked_rem_euclid(m).ok_or(EvalError::Overflow)
}

pub fn euclid_div(n: i64, m: i64) -> Result<i64, EvalError> {
    if m == 0 {
        return Err(EvalError::ZeroDivisor);
    }
    n.checked_div_euclid(m).ok_or(EvalError::Overflow)
}

pub fn is_prime(n: i64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2i64;
    while d <= n / d {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub fn is_cube(n: i64) -> bool {
    let m = n.unsigned_abs();
    let root = (m as f64).cbrt().round() as u64;
    (root.saturating_sub(1)..=root + 1).any(|k| k.checked_pow(3) == Some(m))
}

impl IntExpr {
    pub fn eval(&self, x: &[i64; 3]) -> Result<i64, EvalError> {
        Ok(match self {
            IntExpr::Lit(v) => *v,
            IntExpr::Var(i) => x[*i],
            IntExpr::Neg(e) => e.eval(x)?.checked_neg().ok_or(EvalError::Overflow)?,
            IntExpr::Arith(op, l, r) => {
                let l = l.eval(x)?;
                let r = r.eval(x)?;
                match op {
                    ArithOp::Add => l.checked_add(r).ok_or(EvalError::Overflow)?,
                    ArithOp::Sub => l.checked_sub(r).ok_or(EvalError::Overflow)?,
                    ArithOp::Mul => l.checked_mul(r).ok_or(EvalError::Overflow)?,
                    ArithOp::Div => euclid_div(l, r)?,
                    ArithOp::Mod => euclid_mod(l, r)?,
                }
            }
            IntExpr::Abs(e) => e.eval(x)?.checked_abs().ok_or(EvalError::Overflow)?,
            IntExpr::LastDigit(e) => (e.eval(x)?.unsigned_abs() % 10) as i64,
            IntExpr::DistinctCount(items) => {
                let mut seen: Vec<i64> = Vec::with_capacity(items.len());
                for item in items {
                    let v = item.eval(x)?;
                    if !seen.contains(&v) {
                        seen.push(v);
                    }
                }
                seen.len() as i64
            }
            IntExpr::FromBool(b) => b.eval(x)? as i64,
        })
    }

    pub(crate) fn may_fault(&self) -> bool {
        match self {
            IntExpr::Lit(_) | IntExpr::Var(_) => false,
            IntExpr::Neg(e) | IntExpr::Abs(e) | IntExpr::LastDigit(e) => e.may_fault(),
            IntExpr::Arith(op, l, r) => {
                let guarded_divisor = matches!(**r, IntExpr::Lit(v) if v != 0);
                (matches!(op, ArithOp::Div | ArithOp::Mod) && !guarded_divisor)
                    || l.may_fault()
                    || r.may_fault()
            }
            IntExpr::DistinctCount(items) => items.iter().any(IntExpr::may_fault),
            IntExpr::FromBool(b) => b.may_fault(),
        }
    }
}

impl BoolExpr {
    pub fn eval(&self, x: &[i64; 3]) -> Result<bool, EvalError> {
        Ok(match self {
            BoolExpr::Lit(v) => *v,
            BoolExpr::Not(e) => !e.eval(x)?,
            BoolExpr::And(items) => {
                for item in items {
                    if !item.eval(x)? {
                        return Ok(false);
                    }
                }
                true
            }
            BoolExpr::Or(items) => {
                for item in items {
                    if item.eval(x)? {
                        return Ok(true);
                    }
                }
                false
            }
            BoolExpr::Compare(first, rest) => {
                let mut left = first.eval(x)?;
                for (op, rhs) in rest {
                    let right = rhs.eval(x)?;
                    if !op.holds(left, right) {
                        return Ok(false);
                    }
                    left = right;
                }
                true
            }
            BoolExpr::In(e, set) => set.contains(&e.eval(x)?),
            BoolExpr::IsPrime(e) => is_prime(e.eval(x)?),
            BoolExpr::IsCube(e) => is_cube(e.eval(x)?),
        })
    }

    pub(crate) fn may_fault(&self) -> bool {
        match self {
            BoolExpr::Lit(_) => false,
            BoolExpr::Not(e) => e.may_fault(),
            BoolExpr::And(items) | BoolExpr::Or(items) => items.iter().any(BoolExpr::may_fault),
            BoolExpr::Compare(first, rest) => {
                first.may_fault() || rest.iter().any(|(_, e)| e.may_fault())
            }
            BoolExpr::In(e, _) | BoolExpr::IsPrime(e) | BoolExpr::IsCube(e) => e.may_fault(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclid_mod_is_non_negative() {
        assert_eq!(euclid_mod(-9, 2), Ok(1));
        assert_eq!(euclid_mod(-71, 2), Ok(1));
        assert_eq!(euclid_mod(-36, 5), Ok(4));
        assert_eq!(euclid_mod(7, -3), Ok(1));
        assert_eq!(euclid_mod(3, 0), Err(EvalError::ZeroDivisor));
    }

    #[test]
    fn primes_and_cubes_at_the_edges() {
        let primes: Vec<i64> = (-5..=13).filter(|&n| is_prime(n)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13]);
        let cubes: Vec<i64> = (-99..=100).filter(|&n| is_cube(n)).collect();
        assert_eq!(cubes, vec![-64, -27, -8, -1, 0, 1, 8, 27, 64]);
        assert!(!is_cube(i64::MIN + 1));
    }
}
