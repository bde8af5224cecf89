//! Kleene iterates `F^j(0)` of a loop's characteristic functional, computed
//! by iterating `F` itself (not by unrolling).

use std::cell::RefCell;
use std::collections::HashMap;

use super::{ErtConfig, LoopCtx, Outcome};
use crate::error::Error;
use crate::kernel::{State, XReal};
use crate::lang::{Program, RtExpr};

struct Iter<'a> {
    ctx: &'a LoopCtx,
    f: &'a RtExpr,
    cfg: &'a ErtConfig,
    memo: RefCell<Vec<HashMap<State, Outcome>>>,
}

impl Iter<'_> {
    fn at(&self, j: usize, s: &State) -> Result<Outcome, Error> {
        if j == 0 {
            return Ok(Outcome::zero());
        }
        if let Some(o) = self.memo.borrow().get(j).and_then(|m| m.get(s)) {
            return Ok(o.clone());
        }
        let mut prev = |t: &State| self.at(j - 1, t);
        let o = stacker::maybe_grow(128 * 1024, 8 * 1024 * 1024, || self.ctx.apply(self.f, &mut prev, s, self.cfg))?;
        let mut memo = self.memo.borrow_mut();
        if memo.len() <= j {
            memo.resize_with(j + 1, HashMap::new);
        }
        memo[j].insert(s.clone(), o.clone());
        Ok(o)
    }
}

/// `[F^1(0)(σ), ..., F^n(0)(σ)]`.
pub fn kleene_iterates(w: &Program, f: &RtExpr, n: usize, s: &State, cfg: &ErtConfig) -> Result<Vec<XReal>, Error> {
    let ctx = LoopCtx::new(w)?;
    let it = Iter {
        ctx: &ctx,
        f,
        cfg,
        memo: RefCell::new(Vec::new()),
    };
    (1..=n).map(|j| it.at(j, s).map(|o| o.value)).collect()
}

/// Iterates until one exceeds `threshold` or `n_max` are computed.
pub fn kleene_until(
    w: &Program,
    f: &RtExpr,
    s: &State,
    threshold: &XReal,
    n_max: usize,
    cfg: &ErtConfig,
) -> Result<Vec<XReal>, Error> {
    let ctx = LoopCtx::new(w)?;
    let it = Iter {
        ctx: &ctx,
        f,
        cfg,
        memo: RefCell::new(Vec::new()),
    };
    let mut out = Vec::new();
    for j in 1..=n_max {
        let v = it.at(j, s)?.value;
        let done = v > *threshold;
        out.push(v);
        if done {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    #[test]
    fn geometric_iterates() {
        let w = parse_program("while (c = 1) { c :~ 1/2*<0> + 1/2*<1> }").unwrap();
        let s = State::new().with_int("c", 1);
        let it = kleene_iterates(&w, &RtExpr::int(0), 4, &s, &ErtConfig::default()).unwrap();
        assert_eq!(it, vec![XReal::int(2), XReal::ratio(7, 2), XReal::ratio(17, 4), XReal::ratio(37, 8)]);
    }
}
