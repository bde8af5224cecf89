//! Least non-negative solutions of `x = c + A x` over `[0, inf]`, for
//! sub-stochastic non-negative `A`, in exact rational arithmetic.
//!
//! Rows are solved one strongly connected component at a time in reverse
//! topological order. A closed component that keeps all of its mass gets
//! value 0 if every constant in it is 0 and infinity otherwise; any row that
//! reaches an infinite row with positive weight is infinite.

use num_traits::{One, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::Error;
use crate::kernel::{Rational, XReal};

#[derive(Clone, Debug, Default)]
pub struct Row {
    pub constant: XReal,
    pub coeffs: Vec<(usize, Rational)>,
}

pub fn solve_lfp(rows: &[Row]) -> Result<Vec<XReal>, Error> {
    let n = rows.len();
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, 0);
    let ids: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (i, r) in rows.iter().enumerate() {
        for (j, a) in &r.coeffs {
            if !a.is_zero() {
                g.add_edge(ids[i], ids[*j], ());
            }
        }
    }
    let mut value: Vec<Option<XReal>> = vec![None; n];
    let mut comp_of = vec![usize::MAX; n];
    for (ci, comp) in tarjan_scc(&g).into_iter().enumerate() {
        let members: Vec<usize> = comp.iter().map(|v| v.index()).collect();
        for &m in &members {
            comp_of[m] = ci;
        }
        // constants with already-solved successors folded in
        let mut eff: Vec<XReal> = Vec::with_capacity(members.len());
        let mut closed = true;
        for &i in &members {
            let mut c = rows[i].constant.clone();
            let mut inside = Rational::zero();
            for (j, a) in &rows[i].coeffs {
                if a.is_zero() {
                    continue;
                }
                if comp_of[*j] == ci {
                    inside += a;
                } else {
                    closed = false;
                    let xj = value[*j].as_ref().expect("successor solved first");
                    c = c + xj.scale(a);
                }
            }
            if inside != Rational::one() {
                closed = false;
            }
            eff.push(c);
        }
        // members reach each other, so one infinite row makes all infinite
        if eff.iter().any(|c| c.is_infinite()) {
            for &m in &members {
                value[m] = Some(XReal::Infinity);
            }
            continue;
        }
        if closed {
            let v = if eff.iter().all(|c| c.is_zero()) {
                XReal::zero()
            } else {
                XReal::Infinity
            };
            for &m in &members {
                value[m] = Some(v.clone());
            }
            continue;
        }
        let finite: Vec<Rational> = eff.iter().map(|c| c.finite().unwrap().clone()).collect();
        let xs = solve_component(rows, &members, &comp_of, ci, finite)?;
        for (m, x) in members.iter().zip(xs) {
            value[*m] = Some(XReal::from_rational(x).map_err(|_| Error::SingularSystem)?);
        }
    }
    Ok(value.into_iter().map(|v| v.unwrap()).collect())
}

/// Solves `(I - A_SS) x = c` for one component by Gaussian elimination.
fn solve_component(
    rows: &[Row],
    members: &[usize],
    comp_of: &[usize],
    ci: usize,
    c: Vec<Rational>,
) -> Result<Vec<Rational>, Error> {
    let k = members.len();
    let local: std::collections::HashMap<usize, usize> = members.iter().enumerate().map(|(a, b)| (*b, a)).collect();
    if k == 1 {
        let i = members[0];
        let a: Rational = rows[i]
            .coeffs
            .iter()
            .filter(|(j, _)| *j == i)
            .map(|(_, a)| a.clone())
            .fold(Rational::zero(), |s, a| s + a);
        let d = Rational::one() - a;
        if d.is_zero() {
            return Err(Error::SingularSystem);
        }
        return Ok(vec![&c[0] / d]);
    }
    let mut m = vec![vec![Rational::zero(); k + 1]; k];
    for (li, &i) in members.iter().enumerate() {
        m[li][li] = Rational::one();
        for (j, a) in &rows[i].coeffs {
            if comp_of[*j] == ci {
                let lj = local[j];
                m[li][lj] -= a;
            }
        }
        m[li][k] = c[li].clone();
    }
    for col in 0..k {
        let piv = (col..k).find(|&r| !m[r][col].is_zero()).ok_or(Error::SingularSystem)?;
        m.swap(col, piv);
        let p = m[col][col].clone();
        for x in m[col][col..].iter_mut() {
            *x /= &p;
        }
        let pivot_row = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (x, y) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= &f * y;
            }
        }
    }
    Ok(m.into_iter().map(|r| r[k].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::rat;

    #[test]
    fn geometric_chain() {
        // x0 = 2 + 1/2 x0  ->  x0 = 4
        let rows = vec![Row {
            constant: XReal::int(2),
            coeffs: vec![(0, rat(1, 2))],
        }];
        assert_eq!(solve_lfp(&rows).unwrap(), vec![XReal::int(4)]);
    }

    #[test]
    fn two_cycle_with_exit() {
        // x0 = 1 + x1, x1 = 1 + 1/2 x0
        let rows = vec![
            Row {
                constant: XReal::one(),
                coeffs: vec![(1, rat(1, 1))],
            },
            Row {
                constant: XReal::one(),
                coeffs: vec![(0, rat(1, 2))],
            },
        ];
        assert_eq!(solve_lfp(&rows).unwrap(), vec![XReal::int(4), XReal::int(3)]);
    }

    #[test]
    fn closed_class_is_zero_or_infinite() {
        let rows = vec![
            Row {
                constant: XReal::zero(),
                coeffs: vec![(0, rat(1, 1))],
            },
            Row {
                constant: XReal::one(),
                coeffs: vec![(1, rat(1, 1))],
            },
            Row {
                constant: XReal::one(),
                coeffs: vec![(0, rat(1, 2)), (1, rat(1, 2))],
            },
        ];
        let v = solve_lfp(&rows).unwrap();
        assert_eq!(v, vec![XReal::zero(), XReal::Infinity, XReal::Infinity]);
    }
}
