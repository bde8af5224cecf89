//! Direct step-counting interpreter for deterministic programs.
//!
//! Ticks follow the run-time model: one per `skip`, assignment and guard
//! evaluation; `empty`, `halt`, sequencing and `[]` are free.

use serde::Serialize;

use crate::error::Error;
use crate::kernel::{State, Value};
use crate::lang::eval::{assign_array, eval_dist, resolve_target};
use crate::lang::{DistExpr, Program};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DetRun {
    pub steps: u64,
    pub final_state: State,
    /// Run ended at `halt` (or a bound of `while^{<k}` ran out).
    pub halted: bool,
}

enum Flow {
    Normal(State),
    Halted(State),
}

struct Counter {
    steps: u64,
    fuel: u64,
}

impl Counter {
    fn tick(&mut self) -> Result<(), Error> {
        self.steps += 1;
        if self.steps > self.fuel {
            Err(Error::FuelExhausted(self.fuel))
        } else {
            Ok(())
        }
    }
}

fn point(d: &DistExpr, s: &State) -> Result<Value, Error> {
    let mut sup = eval_dist(d, s)?;
    if sup.len() != 1 {
        return Err(Error::NotDeterministic(format!(
            "distribution with {} support points",
            sup.len()
        )));
    }
    Ok(sup.pop().unwrap().0)
}

fn guard(d: &DistExpr, s: &State) -> Result<bool, Error> {
    Ok(point(d, s)?.as_bool()?)
}

fn run(p: &Program, s: State, c: &mut Counter) -> Result<Flow, Error> {
    Ok(match p {
        Program::Empty => Flow::Normal(s),
        Program::Skip => {
            c.tick()?;
            Flow::Normal(s)
        }
        Program::Halt => Flow::Halted(s),
        Program::Assign(t, d) => {
            c.tick()?;
            let slot = resolve_target(t, &s)?;
            let v = point(d, &s)?;
            Flow::Normal(s.update(&slot, v)?)
        }
        Program::AssignArray(a, es) => {
            c.tick()?;
            Flow::Normal(assign_array(a, es, &s)?)
        }
        Program::Seq(a, b) => match run(a, s, c)? {
            Flow::Normal(s) => run(b, s, c)?,
            h => h,
        },
        Program::Choice(..) => return Err(Error::NotDeterministic("nondeterministic choice".into())),
        Program::If(g, a, b) => {
            c.tick()?;
            if guard(g, &s)? {
                run(a, s, c)?
            } else {
                run(b, s, c)?
            }
        }
        Program::While(g, body, _) => {
            let mut s = s;
            loop {
                c.tick()?;
                if !guard(g, &s)? {
                    break Flow::Normal(s);
                }
                match run(body, s, c)? {
                    Flow::Normal(t) => s = t,
                    h => break h,
                }
            }
        }
        Program::Bounded(k, g, body) => {
            let mut s = s;
            let mut left = *k;
            loop {
                if left == 0 {
                    break Flow::Halted(s);
                }
                left -= 1;
                c.tick()?;
                if !guard(g, &s)? {
                    break Flow::Normal(s);
                }
                match run(body, s, c)? {
                    Flow::Normal(t) => s = t,
                    h => break h,
                }
            }
        }
    })
}

/// Runs a deterministic program, counting ticks, with at most `fuel` ticks.
pub fn det_step_count(p: &Program, s: &State, fuel: u64) -> Result<DetRun, Error> {
    if p.has_choice() {
        return Err(Error::NotDeterministic("nondeterministic choice".into()));
    }
    let mut c = Counter { steps: 0, fuel };
    let flow = stacker::maybe_grow(128 * 1024, 8 * 1024 * 1024, || run(p, s.clone(), &mut c))?;
    let (final_state, halted) = match flow {
        Flow::Normal(s) => (s, false),
        Flow::Halted(s) => (s, true),
    };
    Ok(DetRun {
        steps: c.steps,
        final_state,
        halted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    #[test]
    fn countdown() {
        let p = parse_program("x := 2; while (x > 0) { x := x - 1 }").unwrap();
        let r = det_step_count(&p, &State::new().with_int("x", 0), 1000).unwrap();
        // x := 2, then guards at x = 2, 1, 0 and two body assignments
        assert_eq!(r.steps, 6);
        assert_eq!(r.final_state, State::new().with_int("x", 0));
    }

    #[test]
    fn rejects_random_assignment() {
        let p = parse_program("x :~ 1/2*<0> + 1/2*<1>").unwrap();
        assert!(matches!(
            det_step_count(&p, &State::new(), 10),
            Err(Error::NotDeterministic(_))
        ));
    }

    #[test]
    fn fuel_runs_out() {
        let p = parse_program("while (true) { skip }").unwrap();
        assert!(matches!(det_step_count(&p, &State::new(), 50), Err(Error::FuelExhausted(50))));
    }

    #[test]
    fn halt_stops_counting() {
        let p = parse_program("skip; halt; skip").unwrap();
        let r = det_step_count(&p, &State::new(), 10).unwrap();
        assert_eq!((r.steps, r.halted), (1, true));
    }
}
