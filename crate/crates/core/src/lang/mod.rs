//! The probabilistic guarded-command language: syntax, parsing, printing and
//! evaluation of expressions.

pub mod ast;
pub mod eval;
pub mod parser;
pub mod pretty;
pub mod rt;

pub use ast::{Annotation, BinOp, Direction, DistExpr, Expr, Program, RtExpr, Target};
pub use eval::{eval_dist, eval_expr, guard_probs};
pub use parser::{parse_dist, parse_expr, parse_program, parse_rt, SyntaxError};
pub use rt::{eval_rt, RtEnv};
