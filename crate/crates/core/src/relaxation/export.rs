//! Plain-text algebraic listing of a node program.
//!
//! ```text
//! # <network name>, perspective on|off
//! minimize
//!   <coef> <var> + ... + <constant>
//! subject to
//!   e<k>: <coef> <var> + ... = <rhs>
//!   i<k>: <coef> <var> + ... [+ <coef> <var>^2 [/ <var>]] <= <rhs>
//! bounds
//!   <lower> <= <var> <= <upper>
//! binary
//!   <var> ...
//! end
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting; infinities are written
//! `inf`. Variable names are `z[pipe,i]`, `xp[arc]`, `y[arc]`, `pi[node]`,
//! `q[arc]`, `q[pipe,i]`, `pi[pipe,i,node]`, `gamma[arc]`, `gamma[pipe,i]`
//! and `d[pipe,i]`.

use std::fmt::Write;

use super::{MisocBinary, MisocModel, NodeProgram, Role};
use crate::convex::ConstraintAtom;

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn names(model: &MisocModel, np: &NodeProgram) -> Vec<String> {
    let net = model.network();
    let arc = |a: usize| net.arc(a).id.as_str();
    np.roles
        .iter()
        .map(|r| match *r {
            Role::Binary(j) => match model.binaries()[j] {
                MisocBinary::Diameter { arc: a, choice } => format!("z[{},{choice}]", arc(a)),
                MisocBinary::Direction { arc: a } => format!("xp[{}]", arc(a)),
                MisocBinary::State { arc: a } => format!("y[{}]", arc(a)),
            },
            Role::Potential { node } => format!("pi[{}]", net.node(node).id),
            Role::Flow { arc: a, choice: None } => format!("q[{}]", arc(a)),
            Role::Flow { arc: a, choice: Some(i) } => format!("q[{},{i}]", arc(a)),
            Role::ChoicePotential { arc: a, choice, node } => format!("pi[{},{choice},{}]", arc(a), net.node(node).id),
            Role::Gamma { arc: a, choice: None } => format!("gamma[{}]", arc(a)),
            Role::Gamma { arc: a, choice: Some(i) } => format!("gamma[{},{i}]", arc(a)),
            Role::Denominator { arc: a, choice } => format!("d[{},{choice}]", arc(a)),
        })
        .collect()
}

fn terms(out: &mut String, t: &[(usize, f64)], names: &[String]) {
    for (k, &(j, c)) in t.iter().enumerate() {
        if k > 0 {
            out.push_str(" + ");
        }
        let _ = write!(out, "{} {}", num(c), names[j]);
    }
}

/// Listing of `np`, a node program of `model`.
pub fn export_text(model: &MisocModel, np: &NodeProgram) -> String {
    let names = names(model, np);
    let p = &np.program;
    let mut out = String::new();
    let _ = writeln!(out, "# {}, perspective {}", model.network().name(), if model.perspective() { "on" } else { "off" });
    out.push_str("minimize\n  ");
    let cost: Vec<(usize, f64)> = p.cost.iter().copied().enumerate().filter(|t| t.1 != 0.0).collect();
    terms(&mut out, &cost, &names);
    if !cost.is_empty() {
        out.push_str(" + ");
    }
    let _ = writeln!(out, "{}", num(np.offset));
    out.push_str("subject to\n");
    for (k, r) in p.equalities.iter().enumerate() {
        let _ = write!(out, "  e{k}: ");
        terms(&mut out, &r.terms, &names);
        let _ = writeln!(out, " = {}", num(r.rhs));
    }
    for (k, r) in p.inequalities.iter().enumerate() {
        let _ = write!(out, "  i{k}: ");
        terms(&mut out, &r.terms, &names);
        for (m, a) in r.atoms.iter().enumerate() {
            if !r.terms.is_empty() || m > 0 {
                out.push_str(" + ");
            }
            let _ = match *a {
                ConstraintAtom::Square { var, coef } => write!(out, "{} {}^2", num(coef), names[var]),
                ConstraintAtom::QuadOverLinear { var, z, coef } => {
                    write!(out, "{} {}^2 / {}", num(coef), names[var], names[z])
                }
            };
        }
        let _ = writeln!(out, " <= {}", num(r.rhs));
    }
    out.push_str("bounds\n");
    for (j, name) in names.iter().enumerate() {
        let _ = writeln!(out, "  {} <= {name} <= {}", num(p.lower[j]), num(p.upper[j]));
    }
    out.push_str("binary\n");
    let bins: Vec<&str> =
        np.roles.iter().zip(&names).filter(|(r, _)| matches!(r, Role::Binary(_))).map(|(_, n)| n.as_str()).collect();
    if !bins.is_empty() {
        let _ = writeln!(out, "  {}", bins.join(" "));
    }
    out.push_str("end\n");
    out
}
