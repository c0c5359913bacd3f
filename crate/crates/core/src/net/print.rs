use super::{Semantics, TbNet, TimeExpr, Transition};
use crate::constraint::NumberStyle;
use crate::rational::{fmt_decimal, Rational};
use num_traits::{One, Signed, Zero};
use std::fmt::Write;

/// Canonical model text; `parse_net(&print_net(n)) == n`.
pub fn print_net(net: &TbNet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "net {}", net.name);
    if !net.places.is_empty() {
        let _ = writeln!(out, "place {}", net.places.join(", "));
    }
    for t in &net.transitions {
        let names = |ps: &[super::PlaceId]| ps.iter().map(|p| net.place_name(*p)).collect::<Vec<_>>().join(" ");
        let weak = if t.semantics == Semantics::Weak { " weak" } else { "" };
        let post = if t.post.is_empty() { String::new() } else { format!(" {}", names(&t.post)) };
        let _ = writeln!(out, "trans {}{} pre {} post{} tf {}", t.name, weak, names(&t.pre), post, print_tf(net, t));
    }
    let tokens: Vec<String> = net
        .initial_marking
        .iter()
        .enumerate()
        .filter(|(_, bag)| !bag.is_empty())
        .map(|(i, bag)| {
            let syms: Vec<String> = bag.iter().map(|s| format!("T{s}")).collect();
            format!("{}{{{}}}", net.places[i], syms.join(", "))
        })
        .collect();
    if !tokens.is_empty() {
        let _ = writeln!(out, "init {}", tokens.join(" "));
    }
    if !net.initial_constraint.is_true() {
        let _ = writeln!(out, "constraint {}", net.initial_constraint.display(NumberStyle::Fraction));
    }
    if let Some(l) = net.time_limit {
        let _ = writeln!(out, "timelimit {}", fmt_decimal(&l));
    }
    out
}

pub(crate) fn print_tf(net: &TbNet, t: &Transition) -> String {
    format!("[{}, {}]", print_expr(net, &t.tf.lb), print_expr(net, &t.tf.ub))
}

pub(crate) fn print_expr(net: &TbNet, e: &TimeExpr) -> String {
    match e {
        TimeExpr::PlaceRef { place, offset } => with_offset(net.place_name(*place).to_string(), offset),
        TimeExpr::Enab { offset } => with_offset("enab".to_string(), offset),
        TimeExpr::Max { args, offset } => {
            let args: Vec<String> = args.iter().map(|a| print_expr(net, a)).collect();
            with_offset(format!("max({})", args.join(", ")), offset)
        }
        TimeExpr::Affine { terms, constant } => {
            let mut s = String::new();
            for (p, c) in terms {
                let mag = c.abs();
                let body = if mag.is_one() {
                    net.place_name(*p).to_string()
                } else {
                    format!("{} * {}", fmt_decimal(&mag), net.place_name(*p))
                };
                match (s.is_empty(), c.is_negative()) {
                    (true, false) => s.push_str(&body),
                    (true, true) => s = format!("-{body}"),
                    (false, false) => s = format!("{s} + {body}"),
                    (false, true) => s = format!("{s} - {body}"),
                }
            }
            if s.is_empty() {
                fmt_decimal(constant)
            } else {
                with_offset(s, constant)
            }
        }
    }
}

fn with_offset(head: String, offset: &Rational) -> String {
    if offset.is_zero() {
        head
    } else if offset.is_negative() {
        format!("{head} - {}", fmt_decimal(&-offset))
    } else {
        format!("{head} + {}", fmt_decimal(offset))
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_net;
    use super::*;

    #[test]
    fn round_trip() {
        let text = "net demo\n\
                    place a, b, c\n\
                    trans t pre a b post c tf [max(a + 0.1, b - 1/3), -2 * a + 3 * b - 1]\n\
                    trans u weak pre c post tf [7, enab + 100]\n\
                    init a{T0} b{T0, T1}\n\
                    constraint 0 <= T0 && T0 < T1 && T1 <= 2.5\n\
                    timelimit 3\n";
        let net = parse_net(text).unwrap();
        let printed = print_net(&net);
        assert_eq!(parse_net(&printed).unwrap(), net, "{printed}");
    }
}
