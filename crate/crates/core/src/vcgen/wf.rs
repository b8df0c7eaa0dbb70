use crate::lang::{BinOp, Expr, Quant, QuantKind, UnOp};

/// One array access together with the obligation that keeps it in bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct WfObligation {
    /// The access `a[e]` as written.
    pub access: Expr,
    /// `ctx ==> 0 <= e < a.Length`, closed over enclosing quantifiers.
    pub formula: Expr,
}

enum Ctx {
    Guard(Expr),
    Bind(String, Expr, Expr),
}

fn close(ctx: &[Ctx], inner: Expr) -> Expr {
    ctx.iter().rev().fold(inner, |acc, c| match c {
        Ctx::Guard(g) => Expr::imp(g.clone(), acc),
        Ctx::Bind(v, lo, hi) => Expr::Quant(Quant {
            kind: QuantKind::Forall,
            var: v.clone(),
            lo: Box::new(lo.clone()),
            hi: Box::new(hi.clone()),
            body: Box::new(acc),
        }),
    })
}

/// Well-formedness obligations for every array access in `e`, in
/// left-to-right order. Short-circuit operators contribute their left side
/// as a guard for the right side.
pub fn obligations(e: &Expr) -> Vec<WfObligation> {
    let mut out = Vec::new();
    walk(e, &mut Vec::new(), &mut out);
    out
}

fn walk(e: &Expr, ctx: &mut Vec<Ctx>, out: &mut Vec<WfObligation>) {
    match e {
        Expr::Index(a, i) => {
            walk(a, ctx, out);
            walk(i, ctx, out);
            out.push(WfObligation {
                access: e.clone(),
                formula: close(ctx, Expr::in_bounds((**a).clone(), (**i).clone())),
            });
        }
        Expr::Binary(op @ (BinOp::Imp | BinOp::And | BinOp::Or), l, r) => {
            walk(l, ctx, out);
            let g = if *op == BinOp::Or { Expr::Unary(UnOp::Not, l.clone()) } else { (**l).clone() };
            ctx.push(Ctx::Guard(g));
            walk(r, ctx, out);
            ctx.pop();
        }
        Expr::Binary(_, l, r) => {
            walk(l, ctx, out);
            walk(r, ctx, out);
        }
        Expr::Unary(_, a) | Expr::Length(a) => walk(a, ctx, out),
        Expr::Chain(xs, _) => xs.iter().for_each(|x| walk(x, ctx, out)),
        Expr::Quant(q) => {
            walk(&q.lo, ctx, out);
            walk(&q.hi, ctx, out);
            ctx.push(Ctx::Bind(q.var.clone(), (*q.lo).clone(), (*q.hi).clone()));
            walk(&q.body, ctx, out);
            ctx.pop();
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::print_expr;

    fn parse(s: &str) -> Expr {
        let src = format!("method M(arr: array<int>, odd: int) requires {s} {{ }}");
        crate::lang::parse_program(&src).unwrap().methods[0].requires[0].formula.clone()
    }

    #[test]
    fn unguarded_access() {
        let o = obligations(&parse("arr[odd] % 2 != 0"));
        assert_eq!(o.len(), 1);
        assert_eq!(print_expr(&o[0].formula), "0 <= odd < arr.Length");
    }

    #[test]
    fn quantified_access() {
        let o = obligations(&parse("forall i :: 0 <= i < odd ==> arr[i] % 2 == 0"));
        assert_eq!(print_expr(&o[0].formula), "forall i :: 0 <= i < odd ==> 0 <= i < arr.Length");
    }

    #[test]
    fn guarded_access() {
        let o = obligations(&parse("0 <= odd < arr.Length ==> arr[odd] % 2 != 0"));
        assert_eq!(print_expr(&o[0].formula), "0 <= odd < arr.Length ==> 0 <= odd < arr.Length");
    }
}
