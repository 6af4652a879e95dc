use super::{AdError, Arg, Kind, Node, Op, Scalar, Tape};
use crate::Real;

fn node_arg(arg: Arg<impl Copy>) -> Option<usize> {
    match arg {
        Arg::Node(i) => Some(i as usize),
        _ => None,
    }
}

/// Index window `[lo, hi]` that can carry derivative information from the
/// inputs to the output.
fn window<F: Real>(output: Scalar<'_, F>, inputs: &[Scalar<'_, F>]) -> Option<(usize, usize)> {
    let hi = output.index()?;
    let lo = inputs.iter().filter_map(|s| s.index()).min()?;
    (lo <= hi).then_some((lo, hi))
}

pub(super) fn numeric<'t, F: Real>(
    tape: &'t Tape<F>,
    output: Scalar<'t, F>,
    inputs: &[Scalar<'t, F>],
) -> Result<Vec<F>, AdError> {
    let Some((lo, hi)) = window(output, inputs) else {
        return Ok(vec![F::zero(); inputs.len()]);
    };
    let nodes = tape.nodes.borrow();
    let nodes = &nodes[..=hi];
    let mut adj = vec![F::zero(); hi + 1];
    adj[hi] = F::one();
    for i in (lo..=hi).rev() {
        let a = adj[i];
        if a == F::zero() {
            continue;
        }
        let node = &nodes[i];
        if let Arg::Node(j) = node.lhs {
            let j = j as usize;
            if j >= lo {
                adj[j] = adj[j] + a * node.d_lhs;
            }
        }
        if let Arg::Node(j) = node.rhs {
            let j = j as usize;
            if j >= lo {
                adj[j] = adj[j] + a * node.d_rhs;
            }
        }
    }
    let grads: Vec<F> = inputs.iter().map(|s| s.index().map_or(F::zero(), |i| if i >= lo { adj[i] } else { F::zero() })).collect();
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(AdError::NonFinite { op: "gradient" });
    }
    Ok(grads)
}

/// Partial derivative of node `index` with respect to its `side` operand,
/// as a recordable expression. `a` and `b` are the node's operands.
fn partial<'t, F: Real>(
    this: Scalar<'t, F>,
    node: &Node<F>,
    a: Scalar<'t, F>,
    b: Scalar<'t, F>,
    lhs_side: bool,
) -> Result<Scalar<'t, F>, AdError> {
    let one = Scalar::one();
    let Kind::Op(op) = node.kind else {
        return Ok(Scalar::zero());
    };
    let d = match (op, lhs_side) {
        (Op::Add, _) => one,
        (Op::Sub, true) => one,
        (Op::Sub, false) => Scalar::constant(-F::one()),
        (Op::Mul, true) => b,
        (Op::Mul, false) => a,
        (Op::Div, true) => Scalar::binary(Op::Div, one, b)?,
        (Op::Div, false) => Scalar::unary(Op::Neg, Scalar::binary(Op::Div, this, b)?)?,
        (Op::Pow, true) => {
            if b.value() == F::zero() {
                Scalar::zero()
            } else {
                let reduced = Scalar::binary(Op::Sub, b, one)?;
                Scalar::binary(Op::Mul, b, Scalar::binary(Op::Pow, a, reduced)?)?
            }
        }
        (Op::Pow, false) => Scalar::binary(Op::Mul, this, Scalar::unary(Op::Ln, a)?)?,
        (Op::Exp, _) => this,
        (Op::Ln, _) => Scalar::binary(Op::Div, one, a)?,
        (Op::Tanh, _) => Scalar::binary(Op::Sub, one, Scalar::binary(Op::Mul, this, this)?)?,
        (Op::Sin, _) => {
            // cos(a) = sin(π/2 − a), exact at a = 0 when nested again.
            let shifted = Scalar::binary(Op::Sub, Scalar::constant(F::FRAC_PI_2()), a)?;
            Scalar::unary(Op::Sin, shifted)?
        }
        // Piecewise-linear ops: the stored numeric partial is exact and
        // locally constant.
        (Op::Min | Op::Max | Op::Abs | Op::Neg, true) => Scalar::constant(node.d_lhs),
        (Op::Min | Op::Max, false) => Scalar::constant(node.d_rhs),
        _ => Scalar::zero(),
    };
    Ok(d)
}

pub(super) fn recorded<'t, F: Real>(
    tape: &'t Tape<F>,
    output: Scalar<'t, F>,
    inputs: &[Scalar<'t, F>],
) -> Result<Vec<Scalar<'t, F>>, AdError> {
    let Some((lo, hi)) = window(output, inputs) else {
        return Ok(vec![Scalar::zero(); inputs.len()]);
    };
    let nodes = tape.node_range(lo, hi);
    let n = nodes.len();
    let local = |arg: Arg<F>| node_arg(arg).filter(|&j| j >= lo).map(|j| j - lo);

    // Forward: nodes that depend on some input.
    let mut depends = vec![false; n];
    for s in inputs {
        if let Some(i) = s.index().filter(|&i| i >= lo) {
            depends[i - lo] = true;
        }
    }
    for k in 0..n {
        if !depends[k] {
            depends[k] = [nodes[k].lhs, nodes[k].rhs].into_iter().filter_map(local).any(|j| depends[j]);
        }
    }
    // Backward: of those, nodes the output depends on.
    let mut live = vec![false; n];
    live[n - 1] = depends[n - 1];
    for k in (0..n).rev() {
        if !live[k] {
            continue;
        }
        for j in [nodes[k].lhs, nodes[k].rhs].into_iter().filter_map(local) {
            live[j] = live[j] || depends[j];
        }
    }

    let mut adj: Vec<Option<Scalar<'t, F>>> = vec![None; n];
    adj[n - 1] = Some(Scalar::one());
    for k in (0..n).rev() {
        if !live[k] {
            continue;
        }
        let Some(g) = adj[k] else { continue };
        let node = nodes[k];
        let operand = |arg: Arg<F>| match arg {
            Arg::Node(j) if j as usize >= lo => Scalar::from_parts(tape, j, nodes[j as usize - lo].value),
            Arg::Node(j) => Scalar::from_node(tape, j),
            Arg::Const(c) => Scalar::constant(c),
            Arg::Absent => Scalar::zero(),
        };
        let this = Scalar::from_parts(tape, (lo + k) as u32, node.value);
        let (a, b) = (operand(node.lhs), operand(node.rhs));
        for (arg, lhs_side) in [(node.lhs, true), (node.rhs, false)] {
            let Some(j) = local(arg) else { continue };
            if !live[j] {
                continue;
            }
            let d = partial(this, &node, a, b, lhs_side)?;
            let contrib = if d.is_constant() && d.value() == F::one() { g } else { Scalar::binary(Op::Mul, g, d)? };
            adj[j] = Some(match adj[j] {
                None => contrib,
                Some(prev) => Scalar::binary(Op::Add, prev, contrib)?,
            });
        }
    }
    Ok(inputs
        .iter()
        .map(|s| s.index().filter(|&i| i >= lo).and_then(|i| adj[i - lo]).unwrap_or_else(Scalar::zero))
        .collect())
}
