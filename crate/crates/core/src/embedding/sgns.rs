//! The skip-gram negative-sampling objective for a single training event.

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradient {
    /// `-log σ(u_o·v_c) - Σ log σ(-u_n·v_c)`
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-log σ(x)`, stable for large |x|.
pub(crate) fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss and gradients of the SGNS objective (as a loss to minimize) with
/// respect to the center input vector, the context output vector and each
/// negative output vector.
pub fn sgns_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradient {
    let d = center.len();
    assert_eq!(context.len(), d, "context dimension mismatch");

    let pos = dot(context, center);
    let mut loss = neg_log_sigmoid(pos);
    // d/ds of -log σ(s) is σ(s) - 1
    let g_pos = sigmoid(pos) - 1.0;
    let mut center_grad: Vec<f64> = context.iter().map(|u| g_pos * u).collect();
    let context_grad = center.iter().map(|v| g_pos * v).collect();

    let mut negative_grads = Vec::with_capacity(negatives.len());
    for neg in negatives {
        assert_eq!(neg.len(), d, "negative dimension mismatch");
        let s = dot(neg, center);
        loss += neg_log_sigmoid(-s);
        // d/ds of -log σ(-s) is σ(s)
        let g = sigmoid(s);
        center_grad.iter_mut().zip(*neg).for_each(|(c, u)| *c += g * u);
        negative_grads.push(center.iter().map(|v| g * v).collect());
    }

    SgnsGradient {
        loss,
        center: center_grad,
        context: context_grad,
        negatives: negative_grads,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_vectors_give_two_log_two() {
        let z = vec![0.0; 4];
        let g = sgns_gradient(&z, &z, &[&z]);
        assert!((g.loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((g.loss - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn zero_context_kills_positive_center_term() {
        let c = vec![0.3, -0.2, 0.5];
        let g = sgns_gradient(&c, &[0.0; 3], &[]);
        assert!(g.center.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stable_log_sigmoid() {
        assert!((neg_log_sigmoid(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(neg_log_sigmoid(800.0) >= 0.0);
        assert!((neg_log_sigmoid(-800.0) - 800.0).abs() < 1e-9);
    }
}
