//! Central-difference verification of the reverse pass.
//!
//! Meant to run under [`Precision::F64`]; in F32 mode the difference quotient
//! itself drowns in rounding noise.

use super::graph::{Graph, GraphError, NodeId};
use super::tensor::{Precision, Tensor};
use rand::Rng;

/// A scalar loss built from leaf nodes bound to `params`, one per tensor.
pub trait LossFn {
    fn build(&self, graph: &mut Graph, params: &[NodeId]) -> Result<NodeId, GraphError>;
}

impl<F> LossFn for F
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId, GraphError>,
{
    fn build(&self, graph: &mut Graph, params: &[NodeId]) -> Result<NodeId, GraphError> {
        self(graph, params)
    }
}

fn eval(loss: &impl LossFn, params: &[Tensor]) -> Result<f64, GraphError> {
    let mut graph = Graph::new(Precision::F64);
    let ids: Vec<NodeId> = params.iter().map(|t| graph.leaf(t.clone())).collect();
    let out = loss.build(&mut graph, &ids)?;
    Ok(graph.value(out).scalar_value())
}

/// Compare analytic gradients against `(f(x+h) - f(x-h)) / 2h` at the given
/// `(tensor index, element index)` coordinates. Returns the max relative
/// error; the denominator is floored at 1e-5 so that coordinates whose true
/// gradient vanishes are judged by (tiny) absolute error instead.
pub fn grad_check(
    loss: &impl LossFn,
    params: &[Tensor],
    h: f64,
    coords: &[(usize, usize)],
) -> Result<f64, GraphError> {
    let mut graph = Graph::new(Precision::F64);
    let ids: Vec<NodeId> = params.iter().map(|t| graph.leaf(t.clone())).collect();
    let out = loss.build(&mut graph, &ids)?;
    let grads = graph.backward(out)?;

    let mut max_rel = 0.0f64;
    for &(ti, ei) in coords {
        let analytic = grads
            .wrt(ids[ti])
            .map(|g| g.data()[ei])
            .unwrap_or(0.0);

        let mut plus = params.to_vec();
        plus[ti].data_mut()[ei] += h;
        let mut minus = params.to_vec();
        minus[ti].data_mut()[ei] -= h;
        let fd = (eval(loss, &plus)? - eval(loss, &minus)?) / (2.0 * h);

        let denom = analytic.abs().max(fd.abs()).max(1e-5);
        max_rel = max_rel.max((analytic - fd).abs() / denom);
    }
    Ok(max_rel)
}

/// Uniformly sample `n` coordinates across the parameter tensors.
pub fn sample_coords(
    params: &[Tensor],
    n: usize,
    rng: &mut impl Rng,
) -> Vec<(usize, usize)> {
    let sizes: Vec<usize> = params.iter().map(|t| t.numel()).collect();
    let total: usize = sizes.iter().sum();
    let mut coords = Vec::with_capacity(n);
    for _ in 0..n {
        let mut flat = rng.gen_range(0..total);
        for (ti, &sz) in sizes.iter().enumerate() {
            if flat < sz {
                coords.push((ti, flat));
                break;
            }
            flat -= sz;
        }
    }
    coords
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn square_function_checks_tightly() {
        let loss = |g: &mut Graph, p: &[NodeId]| g.mul(p[0], p[0]);
        let params = vec![Tensor::scalar(3.0)];
        let err = grad_check(&loss, &params, 1e-5, &[(0, 0)]).unwrap();
        assert!(err < 1e-8, "rel err {err}");
    }

    #[test]
    fn composite_with_every_op_family() {
        // gelu(layer_norm(x W + b)) -> masked softmax -> cross entropy,
        // exercising the fused backward rules together.
        let loss = |g: &mut Graph, p: &[NodeId]| {
            let x = p[0];
            let w = p[1];
            let b = p[2];
            let gain = p[3];
            let bias = p[4];
            let xw = g.linear(x, w, b)?;
            let ln = g.layer_norm(xw, gain, bias, 1e-12)?;
            let act = g.gelu(ln);
            let mask = Tensor::new(
                vec![2, 4],
                vec![0.0, 0.0, 0.0, super::super::tensor::NEG_MASK, 0.0, 0.0, 0.0, 0.0],
            )
            .unwrap();
            let sm = g.masked_softmax(act, &mask)?;
            let e = g.exp(sm);
            let tiled = g.tile_row(e, 0, 2);
            let cat = g.concat_cols(e, tiled);
            let sl = g.slice_cols(cat, 1, 7);
            g.cross_entropy_rows(sl, &[(0, 2), (1, 0)])
        };
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut mk = |shape: Vec<usize>| {
            let n = shape.iter().product();
            let data = (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect();
            Tensor::new(shape, data).unwrap()
        };
        let params = vec![
            mk(vec![2, 3]),
            mk(vec![3, 4]),
            mk(vec![1, 4]),
            mk(vec![1, 4]),
            mk(vec![1, 4]),
        ];
        let coords: Vec<(usize, usize)> = (0..params.len())
            .flat_map(|ti| (0..params[ti].numel()).map(move |ei| (ti, ei)))
            .collect();
        let err = grad_check(&loss, &params, 1e-5, &coords).unwrap();
        assert!(err < 1e-6, "rel err {err}");
    }

    #[test]
    fn sample_coords_in_bounds() {
        let params = vec![Tensor::zeros(vec![2, 3]), Tensor::zeros(vec![4, 1])];
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for (ti, ei) in sample_coords(&params, 50, &mut rng) {
            assert!(ti < 2);
            assert!(ei < params[ti].numel());
        }
    }
}
