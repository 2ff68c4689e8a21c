//! Per-node evaluation of the policy on one-hot masked inputs.
//!
//! The masked input `X(e_j)` differs from the zero field in a single entry, so
//! each layer only needs the columns (dense) or the receptive-field taps
//! (convolution, a banded Toeplitz product) touched by the active entries of
//! the previous layer. Everything is expressed as a change relative to the
//! activations of the zero input.

use crate::error::Result;
use crate::field::{check_same_grid, ActuatorMap, Field, NoiseIncrement};

use super::{pool_window, Layer, PolicyParams};

struct Baseline {
    // pre-activations of linear layers (empty for pooling)
    pre: Vec<Vec<f64>>,
    // activations; acts[0] is the zero input
    acts: Vec<Vec<f64>>,
}

fn baseline(params: &PolicyParams) -> Result<Baseline> {
    let tape = params.record(&vec![0.0; params.inputs()])?;
    let pre = params
        .layers()
        .iter()
        .enumerate()
        .map(|(i, layer)| match layer {
            Layer::MaxPool { .. } => Vec::new(),
            _ => {
                let mut out = vec![0.0; layer.output_len()];
                layer.linear(params.layer_params(i), &tape.activations[i], &mut out);
                out
            }
        })
        .collect();
    Ok(Baseline {
        pre,
        acts: tape.activations,
    })
}

/// Scatters `d * W[:, idx]` of one layer into `acc`, recording touched outputs.
fn scatter_column(layer: &Layer, w: &[f64], idx: usize, d: f64, acc: &mut [f64], touched: &mut [bool], dirty: &mut Vec<usize>) {
    let mut add = |o: usize, v: f64| {
        acc[o] += v;
        if !touched[o] {
            touched[o] = true;
            dirty.push(o);
        }
    };
    match *layer {
        Layer::Dense { inputs, outputs, .. } => {
            for o in 0..outputs {
                add(o, w[o * inputs + idx] * d);
            }
        }
        Layer::Conv {
            channels_in,
            channels_out,
            height,
            width,
            kernel,
            stride,
            pad_lo,
            ..
        } => {
            let [_, oh, ow] = layer.output_shape();
            let ic = idx / (height * width);
            let iy = (idx / width) % height;
            let ix = idx % width;
            for ky in 0..kernel {
                let Some(ty) = (iy + pad_lo).checked_sub(ky) else { continue };
                if ty % stride != 0 || ty / stride >= oh {
                    continue;
                }
                let oy = ty / stride;
                for kx in 0..kernel {
                    let Some(tx) = (ix + pad_lo).checked_sub(kx) else { continue };
                    if tx % stride != 0 || tx / stride >= ow {
                        continue;
                    }
                    let ox = tx / stride;
                    for oc in 0..channels_out {
                        let wi = ((oc * channels_in + ic) * kernel + ky) * kernel + kx;
                        add((oc * oh + oy) * ow + ox, w[wi] * d);
                    }
                }
            }
        }
        Layer::MaxPool { .. } => unreachable!(),
    }
}

/// Returns `phi(X(e_j))` for every node `j`, where `X(e_j)` keeps only the
/// `j`-th value of `x` and zeroes the rest.
pub fn sparse_forward_pass(params: &PolicyParams, x: &Field) -> Result<Vec<Vec<f64>>> {
    let xv = x.values();
    params.check_input(xv)?;
    let base = baseline(params)?;
    let layers = params.layers();
    let base_out = base.acts.last().expect("non-empty").clone();

    // scratch buffers sized to the largest layer output
    let widest = layers.iter().map(Layer::output_len).max().unwrap_or(0);
    let mut acc = vec![0.0; widest];
    let mut touched = vec![false; widest];
    let mut dirty: Vec<usize> = Vec::new();

    let mut result = Vec::with_capacity(xv.len());
    for (j, &v) in xv.iter().enumerate() {
        if v == 0.0 {
            result.push(base_out.clone());
            continue;
        }
        // (index, change of activation relative to the zero-input baseline)
        let mut changes: Vec<(usize, f64)> = vec![(j, v)];
        for (i, layer) in layers.iter().enumerate() {
            let mut next = Vec::new();
            match layer {
                Layer::MaxPool { height, width, .. } => {
                    let (oh, ow) = (height / 2, width / 2);
                    let mut input = base.acts[i].clone();
                    for &(k, d) in &changes {
                        input[k] += d;
                    }
                    for &(k, _) in &changes {
                        let (c, iy, ix) = (k / (height * width), (k / width) % height, k % width);
                        let (oy, ox) = (iy / 2, ix / 2);
                        if oy >= oh || ox >= ow {
                            continue;
                        }
                        let o = (c * oh + oy) * ow + ox;
                        if touched[o] {
                            continue;
                        }
                        touched[o] = true;
                        dirty.push(o);
                        let (m, _) = pool_window(&input, c, oy, ox, *height, *width);
                        let d = m - base.acts[i + 1][o];
                        if d != 0.0 {
                            next.push((o, d));
                        }
                    }
                }
                _ => {
                    let w = params.layer_params(i);
                    for &(k, d) in &changes {
                        scatter_column(layer, w, k, d, &mut acc, &mut touched, &mut dirty);
                    }
                    dirty.sort_unstable();
                    for &o in &dirty {
                        let mut a = base.pre[i][o] + acc[o];
                        if layer.relu() {
                            a = a.max(0.0);
                        }
                        let d = a - base.acts[i + 1][o];
                        if d != 0.0 {
                            next.push((o, d));
                        }
                        acc[o] = 0.0;
                    }
                }
            }
            for &o in &dirty {
                touched[o] = false;
            }
            dirty.clear();
            next.sort_unstable_by_key(|&(o, _)| o);
            changes = next;
        }
        let mut out = base_out.clone();
        for (o, d) in changes {
            out[o] += d;
        }
        result.push(out);
    }
    Ok(result)
}

/// Per-node actuator contraction `sum_l m_l(x_j) phi_l(X(e_j))`.
fn masked_control(params: &PolicyParams, map: &ActuatorMap, x: &Field) -> Result<Vec<f64>> {
    check_same_grid(x.grid(), map.grid())?;
    let per_node = sparse_forward_pass(params, x)?;
    Ok(per_node
        .iter()
        .enumerate()
        .map(|(j, u)| u.iter().enumerate().map(|(l, ul)| map.column(l)[j] * ul).sum())
        .collect())
}

/// Policy inner product through the masked-input sum
/// `sum_j phi(X(e_j))^T M(x_j) phi(X(e_j)) dx^d`.
///
/// Differs from `u^T M u` as soon as more than one node is active (the cross
/// terms between nodes are missing), so it is provided for evaluation only;
/// training uses the actuator expansion.
pub fn masked_policy_inner_product(params: &PolicyParams, map: &ActuatorMap, x: &Field) -> Result<f64> {
    let vol = x.grid().cell_volume();
    Ok(masked_control(params, map, x)?.iter().map(|c| c * c).sum::<f64>() * vol)
}

/// Noise inner product through the masked-input sum.
pub fn masked_noise_inner_product(
    params: &PolicyParams,
    map: &ActuatorMap,
    x: &Field,
    noise: &NoiseIncrement,
) -> Result<f64> {
    check_same_grid(x.grid(), noise.grid())?;
    Ok(noise.pair_values(&masked_control(params, map, x)?))
}
