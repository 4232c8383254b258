use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::MlpModel;
use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Weights of the fitting loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    /// Weight of the Eikonal term.
    pub lambda: f64,
    /// Weight of the optional nesting hinge `max(0, f_{c+1} - f_c)` on the
    /// Eikonal batch; 0 disables it.
    pub nesting_weight: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            nesting_weight: 0.0,
        }
    }
}

impl LossSpec {
    pub fn eikonal(lambda: f64) -> Self {
        Self {
            lambda,
            nesting_weight: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// Mean |f| over each channel's surface batch, averaged over channels.
    pub data: f64,
    /// Mean (|grad f| - 1)^2 over the Eikonal batch and channels.
    pub eikonal: f64,
    pub nesting: f64,
}

/// Evaluates the surface + Eikonal loss and, when `grads` is given,
/// accumulates its exact parameter gradient (including the path through
/// the input gradients) into it.
///
/// `surface[c]` is the batch whose points should lie on channel `c`'s zero
/// level set; the Eikonal batch is shared by all channels.
pub fn evaluate_loss(
    model: &MlpModel,
    spec: &LossSpec,
    surface: &[&[Point3]],
    eikonal: &[Point3],
    mut grads: Option<&mut [f64]>,
) -> Result<LossBreakdown> {
    let channels = model.channels();
    if surface.len() != channels {
        return Err(Error::InvalidArgument(format!(
            "{} surface batches for a {channels}-channel model",
            surface.len()
        )));
    }
    if surface.iter().any(|b| b.is_empty()) || eikonal.is_empty() {
        return Err(Error::Empty("loss batch"));
    }
    if !(spec.lambda >= 0.0 && spec.nesting_weight >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative loss weight: {spec:?}")));
    }
    let c_norm = 1.0 / channels as f64;

    // data term: all channels' batches go through one pass
    let stacked: Vec<Point3> = surface.iter().flat_map(|b| b.iter().copied()).collect();
    let tape = model.run(&stacked, false);
    let mut value_adj = Array2::zeros(tape.values.dim());
    let mut data = 0.0;
    let mut row = 0;
    for (c, batch) in surface.iter().enumerate() {
        let w = c_norm / batch.len() as f64;
        let mut sum = 0.0;
        for r in row..row + batch.len() {
            let v = tape.values[[r, c]];
            sum += v.abs();
            value_adj[[r, c]] = w * sign(v);
        }
        data += sum / batch.len() as f64;
        row += batch.len();
    }
    data *= c_norm;
    if let Some(g) = grads.as_deref_mut() {
        model.backward(&tape, &value_adj, None, g);
    }

    let tape = model.run(eikonal, true);
    let gradients = tape.gradients.as_ref().expect("tangents requested");
    let n = eikonal.len();
    let mut grad_adj = Array2::zeros(gradients.dim());
    let w = spec.lambda * c_norm / n as f64;
    let mut eik = 0.0;
    for c in 0..channels {
        let mut sum = 0.0;
        for b in 0..n {
            let g = [gradients[[b, c]], gradients[[n + b, c]], gradients[[2 * n + b, c]]];
            let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            let r = norm - 1.0;
            sum += r * r;
            if norm > 0.0 {
                for (j, gj) in g.iter().enumerate() {
                    grad_adj[[j * n + b, c]] = w * 2.0 * r * gj / norm;
                }
            }
        }
        eik += sum / n as f64;
    }
    eik *= c_norm;

    let mut value_adj = Array2::zeros(tape.values.dim());
    let mut nesting = 0.0;
    if spec.nesting_weight > 0.0 && channels > 1 {
        let pairs = (channels - 1) as f64;
        let w = spec.nesting_weight / (pairs * n as f64);
        for c in 0..channels - 1 {
            let mut sum = 0.0;
            for b in 0..n {
                let excess = tape.values[[b, c + 1]] - tape.values[[b, c]];
                if excess > 0.0 {
                    sum += excess;
                    value_adj[[b, c + 1]] += w;
                    value_adj[[b, c]] -= w;
                }
            }
            nesting += sum / n as f64;
        }
        nesting /= pairs;
    }
    if let Some(g) = grads {
        model.backward(&tape, &value_adj, Some(&grad_adj), g);
    }

    let total = data + spec.lambda * eik + spec.nesting_weight * nesting;
    if !total.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss (data {data}, eikonal {eik}, nesting {nesting})"
        )));
    }
    Ok(LossBreakdown {
        total,
        data,
        eikonal: eik,
        nesting,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Loss value and its gradient with respect to every model parameter, in
/// the model's flat parameter order.
pub fn grad_of_loss(
    model: &MlpModel,
    spec: &LossSpec,
    surface: &[&[Point3]],
    eikonal: &[Point3],
) -> Result<(LossBreakdown, Vec<f64>)> {
    let mut grads = vec![0.0; model.params().len()];
    let loss = evaluate_loss(model, spec, surface, eikonal, Some(&mut grads))?;
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of parameter {i}")));
    }
    Ok((loss, grads))
}
