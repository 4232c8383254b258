//! Batched evaluation with optional input-gradient propagation, and the
//! reverse pass through both.
//!
//! Input gradients are carried forward as three tangent matrices, one per
//! coordinate axis, stacked row-wise: row `j * B + b` holds the derivative
//! of point `b`'s layer values along axis `j`. Because the tangents are
//! themselves an explicit function of the parameters, the reverse pass can
//! differentiate any loss of the values and the input gradients.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Axis};

use super::{LayerShape, MlpModel, INPUT_DIM};
use crate::geometry::Point3;

/// Values and spatial gradients for a batch of query points.
#[derive(Clone, Debug, PartialEq)]
pub struct DualBatch {
    values: Array2<f64>,
    gradients: Array2<f64>,
}

impl DualBatch {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    /// `B x C` values.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn value(&self, point: usize, channel: usize) -> f64 {
        self.values[[point, channel]]
    }

    pub fn gradient(&self, point: usize, channel: usize) -> Point3 {
        let b = self.len();
        Point3::new(
            self.gradients[[point, channel]],
            self.gradients[[b + point, channel]],
            self.gradients[[2 * b + point, channel]],
        )
    }
}

pub(crate) struct LayerTape {
    input: Array2<f64>,
    pre: Array2<f64>,
    input_tangent: Option<Array2<f64>>,
    pre_tangent: Option<Array2<f64>>,
}

pub(crate) struct Tape {
    layers: Vec<LayerTape>,
    last: Array2<f64>,
    last_tangent: Option<Array2<f64>>,
    pub(crate) values: Array2<f64>,
    pub(crate) gradients: Option<Array2<f64>>,
}

fn points_matrix(points: &[Point3]) -> Array2<f64> {
    Array2::from_shape_fn((points.len(), INPUT_DIM), |(b, j)| points[b][j])
}

fn axis_seed(batch: usize) -> Array2<f64> {
    Array2::from_shape_fn((INPUT_DIM * batch, INPUT_DIM), |(r, j)| {
        if r / batch == j {
            1.0
        } else {
            0.0
        }
    })
}

fn append_columns(left: &Array2<f64>, right: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((left.nrows(), left.ncols() + right.ncols()));
    out.slice_mut(s![.., ..left.ncols()]).assign(left);
    out.slice_mut(s![.., left.ncols()..]).assign(right);
    out
}

impl MlpModel {
    fn affine(&self, shape: &LayerShape, input: &Array2<f64>, with_bias: bool) -> Array2<f64> {
        let w = ArrayView2::from_shape(
            (shape.outputs, shape.inputs),
            &self.params()[shape.weight_range()],
        )
        .expect("layout");
        let mut out = Array2::zeros((input.nrows(), shape.outputs));
        if with_bias {
            let b = &self.params()[shape.bias_range()];
            for mut row in out.rows_mut() {
                row.iter_mut().zip(b).for_each(|(o, &v)| *o = v);
            }
            general_mat_mul(1.0, input, &w.t(), 1.0, &mut out);
        } else {
            general_mat_mul(1.0, input, &w.t(), 0.0, &mut out);
        }
        out
    }

    pub(crate) fn run(&self, points: &[Point3], tangents: bool) -> Tape {
        let act = self.arch().activation;
        let shapes = self.layer_shapes();
        let x = points_matrix(points);
        let batch = points.len();
        let seed = tangents.then(|| axis_seed(batch));
        let mut prev = x.clone();
        let mut prev_tangent = seed.clone();
        let mut layers = Vec::with_capacity(shapes.len() - 1);
        for shape in &shapes[..shapes.len() - 1] {
            let input = if shape.skip { append_columns(&prev, &x) } else { prev };
            let input_tangent = match (prev_tangent, &seed) {
                (Some(t), Some(e)) if shape.skip => Some(append_columns(&t, e)),
                (t, _) => t,
            };
            let pre = self.affine(shape, &input, true);
            let pre_tangent = input_tangent
                .as_ref()
                .map(|t| self.affine(shape, t, false));
            prev = pre.mapv(|z| act.value(z));
            prev_tangent = pre_tangent.as_ref().map(|t| {
                let mut t = t.clone();
                for (mut block, _) in t.axis_chunks_iter_mut(Axis(0), batch.max(1)).zip(0..INPUT_DIM) {
                    block.zip_mut_with(&pre, |d, &z| *d *= act.slope(z));
                }
                t
            });
            layers.push(LayerTape {
                input,
                pre,
                input_tangent,
                pre_tangent,
            });
        }
        let out_shape = shapes[shapes.len() - 1];
        let values = self.affine(&out_shape, &prev, true);
        let gradients = prev_tangent
            .as_ref()
            .map(|t| self.affine(&out_shape, t, false));
        Tape {
            layers,
            last: prev,
            last_tangent: prev_tangent,
            values,
            gradients,
        }
    }

    /// Values of every channel at one normalised point.
    pub fn forward(&self, p: Point3) -> Vec<f64> {
        self.forward_batch(&[p]).row(0).to_vec()
    }

    /// `B x C` values for a batch of normalised points.
    pub fn forward_batch(&self, points: &[Point3]) -> Array2<f64> {
        if points.is_empty() {
            return Array2::zeros((0, self.channels()));
        }
        self.run(points, false).values
    }

    /// Values and exact input gradients (ReLU slope taken as 0 at 0).
    pub fn forward_with_input_grad(&self, points: &[Point3]) -> DualBatch {
        if points.is_empty() {
            return DualBatch {
                values: Array2::zeros((0, self.channels())),
                gradients: Array2::zeros((0, self.channels())),
            };
        }
        let tape = self.run(points, true);
        DualBatch {
            values: tape.values,
            gradients: tape.gradients.expect("tangents requested"),
        }
    }

    /// Accumulates into `grads` the parameter gradient of a scalar loss
    /// whose partial derivatives with respect to the tape's values
    /// (`value_adj`, `B x C`) and input gradients (`grad_adj`, `3B x C`)
    /// are given.
    pub(crate) fn backward(
        &self,
        tape: &Tape,
        value_adj: &Array2<f64>,
        grad_adj: Option<&Array2<f64>>,
        grads: &mut [f64],
    ) {
        let act = self.arch().activation;
        let shapes = self.layer_shapes();
        let batch = value_adj.nrows();
        let grad_adj = grad_adj.filter(|_| tape.last_tangent.is_some());

        let out_shape = shapes[shapes.len() - 1];
        accumulate_layer(
            &out_shape,
            grads,
            value_adj,
            &tape.last,
            grad_adj.zip(tape.last_tangent.as_ref()),
        );
        let w_out = self.weights(shapes.len() - 1);
        let mut act_adj = value_adj.dot(&w_out);
        let mut tangent_adj = grad_adj.map(|g| g.dot(&w_out));

        for (l, layer) in tape.layers.iter().enumerate().rev() {
            let shape = shapes[l];
            let mut pre_adj = act_adj;
            pre_adj.zip_mut_with(&layer.pre, |a, &z| *a *= act.slope(z));
            let pre_tangent_adj = tangent_adj.map(|mut ta| {
                let t = layer.pre_tangent.as_ref().expect("tangent tape");
                let curved = !act.is_piecewise_linear();
                for j in 0..INPUT_DIM {
                    let rows = j * batch..(j + 1) * batch;
                    let mut block = ta.slice_mut(s![rows.clone(), ..]);
                    if curved {
                        let tb = t.slice(s![rows, ..]);
                        ndarray::Zip::from(&mut pre_adj)
                            .and(&block)
                            .and(&tb)
                            .and(&layer.pre)
                            .for_each(|pa, &a, &tv, &z| *pa += a * act.curvature(z) * tv);
                    }
                    block.zip_mut_with(&layer.pre, |a, &z| *a *= act.slope(z));
                }
                ta
            });
            accumulate_layer(
                &shape,
                grads,
                &pre_adj,
                &layer.input,
                pre_tangent_adj.as_ref().zip(layer.input_tangent.as_ref()),
            );
            if l == 0 {
                break;
            }
            let w = self.weights(l);
            let prev_width = shapes[l - 1].outputs;
            act_adj = pre_adj.dot(&w).slice(s![.., ..prev_width]).to_owned();
            tangent_adj = pre_tangent_adj.map(|t| t.dot(&w).slice(s![.., ..prev_width]).to_owned());
        }
    }
}

/// `dW += adjᵀ·input (+ tangent_adjᵀ·input_tangent)`, `db += Σ adj`.
fn accumulate_layer(
    shape: &LayerShape,
    grads: &mut [f64],
    adj: &Array2<f64>,
    input: &Array2<f64>,
    tangent: Option<(&Array2<f64>, &Array2<f64>)>,
) {
    {
        let mut dw = ArrayViewMut2::from_shape(
            (shape.outputs, shape.inputs),
            &mut grads[shape.weight_range()],
        )
        .expect("layout");
        general_mat_mul(1.0, &adj.t(), input, 1.0, &mut dw);
        if let Some((tadj, tin)) = tangent {
            general_mat_mul(1.0, &tadj.t(), tin, 1.0, &mut dw);
        }
    }
    let db = &mut grads[shape.bias_range()];
    for row in adj.rows() {
        db.iter_mut().zip(row).for_each(|(d, &a)| *d += a);
    }
}
