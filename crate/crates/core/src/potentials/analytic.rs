//! Closed-form potential descriptors for off-grid evaluation.

use serde::{Deserialize, Serialize};

/// Off-grid description of `(A, V)`. Derivatives of `A` are taken by central differences of the
/// closed form, which is accurate far beyond what the log–log decay fits need.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AnalyticPotential {
    Zero,
    /// `V = v·exp(-|x-c|²/2w²)`, `A_j = a·∂_j g_j` with `g_j` a width-`w` Gaussian shifted by
    /// `w/2` along axis `j+1`.
    Gaussian {
        v_amp: f64,
        a_amp: f64,
        width: f64,
        center: [f64; 3],
    },
    /// Same structure with the smooth compactly supported bump `exp(1 - 1/(1-r²/R²))`.
    Compact {
        v_amp: f64,
        a_amp: f64,
        radius: f64,
        center: [f64; 3],
    },
    /// `V = amp·⟨x⟩^{-p}`, `A = 0`; a long-range example used to exercise decay validation.
    InversePower {
        amp: f64,
        exponent: f64,
    },
}

pub(crate) fn shift_for(j: usize, scale: f64) -> [f64; 3] {
    let mut s = [0.0; 3];
    s[(j + 1) % 3] = 0.5 * scale;
    s
}

fn r2(x: [f64; 3], c: [f64; 3]) -> f64 {
    (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)
}

pub(crate) fn gaussian(x: [f64; 3], c: [f64; 3], w: f64) -> f64 {
    (-r2(x, c) / (2.0 * w * w)).exp()
}

pub(crate) fn bump(x: [f64; 3], c: [f64; 3], radius: f64) -> f64 {
    let t = r2(x, c) / (radius * radius);
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t)).exp()
    }
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

impl AnalyticPotential {
    pub fn v(&self, x: [f64; 3]) -> f64 {
        match *self {
            AnalyticPotential::Zero => 0.0,
            AnalyticPotential::Gaussian {
                v_amp,
                width,
                center,
                ..
            } => v_amp * gaussian(x, center, width),
            AnalyticPotential::Compact {
                v_amp,
                radius,
                center,
                ..
            } => v_amp * bump(x, center, radius),
            AnalyticPotential::InversePower { amp, exponent } => {
                amp * (1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powf(-0.5 * exponent)
            }
        }
    }

    /// The scalar "gauge seed" `g_j` whose `j`-th derivative (times the amplitude) is `A_j`.
    pub(crate) fn seed(&self, j: usize, x: [f64; 3]) -> f64 {
        match *self {
            AnalyticPotential::Gaussian {
                a_amp,
                width,
                center,
                ..
            } => a_amp * width * gaussian(x, add(center, shift_for(j, width)), width),
            AnalyticPotential::Compact {
                a_amp,
                radius,
                center,
                ..
            } => a_amp * radius * bump(x, add(center, shift_for(j, radius)), radius),
            _ => 0.0,
        }
    }

    pub fn a(&self, x: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (j, o) in out.iter_mut().enumerate() {
            *o = partial(|y| self.seed(j, y), x, j);
        }
        out
    }

    /// `∂_i A_j` as `grad[i][j]`.
    pub fn grad_a(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for (i, row) in g.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = partial(|y| self.a(y)[j], x, i);
            }
        }
        g
    }

    /// Frobenius norm of the 27 second derivatives `∂_k ∂_i A_j`.
    pub fn hess_a_norm(&self, x: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let d = partial(|y| self.grad_a(y)[i][j], x, k);
                    s += d * d;
                }
            }
        }
        s.sqrt()
    }

    /// `|V| + |A| + |∇A|` at `x`.
    pub fn primary_magnitude(&self, x: [f64; 3]) -> f64 {
        let a = self.a(x);
        let g = self.grad_a(x);
        let an = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        let gn = g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        self.v(x).abs() + an + gn
    }
}

fn partial(f: impl Fn([f64; 3]) -> f64, x: [f64; 3], axis: usize) -> f64 {
    const H: f64 = 1e-3;
    let at = |s: f64| {
        let mut y = x;
        y[axis] += s;
        f(y)
    };
    (-at(2.0 * H) + 8.0 * at(H) - 8.0 * at(-H) + at(-2.0 * H)) / (12.0 * H)
}
