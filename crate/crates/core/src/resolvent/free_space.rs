//! Free resolvent of ℝ³ restricted to the box.
//!
//! Fields on the box are zero-padded into a larger periodic grid with the same spacing and
//! convolved with the kernel `exp(iκ|z|)/(4π|z|)` truncated to `|z| < L`. When `L` covers every
//! source–target distance and the padded period exceeds `L` plus the box reach, the periodic
//! images of the truncated kernel never meet the box, so the result equals the ℝ³ convolution
//! up to the band limit of the data. The Fourier transform of the truncated kernel is explicit
//! and entire in `κ`, which makes the on-shell values `κ = ±√λ` directly available.

use std::sync::{Arc, Mutex};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{fft, Carrier, Field, Grid};

const I: C64 = C64::new(0.0, 1.0);

/// `E_m(α) = ∫₀^L r^m exp(iαr) dr` for `m = 0..=3`.
pub(crate) fn moments(alpha: C64, big_l: f64) -> [C64; 4] {
    let z = alpha * big_l;
    let mut out = [C64::default(); 4];
    if z.norm() < 2.0 {
        // power series in iαL
        for (m, o) in out.iter_mut().enumerate() {
            let mut term = C64::new(1.0, 0.0);
            let mut acc = C64::default();
            for j in 0..60 {
                let add = term / (m + j + 1) as f64;
                acc += add;
                if add.norm() < 1e-18 * acc.norm() {
                    break;
                }
                term *= I * z / (j + 1) as f64;
            }
            *o = acc * big_l.powi(m as i32 + 1);
        }
    } else {
        let e = (I * z).exp();
        let ia = I * alpha;
        out[0] = (e - 1.0) / ia;
        for m in 1..4 {
            out[m] = (e * big_l.powi(m as i32) - out[m - 1] * m as f64) / ia;
        }
    }
    out
}

/// Fourier multiplier of the `k`-th `ω`-derivative of the truncated kernel at `|ξ| = q`.
pub(crate) fn truncated_multiplier(kappa: C64, k: u8, q: f64, big_l: f64) -> C64 {
    let (d0, d1, d2) = if q == 0.0 {
        let e = moments(kappa, big_l);
        (e[1], I * e[2], -e[3])
    } else {
        let ep = moments(kappa + q, big_l);
        let em = moments(kappa - q, big_l);
        let s = 1.0 / (2.0 * q);
        (
            (ep[0] - em[0]) * s / I,
            (ep[1] - em[1]) * s,
            I * (ep[2] - em[2]) * s,
        )
    };
    match k {
        0 => d0,
        1 => d1 / (2.0 * kappa),
        _ => (d2 - d1 / kappa) / (4.0 * kappa * kappa),
    }
}

pub struct FreeSpaceResolvent {
    grid: Grid,
    padded: Grid,
    offset: usize,
    reach: f64,
    carrier: Carrier,
    cache: Mutex<Vec<(C64, u8, Arc<Vec<C64>>)>>,
}

impl std::fmt::Debug for FreeSpaceResolvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FreeSpaceResolvent")
            .field("grid", &self.grid)
            .field("padded", &self.padded)
            .field("reach", &self.reach)
            .field("carrier", &self.carrier)
            .finish()
    }
}

impl Clone for FreeSpaceResolvent {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid,
            padded: self.padded,
            offset: self.offset,
            reach: self.reach,
            carrier: self.carrier,
            cache: Mutex::new(Vec::new()),
        }
    }
}

impl FreeSpaceResolvent {
    /// `source_radius` bounds `|y|` over the support of every field this operator is applied to;
    /// it is clamped to the box.
    pub fn new(grid: Grid, source_radius: f64, carrier: Carrier) -> Result<Self> {
        let l = grid.l();
        let h = grid.h();
        let rho = source_radius.clamp(0.0, 3f64.sqrt() * l);
        let reach = 3f64.sqrt() * l + rho + 2.0 * h;
        let period = reach + l + rho.min(l) + 2.0 * h;
        let mut np = fft::good_size(((period / h).ceil() as usize).max(grid.n()));
        if (np - grid.n()) % 2 != 0 {
            np = fft::good_size(np + 1);
        }
        let padded = Grid::new(np, np as f64 * h / 2.0)?;
        Ok(Self {
            grid,
            padded,
            offset: (np - grid.n()) / 2,
            reach,
            carrier,
            cache: Mutex::new(Vec::new()),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn padded(&self) -> &Grid {
        &self.padded
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn carrier(&self) -> Carrier {
        self.carrier
    }

    fn multipliers(&self, kappa: C64, k: u8) -> Arc<Vec<C64>> {
        const KEEP: usize = 4;
        let mut guard = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(pos) = guard
            .iter()
            .position(|(kc, kk, _)| *kc == kappa && *kk == k)
        {
            let hit = guard.remove(pos);
            let m = hit.2.clone();
            guard.push(hit);
            return m;
        }
        let p = self.padded;
        let c = self.carrier;
        let m: Arc<Vec<C64>> = Arc::new(
            (0..p.len())
                .map(|idx| {
                    let xi = p.wavevector(idx);
                    let q =
                        ((xi[0] + c[0]).powi(2) + (xi[1] + c[1]).powi(2) + (xi[2] + c[2]).powi(2))
                            .sqrt();
                    truncated_multiplier(kappa, k, q, self.reach)
                })
                .collect(),
        );
        if guard.len() == KEEP {
            guard.remove(0);
        }
        guard.push((kappa, k, m.clone()));
        m
    }

    /// `R₀^{(k)}` at the spectral parameter with `√ω = κ`, `Im κ ≥ 0`.
    pub fn apply(&self, kappa: C64, k: u8, f: &Field) -> Result<Field> {
        self.grid.check(f.grid(), "free-space resolvent")?;
        if k > 2 {
            return Err(Error::InvalidParameter(format!("derivative order {k} > 2")));
        }
        if k > 0 && kappa.norm() == 0.0 {
            return Err(Error::SingularMultiplier { re: 0.0, im: 0.0 });
        }
        let n = self.grid.n();
        let np = self.padded.n();
        let o = self.offset;
        let mut buf = vec![C64::default(); self.padded.len()];
        for i in 0..n {
            for j in 0..n {
                let src = &f.values()[(i * n + j) * n..(i * n + j + 1) * n];
                let dst = ((i + o) * np + j + o) * np + o;
                buf[dst..dst + n].copy_from_slice(src);
            }
        }
        fft::forward(&mut buf, np);
        let m = self.multipliers(kappa, k);
        for (b, m) in buf.iter_mut().zip(m.iter()) {
            *b *= m;
        }
        fft::inverse(&mut buf, np);
        let mut out = vec![C64::default(); self.grid.len()];
        for i in 0..n {
            for j in 0..n {
                let src = ((i + o) * np + j + o) * np + o;
                out[(i * n + j) * n..(i * n + j + 1) * n].copy_from_slice(&buf[src..src + n]);
            }
        }
        Field::from_values(self.grid, out)
    }
}
