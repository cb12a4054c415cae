//! Dense reference linear algebra for small grids: the matrix of `H`, LU solves of `H - ω`,
//! the Hermitian eigendecomposition and `exp(-itH)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{Field, Grid, NO_CARRIER};
use crate::operators::OperatorHandle;

/// Largest number of grid points accepted (`12³`).
pub const MAX_DENSE: usize = 1728;

fn check_size(grid: &Grid) -> Result<()> {
    if grid.len() > MAX_DENSE {
        return Err(Error::InvalidParameter(format!(
            "dense oracle limited to {MAX_DENSE} points, grid has {}",
            grid.len()
        )));
    }
    Ok(())
}

/// Matrix of `H` in the grid-point basis, built column by column; symmetrised to remove
/// roundoff asymmetry.
pub fn matrix(h: &OperatorHandle) -> Result<DMatrix<C64>> {
    let grid = *h.grid();
    check_size(&grid)?;
    let n = grid.len();
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut e = Field::zeros(grid);
    for j in 0..n {
        e.values_mut()[j] = C64::new(1.0, 0.0);
        let col = h.apply_carrier(&e, NO_CARRIER);
        m.column_mut(j).copy_from_slice(col.values());
        e.values_mut()[j] = C64::default();
    }
    let adj = m.adjoint();
    Ok((m + adj) * C64::new(0.5, 0.0))
}

fn to_vector(f: &Field) -> DVector<C64> {
    DVector::from_column_slice(f.values())
}

fn to_field(grid: Grid, v: &DVector<C64>) -> Result<Field> {
    Field::from_values(grid, v.as_slice().to_vec())
}

/// `(H - ω)⁻¹ f` by LU with partial pivoting.
pub fn resolve(h: &OperatorHandle, omega: C64, f: &Field) -> Result<Field> {
    h.grid().check(f.grid(), "dense resolve")?;
    let mut m = matrix(h)?;
    for i in 0..m.nrows() {
        m[(i, i)] -= omega;
    }
    let x = m
        .lu()
        .solve(&to_vector(f))
        .ok_or(Error::SingularMultiplier {
            re: omega.re,
            im: omega.im,
        })?;
    to_field(*h.grid(), &x)
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors.
pub struct DenseEigen {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl DenseEigen {
    pub fn vector(&self, j: usize) -> Result<Field> {
        Field::from_values(self.grid, self.vectors.column(j).iter().copied().collect())
    }

    /// `exp(-itH)ψ`.
    pub fn evolve(&self, psi: &Field, t: f64) -> Result<Field> {
        self.grid.check(psi.grid(), "dense evolve")?;
        let mut c = self.vectors.adjoint() * to_vector(psi);
        for (cj, lam) in c.iter_mut().zip(&self.values) {
            *cj *= C64::new(0.0, -t * lam).exp();
        }
        to_field(self.grid, &(&self.vectors * c))
    }

    /// Projection onto the eigenvectors with eigenvalue `≥ threshold`.
    pub fn project_above(&self, psi: &Field, threshold: f64) -> Result<Field> {
        self.grid.check(psi.grid(), "dense projection")?;
        let mut c = self.vectors.adjoint() * to_vector(psi);
        for (cj, lam) in c.iter_mut().zip(&self.values) {
            if *lam < threshold {
                *cj = C64::default();
            }
        }
        to_field(self.grid, &(&self.vectors * c))
    }
}

pub fn eigen(h: &OperatorHandle) -> Result<DenseEigen> {
    let m = matrix(h)?;
    let n = m.nrows();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(DenseEigen {
        grid: *h.grid(),
        values,
        vectors,
    })
}
