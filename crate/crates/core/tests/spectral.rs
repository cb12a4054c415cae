use std::sync::OnceLock;

use magdecay::dense::{self, DenseEigen};
use magdecay::propagator::{evolve_direct, DirectMethod};
use magdecay::spectral::{discrete_spectrum, project_continuous, SpectralData};
use magdecay::{builtin_potential, Field, Grid, OperatorHandle, PotentialKind};

struct Setup {
    h: OperatorHandle,
    sd: SpectralData,
    de: DenseEigen,
}

// deep magnetic well with one bound state and one shallow box state
fn setup() -> &'static Setup {
    static CELL: OnceLock<Setup> = OnceLock::new();
    CELL.get_or_init(|| {
        let g = Grid::new(10, 6.0).unwrap();
        let h = OperatorHandle::full(
            builtin_potential(PotentialKind::CoupledWell, &[6.0, 1.0, 0.4], g).unwrap(),
        );
        let sd = discrete_spectrum(&h, 4).unwrap();
        let de = dense::eigen(&h).unwrap();
        Setup { h, sd, de }
    })
}

fn gaussian(g: Grid, w: f64) -> Field {
    Field::from_real_fn(g, |x| {
        (-((x[0] - 0.5).powi(2) + x[1] * x[1] + x[2] * x[2]) / (2.0 * w * w)).exp()
    })
}

#[test]
fn bound_states_match_dense_diagonalisation() {
    let s = setup();
    let negative: Vec<f64> = s.de.values.iter().copied().filter(|v| *v < -1e-6).collect();
    assert_eq!(negative.len(), 2);
    assert_eq!(s.sd.n_discrete, negative.len());
    for (a, b) in s.sd.eigenvalues.iter().zip(&negative) {
        assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn continuous_projection_matches_dense() {
    let s = setup();
    let psi = gaussian(*s.h.grid(), 1.0);
    let pc = project_continuous(&s.sd, &psi).unwrap();
    let exact = s.de.project_above(&psi, -1e-6).unwrap();
    assert!((&pc - &exact).norm() < 1e-7 * psi.norm());
}

#[test]
fn direct_evolution_matches_dense() {
    let s = setup();
    let psi = gaussian(*s.h.grid(), 1.0);
    for t in [0.3, 1.7] {
        let a = evolve_direct(&s.h, &s.sd, &psi, t, DirectMethod::default()).unwrap();
        let b = s.de.evolve(&psi, t).unwrap();
        assert!(
            (&a - &b).norm() < 1e-7 * psi.norm(),
            "t={t}: {}",
            (&a - &b).norm()
        );
    }
}
