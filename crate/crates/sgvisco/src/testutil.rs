//! Shared helpers for unit tests.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::evolution::State;
use crate::field::SpectralGrid;

/// Random coefficients on the axis modes +-e1, +-e2(, +-e3): every excited
/// frequency stays resolved (omega dt < 1) down to dt = 1e-2 even for
/// delta = 1, so temporal order measurements sit in the asymptotic range.
pub fn random_axis_state(grid: SpectralGrid, amp: f64, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = State::zeros(grid);
    let mut modes = vec![[1i64, 0, 0]];
    if grid.d() >= 2 {
        modes.push([0, 1, 0]);
    }
    if grid.d() >= 3 {
        modes.push([0, 0, 1]);
    }
    for k in modes {
        let mut neg = [0i64; 3];
        for a in 0..grid.d() {
            neg[a] = -k[a];
        }
        for i in 0..grid.d() {
            let cy = Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
            let cu = Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
            state.y_hat.set_coeff(&k, i, cy);
            state.y_hat.set_coeff(&neg, i, cy.conj());
            state.u_hat.set_coeff(&k, i, cu);
            state.u_hat.set_coeff(&neg, i, cu.conj());
        }
    }
    state
}
