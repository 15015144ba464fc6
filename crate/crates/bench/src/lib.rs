//! Shared fixtures for the criterion benchmarks: a reference qubit
//! repeated-interaction setup and its Poisson-kick counterpart.

use num_complex::Complex64;
use repint_core::effective_me::{Background, PoissonKickSpec};
use repint_core::operators::{
    gibbs_state, qubit, CMatrix, DensityMatrix, HilbertSpace, Operator,
};
use repint_core::repeated_interaction::{InteractionScenario, ReservoirMode, UnitStreamSpec};

pub fn qubit_spaces() -> (HilbertSpace, HilbertSpace, HilbertSpace) {
    let s = HilbertSpace::single("S", 2);
    let u = HilbertSpace::single("U", 2);
    let su = s.join(&u).unwrap();
    (s, u, su)
}

fn exchange(su: &HilbertSpace, g: f64) -> Operator {
    let mut m = CMatrix::zeros(4, 4);
    m[(1, 2)] = Complex64::new(g, 0.0);
    m[(2, 1)] = Complex64::new(g, 0.0);
    Operator::new(su.clone(), m).unwrap()
}

/// System state with coherence, away from any fixed point.
pub fn rho_s0(space_s: &HilbertSpace) -> DensityMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = Complex64::new(0.58, 0.0);
    m[(1, 1)] = Complex64::new(0.42, 0.0);
    m[(0, 1)] = Complex64::new(0.10, 0.12);
    m[(1, 0)] = Complex64::new(0.10, -0.12);
    DensityMatrix::new(space_s.clone(), m).unwrap()
}

/// Reference qubit interval: exchange-coupled unit stream plus a
/// weak-coupling reservoir on the system.
pub fn interval_scenario() -> (InteractionScenario, DensityMatrix) {
    let (s, u, su) = qubit_spaces();
    let h_s = qubit::sigma_z(&s).scale(Complex64::new(0.55, 0.0));
    let h_u = qubit::sigma_z(&u).scale(Complex64::new(0.45, 0.0));
    let stream = UnitStreamSpec {
        rho_u: gibbs_state(&h_u, 0.7).unwrap(),
        h_u,
        v_su: exchange(&su, 0.8),
        tau: 2.0,
        tau_prime: 1.0,
    };
    let reservoir = ReservoirMode::WeakCoupling {
        couplings: vec![qubit::sigma_x(&s)],
        beta: 0.5,
        gamma0: 0.3,
    };
    let scenario = InteractionScenario::new(h_s, stream, reservoir, 0.5).unwrap();
    (scenario, rho_s0(&s))
}

/// Poisson-kick counterpart of the reference interval.
pub fn poisson_spec() -> (PoissonKickSpec, DensityMatrix) {
    let (s, u, su) = qubit_spaces();
    let h_s = qubit::sigma_z(&s).scale(Complex64::new(0.55, 0.0));
    let h_u = qubit::sigma_z(&u).scale(Complex64::new(0.45, 0.0));
    let spec = PoissonKickSpec {
        gamma: 1.0,
        h_s,
        v_su: exchange(&su, 0.8),
        rho_u: gibbs_state(&h_u, 0.7).unwrap(),
        h_u,
        background: Background::Thermal {
            couplings: vec![qubit::sigma_x(&s)],
            beta: 0.5,
            gamma0: 0.3,
        },
    };
    (spec, rho_s0(&s))
}
