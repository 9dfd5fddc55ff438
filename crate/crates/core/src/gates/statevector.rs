use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use super::GateAction;
use crate::error::{Error, Result};
use crate::termspace::{qubit_mask, BasisTerm, TermSet, NUM_TERMS};

/// Amplitudes at or below this magnitude are treated as absent.
pub const SUPPORT_TOL: f64 = 1e-9;

type Mat2 = [[f64; 2]; 2];

const HADAMARD: Mat2 = [
    [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
    [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
];

/// Real rotation `[[cos θ/2, sin θ/2], [sin θ/2, -cos θ/2]]`; `rotation(π/2)` is H.
fn rotation(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [[c, s], [s, -c]]
}

/// Four-qubit pure state, indexed by basis term (qubit A most significant).
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: [Complex64; NUM_TERMS],
}

impl StateVector {
    pub fn basis(term: BasisTerm) -> Self {
        let mut amps = [Complex64::new(0.0, 0.0); NUM_TERMS];
        amps[term.index()] = Complex64::new(1.0, 0.0);
        StateVector { amps }
    }

    /// Equal positive weights `1/√|s|` on every member of `s`.
    pub fn uniform(s: TermSet) -> Self {
        let w = 1.0 / (s.shell() as f64).sqrt();
        let mut amps = [Complex64::new(0.0, 0.0); NUM_TERMS];
        for t in s.terms() {
            amps[t.index()] = Complex64::new(w, 0.0);
        }
        StateVector { amps }
    }

    /// Wraps raw amplitudes without normalizing them.
    pub fn from_amplitudes(amps: [Complex64; NUM_TERMS]) -> Self {
        StateVector { amps }
    }

    /// Normalizes `amps`; fails on the zero vector.
    pub fn normalized(amps: [Complex64; NUM_TERMS]) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm <= f64::MIN_POSITIVE {
            return Err(Error::InvalidStateVector { tol: 0.0 });
        }
        Ok(StateVector {
            amps: amps.map(|a| a / norm),
        })
    }

    pub fn amplitudes(&self) -> &[Complex64; NUM_TERMS] {
        &self.amps
    }

    pub fn amplitude(&self, term: BasisTerm) -> Complex64 {
        self.amps[term.index()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|⟨self|other⟩|²`
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Copy with the global phase fixed so that the lowest-index amplitude
    /// above `tol` is real and positive.
    pub fn phase_fixed(&self, tol: f64) -> StateVector {
        match self.amps.iter().find(|a| a.norm() > tol) {
            Some(a) => {
                let phase = a.conj() / a.norm();
                StateVector {
                    amps: self.amps.map(|x| x * phase),
                }
            }
            None => self.clone(),
        }
    }

    /// Largest per-amplitude distance after fixing both global phases.
    pub fn max_abs_diff_up_to_phase(&self, other: &StateVector) -> f64 {
        let a = self.phase_fixed(SUPPORT_TOL);
        let b = other.phase_fixed(SUPPORT_TOL);
        a.amps
            .iter()
            .zip(b.amps.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, action: &GateAction) -> StateVector {
        let mut out = self.clone();
        out.apply_in_place(action);
        out
    }

    pub fn apply_in_place(&mut self, action: &GateAction) {
        match *action {
            GateAction::X { target } => self.swap_pairs(0, target),
            GateAction::Cnot { control, target } => self.swap_pairs(qubit_mask(control), target),
            GateAction::Ccnot { controls, target } => {
                self.swap_pairs(qubit_mask(controls[0]) | qubit_mask(controls[1]), target)
            }
            GateAction::H { target } => self.apply_real_2x2(0, target, &HADAMARD),
            GateAction::Ch { control, target } => {
                self.apply_real_2x2(qubit_mask(control), target, &HADAMARD)
            }
            GateAction::U { target, theta } => self.apply_real_2x2(0, target, &rotation(theta)),
            GateAction::Cu {
                control,
                target,
                theta,
            } => self.apply_real_2x2(qubit_mask(control), target, &rotation(theta)),
        }
    }

    fn swap_pairs(&mut self, controls: usize, target: usize) {
        let t = qubit_mask(target);
        for i in (0..NUM_TERMS).filter(|i| i & t == 0 && i & controls == controls) {
            self.amps.swap(i, i | t);
        }
    }

    fn apply_real_2x2(&mut self, controls: usize, target: usize, m: &Mat2) {
        let t = qubit_mask(target);
        for i in (0..NUM_TERMS).filter(|i| i & t == 0 && i & controls == controls) {
            let (a0, a1) = (self.amps[i], self.amps[i | t]);
            self.amps[i] = a0 * m[0][0] + a1 * m[0][1];
            self.amps[i | t] = a0 * m[1][0] + a1 * m[1][1];
        }
    }
}

/// Basis terms whose amplitude magnitude exceeds `tol`.
pub fn support(v: &StateVector, tol: f64) -> Result<TermSet> {
    let mask = v
        .amps
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > tol)
        .fold(0u16, |m, (i, _)| m | (1 << i));
    TermSet::from_mask(mask).map_err(|_| Error::InvalidStateVector { tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{GateKind, GateSet};
    use crate::termspace::{enumerate_environment, parse_termset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_state(rng: &mut ChaCha8Rng) -> StateVector {
        let mut amps = [c(0.0); NUM_TERMS];
        for a in amps.iter_mut() {
            *a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        StateVector::normalized(amps).unwrap()
    }

    #[test]
    fn hadamard_on_ground_state() {
        let v = StateVector::basis(BasisTerm::new(0).unwrap())
            .apply(&GateAction::new(GateKind::H, &[0], None).unwrap());
        assert!((v.amps[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((v.amps[8].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(
            support(&v, SUPPORT_TOL).unwrap(),
            parse_termset("0000,1000").unwrap()
        );
    }

    #[test]
    fn hadamard_on_bell_pair_signs() {
        let mut amps = [c(0.0); NUM_TERMS];
        amps[0b0000] = c(FRAC_1_SQRT_2);
        amps[0b1100] = c(FRAC_1_SQRT_2);
        let v = StateVector::from_amplitudes(amps)
            .apply(&GateAction::new(GateKind::H, &[0], None).unwrap());
        let expected = [(0b0000, 0.5), (0b1000, 0.5), (0b0100, 0.5), (0b1100, -0.5)];
        for (i, amp) in expected {
            assert!((v.amps[i].re - amp).abs() < 1e-15, "term {i:04b}");
        }
        assert_eq!(support(&v, SUPPORT_TOL).unwrap().shell(), 4);
    }

    #[test]
    fn rotation_by_twice_arctan_sqrt2() {
        let theta = 2.0 * 2f64.sqrt().atan();
        let v = StateVector::basis(BasisTerm::new(0).unwrap())
            .apply(&GateAction::new(GateKind::U, &[0], Some(theta)).unwrap());
        assert!((v.amps[0].re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((v.amps[8].re - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rotation_at_quarter_turn_is_hadamard() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let v = random_state(&mut rng);
            for q in 0..4 {
                let h = v.apply(&GateAction::new(GateKind::H, &[q], None).unwrap());
                let u = v.apply(
                    &GateAction::new(GateKind::U, &[q], Some(std::f64::consts::FRAC_PI_2)).unwrap(),
                );
                assert!(h.max_abs_diff_up_to_phase(&u) < 1e-12);
            }
        }
    }

    #[test]
    fn support_drops_noise_and_rejects_zero() {
        let mut amps = [c(0.0); NUM_TERMS];
        amps[0] = c(1.0);
        amps[1] = c(1e-15);
        assert_eq!(
            support(&StateVector::from_amplitudes(amps), SUPPORT_TOL).unwrap(),
            parse_termset("0000").unwrap()
        );
        let zero = StateVector::from_amplitudes([c(0.0); NUM_TERMS]);
        assert!(matches!(
            support(&zero, SUPPORT_TOL),
            Err(Error::InvalidStateVector { .. })
        ));
    }

    #[test]
    fn norm_is_preserved_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let gates = GateSet::full();
        for _ in 0..1000 {
            let v = random_state(&mut rng);
            for a in gates.actions() {
                assert!((v.apply(a).norm_sqr() - 1.0).abs() < 1e-12);
            }
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let u = GateAction::new(GateKind::Cu, &[1, 2], Some(theta)).unwrap();
            assert!((v.apply(&u).norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn learner_gates_are_involutions() {
        for a in GateSet::full().actions() {
            for t in BasisTerm::all() {
                let v = StateVector::basis(t);
                let back = v.apply(a).apply(a);
                assert!(
                    v.amps
                        .iter()
                        .zip(back.amps.iter())
                        .all(|(x, y)| (x - y).norm() < 1e-12),
                    "{} applied twice moved {t}",
                    a.label()
                );
            }
        }
    }

    /// The symbolic transition is the support of the simulated uniform state.
    #[test]
    fn transition_agrees_with_simulation() {
        let env = enumerate_environment(4).unwrap();
        let big = enumerate_environment(16).unwrap();
        let gates = GateSet::full();
        for &s in env.states() {
            for a in gates.actions() {
                let simulated = support(&StateVector::uniform(s).apply(a), SUPPORT_TOL).unwrap();
                let symbolic = crate::gates::transition(s, a, &big).unwrap();
                assert_eq!(symbolic, simulated);
                let bounded = crate::gates::transition(s, a, &env);
                assert_eq!(bounded, (simulated.shell() <= 4).then_some(simulated));
            }
        }
    }

    #[test]
    fn permutations_preserve_shells_bijectively() {
        let env = enumerate_environment(5).unwrap();
        let gates = GateSet::new(&[GateKind::X, GateKind::Cnot, GateKind::Ccnot]).unwrap();
        for a in gates.actions() {
            let mut seen = vec![false; env.len()];
            for &s in env.states() {
                let next = crate::gates::transition(s, a, &env).unwrap();
                assert_eq!(next.shell(), s.shell());
                let id = env.id(next).unwrap();
                assert!(!seen[id], "{} is not injective", a.label());
                seen[id] = true;
            }
        }
    }
}
