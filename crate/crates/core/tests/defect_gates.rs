//! Defect gates: every closed-form oscillatory-integral approximation is
//! checked against direct quadrature over a dyadic range of step sizes, and
//! the fitted decay slope must match the order of the approximation
//! (2 for the leading first order forms, 3 for the second order terms).
//!
//! Gate data is a pair of independent complex fields of H^6 regularity. A
//! generic complex `u` is deliberately used instead of a twisted one: on
//! nearly conjugate-symmetric `u` the `w` and `conj(w)` channels of the
//! defect interfere coherently, which bends the fitted slope in the
//! `tau c^2 >~ 1` part of the window even though the defect magnitudes stay
//! uniformly bounded by the expected order.

use std::sync::Arc;

use kgs_core::{
    closed_term, duhamel_reference, leading_order_psi, leading_order_u, quad_integral,
    random_sobolev, ua1_step, ua2_step, CParam, ClosedTerm, Grid, KgsState, OracleConfig,
    QuadTerm, RegularitySpec, SplitMix64, StepParams, Ua2Form,
};

const TAU_EXPONENTS: std::ops::RangeInclusive<i32> = 4..=10;
const GATE_SEED: u64 = 12;

fn fit_slope(taus: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = taus.iter().map(|t| t.log2()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.log2()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

fn gate_state(grid: &Arc<Grid>, theta: f64, seed: u64) -> KgsState {
    let u_seed = SplitMix64::substream(seed, 3).next_u64();
    let psi_seed = SplitMix64::substream(seed, 4).next_u64();
    let u = random_sobolev(grid, &RegularitySpec::new(theta, u_seed, false).unwrap());
    let psi = random_sobolev(grid, &RegularitySpec::new(theta, psi_seed, false).unwrap());
    KgsState::new(u, psi).unwrap()
}

const TERM_PAIRS: [(QuadTerm, ClosedTerm); 12] = [
    (QuadTerm::IFullU, ClosedTerm::IuFull),
    (QuadTerm::JFullPsi, ClosedTerm::IpsiFull),
    (QuadTerm::I1, ClosedTerm::I1),
    (QuadTerm::I2, ClosedTerm::I2),
    (QuadTerm::I3, ClosedTerm::I3),
    (QuadTerm::J1, ClosedTerm::J1),
    (QuadTerm::J21, ClosedTerm::J21),
    (QuadTerm::J22, ClosedTerm::J22),
    (QuadTerm::J23, ClosedTerm::J23),
    (QuadTerm::J24, ClosedTerm::J24),
    (QuadTerm::J31, ClosedTerm::J31),
    (QuadTerm::J32, ClosedTerm::J32),
];

#[test]
fn third_order_term_gates() {
    for c in [1.0, 8.0] {
        let grid = Grid::new(1, 64).unwrap();
        let s = gate_state(&grid, 6.0, GATE_SEED);
        for (qt, ct) in TERM_PAIRS {
            let mut taus = Vec::new();
            let mut errs = Vec::new();
            for j in TAU_EXPONENTS {
                let tau = 0.5f64.powi(j);
                let p = StepParams::new(CParam::new(c).unwrap(), tau).unwrap();
                let cfg = OracleConfig::for_params(&p);
                let quad = quad_integral(qt, &s.u, &s.psi, &p, &cfg).unwrap();
                let closed = closed_term(ct, &s.u, &s.psi, &p, Ua2Form::Standard).unwrap();
                taus.push(tau);
                errs.push((&quad - &closed).sobolev_norm(1.0));
            }
            let slope = fit_slope(&taus, &errs);
            println!("term {:10} c={c:<3} slope {slope:.3}", qt.name());
            assert!(
                (2.7..=3.3).contains(&slope),
                "term {} at c={c}: slope {slope} outside [2.7, 3.3]; defects {errs:?}",
                qt.name()
            );
        }
    }
}

#[test]
fn second_order_leading_gates() {
    // the first order closed forms capture I1 and J1 up to O(tau^2)
    for c in [1.0, 8.0] {
        let grid = Grid::new(1, 64).unwrap();
        let s = gate_state(&grid, 6.0, GATE_SEED);
        let mut taus = Vec::new();
        let mut errs_u = Vec::new();
        let mut errs_psi = Vec::new();
        for j in TAU_EXPONENTS {
            let tau = 0.5f64.powi(j);
            let p = StepParams::new(CParam::new(c).unwrap(), tau).unwrap();
            let cfg = OracleConfig::for_params(&p);
            let qi1 = quad_integral(QuadTerm::I1, &s.u, &s.psi, &p, &cfg).unwrap();
            let qj1 = quad_integral(QuadTerm::J1, &s.u, &s.psi, &p, &cfg).unwrap();
            let li1 = leading_order_u(&s.u, &s.psi, &p).unwrap();
            let lj1 = leading_order_psi(&s.u, &s.psi, &p).unwrap();
            taus.push(tau);
            errs_u.push((&qi1 - &li1).sobolev_norm(1.0));
            errs_psi.push((&qj1 - &lj1).sobolev_norm(1.0));
        }
        let slope_u = fit_slope(&taus, &errs_u);
        let slope_psi = fit_slope(&taus, &errs_psi);
        println!("leading u gate   c={c:<3} slope {slope_u:.3}");
        println!("leading psi gate c={c:<3} slope {slope_psi:.3}");
        assert!((1.8..=2.2).contains(&slope_u), "u leading slope {slope_u} at c={c}");
        assert!((1.8..=2.2).contains(&slope_psi), "psi leading slope {slope_psi} at c={c}");
    }
}

#[test]
fn one_step_defect_gates() {
    // ua1 defect against the Duhamel reference decays at order 2, ua2 at order 3
    for c in [1.0, 8.0] {
        let grid = Grid::new(1, 64).unwrap();
        let s = gate_state(&grid, 6.0, GATE_SEED);
        let mut taus = Vec::new();
        let mut d1 = Vec::new();
        let mut d2 = Vec::new();
        for j in TAU_EXPONENTS {
            let tau = 0.5f64.powi(j);
            let p = StepParams::new(CParam::new(c).unwrap(), tau).unwrap();
            let cfg = OracleConfig::for_params(&p);
            let exact = duhamel_reference(&s, &p, &cfg).unwrap();
            taus.push(tau);
            d1.push(exact.distance(&ua1_step(&s, &p).unwrap(), 1.0));
            d2.push(exact.distance(&ua2_step(&s, &p).unwrap(), 1.0));
        }
        let s1 = fit_slope(&taus, &d1);
        let s2 = fit_slope(&taus, &d2);
        println!("ua1 defect c={c:<3} slope {s1:.3}");
        println!("ua2 defect c={c:<3} slope {s2:.3}");
        assert!((1.8..=2.2).contains(&s1), "ua1 defect slope {s1} at c={c}: {d1:?}");
        assert!((2.7..=3.3).contains(&s2), "ua2 defect slope {s2} at c={c}: {d2:?}");
    }
}

#[test]
fn first_order_consistency_of_the_full_assembly() {
    // the full u assembly minus the first order closed form is O(tau^2)
    for c in [1.0, 8.0] {
        let grid = Grid::new(1, 64).unwrap();
        let s = gate_state(&grid, 6.0, GATE_SEED);
        let mut taus = Vec::new();
        let mut errs = Vec::new();
        for j in TAU_EXPONENTS {
            let tau = 0.5f64.powi(j);
            let p = StepParams::new(CParam::new(c).unwrap(), tau).unwrap();
            let full =
                closed_term(ClosedTerm::IuFull, &s.u, &s.psi, &p, Ua2Form::Standard).unwrap();
            let lead = leading_order_u(&s.u, &s.psi, &p).unwrap();
            taus.push(tau);
            errs.push((&full - &lead).sobolev_norm(1.0));
        }
        let slope = fit_slope(&taus, &errs);
        println!("assembly-vs-leading c={c:<3} slope {slope:.3}");
        assert!((1.8..=2.2).contains(&slope), "slope {slope} at c={c}");
    }
}

#[test]
fn upshifted_variant_loses_cubic_order_at_large_phase() {
    // the up-shifted difference multipliers reproduce the quadratic term only
    // while tau c^2 is small; at c = 8 the defect saturates and the fitted
    // slope drops well below 3
    let grid = Grid::new(1, 64).unwrap();
    let s = gate_state(&grid, 6.0, GATE_SEED);
    let mut taus = Vec::new();
    let mut std_errs = Vec::new();
    let mut up_errs = Vec::new();
    for j in TAU_EXPONENTS {
        let tau = 0.5f64.powi(j);
        let p = StepParams::new(CParam::new(8.0).unwrap(), tau).unwrap();
        let cfg = OracleConfig::for_params(&p);
        let quad = quad_integral(QuadTerm::I2, &s.u, &s.psi, &p, &cfg).unwrap();
        let std = closed_term(ClosedTerm::I2, &s.u, &s.psi, &p, Ua2Form::Standard).unwrap();
        let up = closed_term(ClosedTerm::I2, &s.u, &s.psi, &p, Ua2Form::UpshiftedI2).unwrap();
        taus.push(tau);
        std_errs.push((&quad - &std).sobolev_norm(1.0));
        up_errs.push((&quad - &up).sobolev_norm(1.0));
    }
    let std_slope = fit_slope(&taus, &std_errs);
    let up_slope = fit_slope(&taus, &up_errs);
    println!("I2 standard slope {std_slope:.3}, up-shifted slope {up_slope:.3}");
    assert!((2.7..=3.3).contains(&std_slope));
    assert!(up_slope < 2.7, "up-shifted variant unexpectedly kept order: {up_slope}");
}

#[test]
fn laplacian_psi2_variant_keeps_cubic_order() {
    // both argument choices for the quadratic correction pass the order gate
    let grid = Grid::new(1, 64).unwrap();
    let s = gate_state(&grid, 6.0, GATE_SEED);
    for c in [1.0, 8.0] {
        let mut taus = Vec::new();
        let mut errs = Vec::new();
        for j in TAU_EXPONENTS {
            let tau = 0.5f64.powi(j);
            let p = StepParams::new(CParam::new(c).unwrap(), tau).unwrap();
            let cfg = OracleConfig::for_params(&p);
            let quad = quad_integral(QuadTerm::I1, &s.u, &s.psi, &p, &cfg).unwrap();
            let alt = closed_term(ClosedTerm::I1, &s.u, &s.psi, &p, Ua2Form::LaplacianPsi2)
                .unwrap();
            taus.push(tau);
            errs.push((&quad - &alt).sobolev_norm(1.0));
        }
        let slope = fit_slope(&taus, &errs);
        println!("I1 laplacian-psi2 variant c={c:<3} slope {slope:.3}");
        assert!((2.7..=3.3).contains(&slope), "variant slope {slope} at c={c}");
    }
}
