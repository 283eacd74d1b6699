//! Named example potentials and seeded random models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::potential::{Case, LGPotential};
use crate::C64;

fn r(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// 1D Toda: `λ = p - 4 + 3/p` (`N = 1`, `κ = (1, 1)`, `b = (3, 1)`).
pub fn toda() -> LGPotential {
    LGPotential::case_i(1, vec![1.0, 1.0], vec![r(3.0), r(1.0)]).unwrap()
}

/// 1D Toda with general zeros, `λ = (p - b1)(p - b2)/p`.
pub fn toda_with(b1: C64, b2: C64) -> LGPotential {
    LGPotential::case_i(1, vec![1.0, 1.0], vec![b1, b2]).unwrap()
}

/// Ablowitz–Ladik: `λ = p(p - 1)/(p - 2)` (`N = -1`, `κ = (1, -1)`).
pub fn ablowitz_ladik() -> LGPotential {
    LGPotential::case_i(-1, vec![1.0, -1.0], vec![r(1.0), r(2.0)]).unwrap()
}

/// `λ = (p - 1) e^{5/p}`.
pub fn case_two_simple() -> LGPotential {
    LGPotential::case_ii(vec![1.0], vec![r(1.0)], vec![r(5.0)]).unwrap()
}

fn random_complex(rng: &mut ChaCha8Rng, rmin: f64, rmax: f64) -> C64 {
    let rad = rng.gen_range(rmin..rmax);
    let th = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    C64::from_polar(rad, th)
}

/// A random model of the given shape whose critical frame is well separated.
///
/// `κ_i` are drawn from `[0.5, 2.5]` (Case I exponents get a random sign when
/// `M̃` stays positive), `|b_i| ∈ [0.6, 2]`, `|c_k| ∈ [0.3, 1.2]`.
pub fn random_model_with(rng: &mut ChaCha8Rng, case: Case, m: usize, n: i32) -> LGPotential {
    loop {
        let mut kappa: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..2.5)).collect();
        if case == Case::I && m > 1 && rng.gen_bool(0.3) {
            let i = rng.gen_range(0..m);
            kappa[i] = -kappa[i];
        }
        let b: Vec<C64> = (0..m).map(|_| random_complex(rng, 0.6, 2.0)).collect();
        let c: Vec<C64> = match case {
            Case::I => Vec::new(),
            Case::II => (0..n).map(|_| random_complex(rng, 0.3, 1.2)).collect(),
        };
        let mut spread = true;
        for i in 0..m {
            for j in 0..i {
                spread &= (b[i] - b[j]).norm() > 0.3;
            }
        }
        if !spread {
            continue;
        }
        let Ok(p) = LGPotential::new(case, n, kappa, b, c) else {
            continue;
        };
        if well_conditioned(&p) {
            return p;
        }
    }
}

fn well_conditioned(p: &LGPotential) -> bool {
    let Ok(f) = p.critical_frame() else {
        return false;
    };
    let scale = f.gamma.iter().map(|g| g.norm()).fold(0.0, f64::max);
    if f.separation < 0.1 * scale || scale > 20.0 {
        return false;
    }
    for g in &f.gamma {
        if g.norm() < 0.1 * scale || p.b().iter().any(|b| (g - b).norm() < 0.1 * scale) {
            return false;
        }
    }
    f.lam.iter().all(|l| l.norm() > 1e-3 && l.norm() < 1e4)
        && (0..f.len()).all(|i| (0..i).all(|j| (f.lam[i] - f.lam[j]).norm() > 1e-2 * f.lam[i].norm()))
}

/// A random model with `K ≤ 4`, seeded.
pub fn random_model(seed: u64) -> LGPotential {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let case = if rng.gen_bool(0.5) { Case::I } else { Case::II };
    match case {
        Case::I => {
            let m = rng.gen_range(1..=4);
            let n = [-2, -1, 1, 2][rng.gen_range(0..4)];
            // M̃ > 0 needs Σκ > N; resample shapes that cannot reach it
            let n = if m == 1 && n > 0 { -n } else { n };
            random_model_with(&mut rng, case, m, n)
        }
        Case::II => {
            let m = rng.gen_range(1..=2);
            let n = rng.gen_range(1..=2);
            random_model_with(&mut rng, case, m, n)
        }
    }
}

/// A seeded point at distance at least `0.3` from `0` and every `b_i`, and
/// away from the principal branch cuts of each `log(p - b_i)` and `log p`.
pub fn random_point(seed: u64, p: &LGPotential) -> C64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let z = random_complex(&mut rng, 0.4, 3.0);
        let centers = std::iter::once(r(0.0)).chain(p.b().iter().copied());
        let ok = centers.into_iter().all(|b| {
            let d = z - b;
            d.norm() > 0.3 && !(d.re < 0.0 && d.im.abs() < 1e-2)
        });
        if ok {
            return z;
        }
    }
}

/// Seeded generator for callers that draw several models.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A seeded, well-conditioned model with the shape (case, `N`, `κ`) of `p`
/// and fresh `b_i`, `c_k`.
pub fn random_params_like(seed: u64, p: &LGPotential) -> LGPotential {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let b: Vec<C64> = (0..p.m()).map(|_| random_complex(&mut rng, 0.6, 2.0)).collect();
        let c: Vec<C64> = p.c().iter().map(|_| random_complex(&mut rng, 0.3, 1.2)).collect();
        let spread = (0..b.len()).all(|i| (0..i).all(|j| (b[i] - b[j]).norm() > 0.3));
        if !spread {
            continue;
        }
        let Ok(q) = LGPotential::new(p.case(), p.n(), p.kappa().to_vec(), b, c) else {
            continue;
        };
        if well_conditioned(&q) {
            return q;
        }
    }
}
