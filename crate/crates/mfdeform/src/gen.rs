//! Seeded random inputs: potentials, changes of variables and
//! automorphisms of `E` with identity associated graded.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ainfinity::{for_each_tuple, AInfMorphism};
use crate::exterior::{all_blades, Blade, Ext};
use crate::scalar::{Ring, Scalar};
use crate::series::{monomials_of_degree, FormalDiffeo, Mono, Series};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small(rng: &mut impl Rng, ring: Ring) -> Scalar {
    Scalar::from_i64(ring, rng.gen_range(-3..=3))
}

fn nonzero(rng: &mut impl Rng, ring: Ring) -> Scalar {
    loop {
        let c = small(rng, ring);
        if !c.is_zero() {
            return c;
        }
    }
}

/// Random `w ∈ m²` of order `order`; each monomial of degree `2..=order`
/// is present with probability `density`. Never returns zero.
pub fn random_potential(rng: &mut impl Rng, ring: Ring, n: usize, order: usize, density: f64) -> Series {
    let mut w = Series::zero(ring, n, order);
    for d in 2..=order {
        for m in monomials_of_degree(n, d) {
            if rng.gen_bool(density) {
                w.add_term(m, nonzero(rng, ring));
            }
        }
    }
    if w.is_zero() {
        let i = rng.gen_range(0..n);
        w.add_term(Mono::var(i).mul(&Mono::var(i)), ring.one());
    }
    w
}

/// Random change of variables with `f ≡ id mod m^{d+1}`; for `d = 0` the
/// linear part is a random unipotent upper-triangular matrix.
pub fn random_diffeo(rng: &mut impl Rng, ring: Ring, n: usize, order: usize, d: usize) -> FormalDiffeo {
    let comps = (0..n)
        .map(|j| {
            let mut f = Series::var(ring, n, j, order);
            if d == 0 {
                for i in j + 1..n {
                    f.add_term(Mono::var(i), small(rng, ring));
                }
            }
            for deg in (d + 1).max(2)..=order {
                for m in monomials_of_degree(n, deg) {
                    if rng.gen_bool(0.4) {
                        f.add_term(m, small(rng, ring));
                    }
                }
            }
            f
        })
        .collect();
    FormalDiffeo::new(comps).expect("components lie in m")
}

/// Random strictly unital `Δ` with `gr Δ = Id`: `Δ^1(v_J) = v_J` plus lower
/// terms of the same parity, and `Δ^k` for `2 <= k <= cap` of filtration two
/// below the top on unit-free tuples.
pub fn random_gr_identity(rng: &mut impl Rng, ring: Ring, n: usize, order: usize, cap: usize, density: f64) -> AInfMorphism {
    let mut delta = AInfMorphism::identity(ring, n, order, cap);
    let basis = all_blades(n);
    let random_below = |rng: &mut ChaCha8Rng, top: i64, parity: usize| -> Ext {
        let mut e = Ext::zero(n);
        for b in &basis {
            if (b.grade() as i64) <= top - 2 && b.grade() % 2 == parity && rng.gen_bool(density) {
                e.add_term(*b, small(rng, ring));
            }
        }
        e
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    for b in &basis {
        if b.is_empty() {
            continue;
        }
        let mut e = Ext::blade(ring, n, *b);
        e = e.add(&random_below(&mut local, b.grade() as i64, b.grade() % 2));
        delta.set(&[*b], e);
    }
    let units_free: Vec<Blade> = basis.iter().copied().filter(|b| !b.is_empty()).collect();
    for k in 2..=cap {
        for_each_tuple(&units_free, k, |t| {
            let sum: usize = t.iter().map(|b| b.grade()).sum();
            let top = sum as i64 - (k as i64 - 1);
            let e = random_below(&mut local, top, (sum + 1 + k) % 2);
            delta.set(t, e);
        });
    }
    delta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic_and_well_shaped() {
        let a = random_potential(&mut rng(7), Ring::Q, 3, 5, 0.3);
        let b = random_potential(&mut rng(7), Ring::Q, 3, 5, 0.3);
        assert_eq!(a, b);
        assert!(a.valuation().unwrap() >= 2);
        let f = random_diffeo(&mut rng(3), Ring::Fp(3), 2, 4, 2);
        assert!(f.is_identity_mod(2));
        let d = random_gr_identity(&mut rng(1), Ring::Q, 2, 4, 4, 0.5);
        let rep = d.check_shape();
        assert!(rep.passed, "{:?}", rep.failures);
        let rep = d.check_d_equivalence(
            &crate::ainfinity::AInfinity::formal(Ring::Q, 2, 4, 4),
            &crate::ainfinity::AInfinity::formal(Ring::Q, 2, 4, 4),
            4,
            0,
        );
        assert!(rep.passed, "{:?}", rep.failures);
    }
}
