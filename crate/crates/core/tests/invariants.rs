use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rsp_core::fidelity::{p_inc, FidelityParams};
use rsp_core::lattice::sample_chain;
use rsp_core::rsrg::{assign_effective_couplings, run_no_rg, run_rsrg};
use rsp_core::spinsim::{apply_h, identify_pairs, StateVector, XYHamiltonian};
use rsp_core::{AtomChain, Filling, LatticeParams};

fn chain(n_sites: usize, atoms: usize, seed: u64) -> (AtomChain, LatticeParams) {
    let params = LatticeParams::new(n_sites, 5.0, Filling::Fixed(atoms)).with_seed(seed);
    (sample_chain(&params).unwrap(), params)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rsrg_pairing_is_planar_and_complete(atoms in 2usize..40, extra in 0usize..80, seed in any::<u64>()) {
        let (c, params) = chain(atoms + extra, atoms, seed);
        let report = run_rsrg(&c, params.interaction_range).unwrap();
        prop_assert_eq!(report.unpaired.len(), atoms % 2);
        prop_assert_eq!(report.bonds.len(), atoms / 2);

        let mut seen = vec![false; atoms];
        for b in &report.bonds {
            prop_assert!(b.left < b.right);
            prop_assert!(!seen[b.left] && !seen[b.right]);
            seen[b.left] = true;
            seen[b.right] = true;
        }
        for (k, b) in report.bonds.iter().enumerate() {
            let inside = report.bonds[..k].iter().filter(|o| b.contains(o)).count();
            prop_assert_eq!(b.nesting, inside);
            for o in &report.bonds {
                let crossing = b.left < o.left && o.left < b.right && b.right < o.right;
                prop_assert!(!crossing);
            }
        }
        prop_assert!(report.bonds.windows(2).all(|w| w[1].l_m >= w[0].l_m * (1.0 - 1e-9)));
    }

    #[test]
    fn replaying_rsrg_pairs_recovers_lengths(atoms in 2usize..30, seed in any::<u64>()) {
        let (c, params) = chain(3 * atoms, atoms, seed);
        let report = run_rsrg(&c, params.interaction_range).unwrap();
        let replay = assign_effective_couplings(&report.pairs(), &c, params.interaction_range, 1.0).unwrap();
        prop_assert_eq!(replay.len(), report.bonds.len());
        for e in &replay {
            let orig = report.bonds.iter().find(|b| (b.left, b.right) == (e.bond.left, e.bond.right)).unwrap();
            prop_assert!((e.bond.l_m - orig.l_m).abs() <= 1e-9 * orig.l_m.max(1.0));
            prop_assert!((e.j_eff - (-e.bond.l_m / 5.0).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn no_rg_pairs_neighbours_only(atoms in 2usize..40, seed in any::<u64>()) {
        let (c, _) = chain(2 * atoms, atoms, seed);
        let report = run_no_rg(&c);
        let mut seen = vec![false; atoms];
        for b in &report.bonds {
            prop_assert_eq!(b.right, b.left + 1);
            prop_assert_eq!(b.nesting, 0);
            prop_assert!(!seen[b.left] && !seen[b.right]);
            seen[b.left] = true;
            seen[b.right] = true;
        }
        prop_assert_eq!(2 * report.bonds.len() + report.unpaired.len(), atoms);
        let free = &report.unpaired;
        prop_assert!(free.windows(2).all(|w| w[1] > w[0] + 1));
    }

    #[test]
    fn hamiltonian_is_hermitian(atoms in 2usize..8, seed in any::<u64>()) {
        let (c, params) = chain(4 * atoms, atoms, seed);
        let h = XYHamiltonian::interaction(&c, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = StateVector::random(atoms, &mut rng);
        let v = StateVector::random(atoms, &mut rng);
        let hv = apply_h(&h, &v).unwrap();
        let hu = apply_h(&h, &u).unwrap();
        let dot = |x: &[Complex64], y: &[Complex64]| -> Complex64 {
            x.iter().zip(y).map(|(p, q)| p.conj() * q).sum()
        };
        let a = dot(u.amplitudes(), &hv);
        let b = dot(&hu, v.amplitudes());
        prop_assert!((a - b).norm() < 1e-10 * (1.0 + a.norm()));
    }

    #[test]
    fn singlet_products_are_recognised(half in 1usize..5, perm in any::<u64>()) {
        let n = 2 * half;
        let mut order: Vec<usize> = (0..n).collect();
        let mut s = perm;
        for i in (1..n).rev() {
            order.swap(i, (s % (i as u64 + 1)) as usize);
            s /= i as u64 + 1;
        }
        let mut pairs: Vec<(usize, usize)> = order
            .chunks(2)
            .map(|p| (p[0].min(p[1]), p[0].max(p[1])))
            .collect();
        pairs.sort_unstable();
        let v = StateVector::singlet_product(n, &pairs).unwrap();
        prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        let found = identify_pairs(&v);
        prop_assert!(found.is_complete());
        prop_assert_eq!(found.sorted_pairs(), pairs);
    }

    #[test]
    fn incoherent_loss_falls_with_sweep_rate(a in 1e-6f64..10.0, b in 1e-6f64..10.0) {
        let params = FidelityParams::default();
        let (lo, hi) = (a.min(b), a.max(b));
        let (p_lo, p_hi) = (p_inc(lo, &params).unwrap(), p_inc(hi, &params).unwrap());
        prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
        prop_assert!(p_hi <= p_lo);
    }
}
