use num_complex::Complex64;

use super::*;
use crate::lattice::Filling;
use crate::spinsim::{apply_h, rdm2, singlet_fraction};

fn setup(pos: &[usize]) -> (AtomChain, LatticeParams) {
    let chain = AtomChain::new(pos.to_vec()).unwrap();
    let lattice = LatticeParams::new(pos[pos.len() - 1] + 1, 5.0, Filling::Fixed(pos.len()));
    (chain, lattice)
}

#[test]
fn grid_layout() {
    let g = default_omega_grid(1.0);
    assert_eq!(g.len(), 201);
    assert!((g[0] - 1e-4).abs() < 1e-18 && (g[200] - 10.0).abs() < 1e-12);
    assert!((g[40] - 1e-3).abs() < 1e-15);
    assert!(omega_grid(1.0, 0.5, 4).is_err());
}

#[test]
fn params_are_validated() {
    let p = SweepParams::default();
    assert!(p.with_omega(0.0).validate().is_err());
    assert!(SweepParams {
        phi0: 7.0,
        ..p.clone()
    }
    .validate()
    .is_err());
    assert!((p.with_omega(0.5).duration() - std::f64::consts::PI).abs() < 1e-15);
}

#[test]
fn schedule_end_points() {
    let (chain, lattice) = setup(&[0, 2, 5, 9]);
    let p = SweepParams::default();
    let sys = SweepSystem::new(&chain, &lattice, &p).unwrap();
    let v = sys.initial_state().amplitudes().to_vec();
    let mut out = vec![Complex64::default(); v.len()];
    sys.apply_at(0.3, 0.0, &v, &mut out);
    let e: f64 = crate::spinsim::dot(&v, &out).re;
    assert!((e + 4.0).abs() < 1e-10);
    let resid: f64 = out
        .iter()
        .zip(&v)
        .map(|(o, x)| (o + 4.0 * x).norm())
        .fold(0.0, f64::max);
    assert!(resid < 1e-10);

    let t_end = FRAC_PI_2 / 0.3;
    sys.apply_at(0.3, t_end, &v, &mut out);
    let h_int = XYHamiltonian::interaction(&chain, &lattice).unwrap();
    let expect = apply_h(&h_int, sys.initial_state()).unwrap();
    let diff: f64 = out
        .iter()
        .zip(&expect)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(diff < 1e-15);
}

#[test]
fn sudden_limit_keeps_initial_state() {
    let (chain, lattice) = setup(&[0, 3, 4, 8]);
    let p = SweepParams::default().with_omega(200.0);
    let out = evolve_with_stats(&chain, &lattice, &p).unwrap();
    let sys = SweepSystem::new(&chain, &lattice, &p).unwrap();
    assert!(out.state.overlap(sys.initial_state()).unwrap() >= 0.99);
}

#[test]
fn slow_two_atom_sweep_forms_singlet() {
    let (chain, lattice) = setup(&[0, 2]);
    let p = SweepParams::default().with_omega(1e-3);
    let out = evolve_with_stats(&chain, &lattice, &p).unwrap();
    let f = singlet_fraction(&rdm2(&out.state, 0, 1).unwrap());
    assert!(f >= 0.99, "{f}");
    assert!(out.norm_drift < 1e-8, "{}", out.norm_drift);
}

#[test]
fn norm_drift_and_reference_convergence() {
    let (chain, lattice) = setup(&[0, 3, 5, 10, 12]);
    let p = SweepParams::default().with_omega(0.05);
    let a = evolve_with_stats(&chain, &lattice, &p).unwrap();
    assert!(a.norm_drift < 1e-8, "{}", a.norm_drift);
    let reference = SweepParams {
        tolerance: p.tolerance / 100.0,
        ..p.clone()
    };
    let b = evolve_with_stats(&chain, &lattice, &reference).unwrap();
    let infidelity = 1.0 - a.state.overlap(&b.state).unwrap();
    assert!(infidelity <= 10.0 * p.tolerance, "{infidelity}");
    assert!(b.steps > a.steps);
}

fn rec(j: f64, w: Option<f64>) -> SweepRecord {
    SweepRecord {
        bond: (0, 1),
        j_eff: j,
        omega_break: w,
        censored: if w.is_some() {
            Censoring::None
        } else {
            Censoring::NeverBroke
        },
    }
}

#[test]
fn exact_power_law_fit() {
    let recs: Vec<SweepRecord> = (0..12)
        .map(|k| {
            let j = 10f64.powf(-0.25 * k as f64);
            rec(j, Some(0.7 * j))
        })
        .chain([rec(1e-6, None)])
        .collect();
    let fit = lz_fit(&recs, &FitRequirements::default()).unwrap();
    assert!((fit.slope - 1.0).abs() < 1e-12);
    assert!((fit.intercept - 0.7f64.ln()).abs() < 1e-12);
    assert!(fit.spread < 1e-12);
    assert_eq!(fit.count, 12);
}

#[test]
fn fit_range_is_enforced() {
    let recs: Vec<SweepRecord> = (0..12)
        .map(|k| rec(1.0 - 0.01 * k as f64, Some(0.5)))
        .collect();
    assert!(matches!(
        lz_fit(&recs, &FitRequirements::default()),
        Err(Error::FitRange(_))
    ));
    let few: Vec<SweepRecord> = (0..5)
        .map(|k| rec(10f64.powi(-k), Some(10f64.powi(-k))))
        .collect();
    assert!(lz_fit(&few, &FitRequirements::default()).is_err());
    let relaxed = FitRequirements {
        min_records: 5,
        min_decades: 0.5,
    };
    assert!(lz_fit(&few, &relaxed).is_ok());
}

#[test]
fn scan_two_atoms() {
    let (chain, lattice) = setup(&[0, 2]);
    let grid = omega_grid(1e-2, 10.0, 10).unwrap();
    let rep = bond_break_scan(
        &chain,
        &lattice,
        &grid,
        &SweepParams::default(),
        &ScanOptions::default(),
    )
    .unwrap();
    assert_eq!(rep.records.len(), 1);
    let r = &rep.records[0];
    assert_eq!(r.bond, (0, 1));
    assert!((r.j_eff - (-0.4f64).exp()).abs() < 1e-12);
    let w = r.omega_break.expect("pair breaks inside the grid");
    assert!(w > 0.05 && w < 5.0);
    assert!(rep.baseline_overlap >= 0.99);
    // stops right after the break
    assert_eq!(*rep.omegas.last().unwrap(), w);
}

#[test]
fn baseline_is_required() {
    let (chain, lattice) = setup(&[0, 2]);
    let grid = omega_grid(1.0, 10.0, 5).unwrap();
    assert!(matches!(
        bond_break_scan(
            &chain,
            &lattice,
            &grid,
            &SweepParams::default(),
            &ScanOptions::default()
        ),
        Err(Error::Baseline { .. })
    ));
    assert!(matches!(
        bond_break_scan(
            &chain,
            &lattice,
            &[],
            &SweepParams::default(),
            &ScanOptions::default()
        ),
        Err(Error::EmptyGrid)
    ));
}

#[test]
fn records_csv() {
    let mut buf = Vec::new();
    write_records_csv(&mut buf, &[(7, rec(0.5, Some(0.2))), (7, rec(0.01, None))]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "seed,bond_i,bond_j,j_eff,omega_break,censored");
    assert_eq!(lines[1], "7,0,1,0.5,0.2,none");
    assert_eq!(lines[2], "7,0,1,0.01,,never_broke");
}
