use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sobi::autocovariance::{autocov_set, sample_autocov, AutocovSet};
use sobi::joint_diag::{
    amuse, separate, sobi_deflation, sobi_symmetric_fixedpoint, sobi_symmetric_jacobi, Method,
};
use sobi::metrics::{amari, mdi};
use sobi::presets::Preset;
use sobi::signal_model::{expand_to_ma, mix, simulate_sources, MixingModel, SourceSpec, TimeSeriesMatrix};

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn matrix(p: usize, lo: f64, hi: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(lo..hi, p * p).prop_map(move |v| DMatrix::from_vec(p, p, v))
}

fn square(max_p: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (2..=max_p).prop_flat_map(|p| matrix(p, -1.0, 1.0))
}

fn well_conditioned(m: &DMatrix<f64>) -> bool {
    let s = m.clone().svd(false, false).singular_values;
    s.min() > 1e-3 * s.max()
}

fn series(p: usize, len: usize) -> impl Strategy<Value = TimeSeriesMatrix> {
    prop::collection::vec(-3.0..3.0f64, p * len)
        .prop_map(move |v| TimeSeriesMatrix::new(DMatrix::from_vec(p, len, v)).unwrap())
}

/// Brute-force minimum distance index: every pairing of gain rows with unit
/// targets, each with its best scale `c_i = g_ir / ||g_i||^2`.
fn mdi_brute_force(g: &DMatrix<f64>) -> f64 {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }
    let p = g.nrows();
    let best = perms(p)
        .into_iter()
        .map(|perm| {
            (0..p)
                .map(|i| {
                    let row = g.row(i);
                    let c = row[perm[i]] / row.norm_squared();
                    let mut e = DVector::zeros(p);
                    e[perm[i]] = 1.0;
                    (row.transpose() * c - e).norm_squared()
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    (best / (p as f64 - 1.0)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lagged_autocovariance_is_symmetric_and_equivariant(
        x in series(3, 40),
        a in matrix(3, -2.0, 2.0),
        k in 0usize..6,
    ) {
        let s = sample_autocov(&x, k, false).unwrap();
        prop_assert_eq!(&s, &s.transpose());
        let ax = x.transform(&a).unwrap();
        let lhs = sample_autocov(&ax, k, false).unwrap();
        let rhs = &a * &s * a.transpose();
        prop_assert!(max_abs(&(lhs - &rhs)) < 1e-10 * (1.0 + max_abs(&rhs)));
    }

    #[test]
    fn uncentered_zero_lag_is_the_gram_matrix(x in series(3, 30)) {
        let v = x.values();
        let t = v.ncols();
        let mut gram = DMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for c in 0..t {
                    acc += v[(i, c)] * v[(j, c)];
                }
                gram[(i, j)] = acc / t as f64;
            }
        }
        prop_assert_eq!(sample_autocov(&x, 0, false).unwrap(), gram);
    }

    #[test]
    fn mixing_composes(z in series(3, 20), o1 in matrix(3, -1.0, 1.0), o2 in matrix(3, -1.0, 1.0)) {
        prop_assume!(well_conditioned(&o1) && well_conditioned(&o2));
        let m1 = MixingModel::new(o1.clone(), None).unwrap();
        let m2 = MixingModel::new(o2.clone(), None).unwrap();
        let m12 = MixingModel::new(&o1 * &o2, None).unwrap();
        let once = mix(&z, &m12).unwrap();
        let twice = mix(&mix(&z, &m2).unwrap(), &m1).unwrap();
        prop_assert!(max_abs(&(once.values() - twice.values())) < 1e-12 * (1.0 + max_abs(once.values())));
    }

    #[test]
    fn mdi_matches_brute_force(g in square(5)) {
        prop_assume!(well_conditioned(&g));
        let d = mdi(&g).unwrap();
        prop_assert!((d - mdi_brute_force(&g)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn mdi_ignores_scaled_permutations(
        g in square(5),
        seed in any::<u64>(),
        scales in prop::collection::vec(0.1..10.0f64, 5),
    ) {
        prop_assume!(well_conditioned(&g));
        let p = g.nrows();
        let mut order: Vec<usize> = (0..p).collect();
        let mut s = seed;
        for i in (1..p).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let c = DMatrix::from_fn(p, p, |r, col| {
            if order[r] == col {
                if (seed >> r) & 1 == 1 { -scales[r] } else { scales[r] }
            } else {
                0.0
            }
        });
        prop_assert!((mdi(&(&c * &g)).unwrap() - mdi(&g).unwrap()).abs() < 1e-12);
        prop_assert!(mdi(&c).unwrap() == 0.0);
        prop_assert!(amari(&c).unwrap().abs() < 1e-12);
    }

    #[test]
    fn amari_is_non_negative(g in square(5)) {
        prop_assume!(well_conditioned(&g));
        prop_assert!(amari(&g).unwrap() >= -1e-12);
    }

    #[test]
    fn ar1_psi_ratio(phi in -0.95..0.95f64) {
        prop_assume!(phi.abs() > 1e-3);
        let e = expand_to_ma(&SourceSpec::ar(vec![phi]), 1e-12, 100_000).unwrap();
        for w in e.psi.windows(2) {
            prop_assert!((w[1] / w[0] - phi).abs() < 1e-12);
        }
    }
}

fn exact_set(o: &DMatrix<f64>, diags: &[Vec<f64>]) -> AutocovSet {
    let p = o.nrows();
    let lagged = diags
        .iter()
        .map(|d| o * DMatrix::from_diagonal(&DVector::from_column_slice(d)) * o.transpose())
        .collect();
    AutocovSet::from_matrices(DMatrix::identity(p, p), (1..=diags.len()).collect(), lagged).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_joint_diagonalizers_are_recovered(
        a in matrix(4, -1.0, 1.0),
        d in prop::collection::vec(prop::collection::vec(-0.9..0.9f64, 4), 1..4),
    ) {
        prop_assume!(well_conditioned(&a));
        let o = a.qr().q();
        // distinct criteria and distinct lag-1 eigenvalues
        let crit: Vec<f64> = (0..4).map(|j| d.iter().map(|v| v[j] * v[j]).sum()).collect();
        for i in 0..4 {
            for j in 0..i {
                prop_assume!((crit[i] - crit[j]).abs() > 1e-2);
                prop_assume!((d[0][i] - d[0][j]).abs() > 1e-2);
            }
        }
        let set = exact_set(&o, &d);
        for res in [
            amuse(&set, 1).unwrap(),
            sobi_symmetric_fixedpoint(&set, 1e-12, 1000).unwrap(),
            sobi_symmetric_jacobi(&set, 1e-14, 100).unwrap(),
            sobi_deflation(&set, 1e-12, 1000, 5, 7).unwrap(),
        ] {
            prop_assert!(mdi(&(&res.u * &o)).unwrap() < 1e-8, "{:?}", res.method);
        }
    }
}

fn simulated(preset: Preset, len: usize, seed: u64) -> TimeSeriesMatrix {
    simulate_sources(&preset.specs(), len, seed, 2000).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn estimates_satisfy_constraints_and_equivariance(
        a in matrix(3, -2.0, 2.0),
        which in 0usize..4,
        seed in any::<u64>(),
    ) {
        prop_assume!(well_conditioned(&a));
        let preset = Preset::ALL[which];
        let x = simulated(preset, 2000, seed);
        let ax = x.transform(&a).unwrap();
        let lags: Vec<usize> = (1..=10).collect();
        let set = autocov_set(&x, &lags, true).unwrap();
        let aset = autocov_set(&ax, &lags, true).unwrap();
        for method in Method::ALL {
            let r = separate(&set, method, 3).unwrap();
            let ra = separate(&aset, method, 3).unwrap();
            prop_assert!(max_abs(&(&r.u * r.u.transpose() - DMatrix::identity(3, 3))) < 1e-8);
            let white = &r.gamma * &set.s0 * r.gamma.transpose();
            prop_assert!(max_abs(&(white - DMatrix::identity(3, 3))) < 1e-8);
            let inv = r.gamma.clone().try_inverse().unwrap();
            let g = &ra.gamma * &a * inv;
            prop_assert!(mdi(&g).unwrap() < 1e-6, "{} {}", method, mdi(&g).unwrap());
            let again = separate(&set, method, 3).unwrap();
            prop_assert_eq!(&again.gamma, &r.gamma);
        }
    }
}
