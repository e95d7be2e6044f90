use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sparse_mkr::dictionary::{assemble_design, assemble_gram, CenterGrid, TrainingSet};
use sparse_mkr::kernels::{eval_kernel, fourier_greens_table, KernelSpec};

fn admissible_spec() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.3f64..1.99, 0.2f64..3.0, 1usize..=2).prop_map(|(a, g, d)| KernelSpec::exponential(a, g, d).unwrap()),
        (prop::sample::select(vec![2.0, 4.0, 6.0]), 0.3f64..3.0)
            .prop_map(|(s, g)| KernelSpec::bessel(s, g, 1).unwrap()),
        (prop::sample::select(vec![3.0, 5.0]), 0.3f64..3.0).prop_map(|(s, g)| KernelSpec::bessel(s, g, 2).unwrap()),
    ]
}

fn points(dim: usize, count: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..4.0, dim * count)
}

fn sorted_distinct_sites(raw: Vec<f64>) -> Vec<f64> {
    let mut v = raw;
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernels_are_symmetric(spec in admissible_spec(), raw in points(2, 8)) {
        let d = spec.dim;
        for pair in raw.chunks_exact(2 * d).take(4) {
            let (x, y) = pair.split_at(d);
            prop_assert_eq!(eval_kernel(&spec, x, y).unwrap(), eval_kernel(&spec, y, x).unwrap());
        }
    }

    #[test]
    fn kernels_are_shift_invariant(spec in admissible_spec(), raw in points(2, 3)) {
        let d = spec.dim;
        let x = &raw[0..d];
        let y = &raw[d..2 * d];
        let t = &raw[2 * d..3 * d];
        let xs: Vec<f64> = x.iter().zip(t).map(|(a, b)| a + b).collect();
        let ys: Vec<f64> = y.iter().zip(t).map(|(a, b)| a + b).collect();
        let base = eval_kernel(&spec, x, y).unwrap();
        let shifted = eval_kernel(&spec, &xs, &ys).unwrap();
        prop_assert!((base - shifted).abs() <= 1e-12, "{} vs {}", base, shifted);
    }

    #[test]
    fn gram_is_psd(spec in admissible_spec(), raw in points(2, 20)) {
        let d = spec.dim;
        let mut rows: Vec<Vec<f64>> = raw.chunks_exact(d).map(|c| c.to_vec()).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(u, v)| (u - v).abs() < 1e-9));
        let m = rows.len();
        let g = DMatrix::from_fn(m, m, |i, j| eval_kernel(&spec, &rows[i], &rows[j]).unwrap());
        let min = g.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min >= -1e-8 * g.trace(), "min eigenvalue {}", min);
    }

    #[test]
    fn identity_transform_is_exact(spec in admissible_spec(), raw in points(2, 2)) {
        let d = spec.dim;
        let wrapped = KernelSpec::transformed(spec.clone(), &DMatrix::identity(d, d)).unwrap();
        let (x, y) = (&raw[0..d], &raw[d..2 * d]);
        prop_assert_eq!(eval_kernel(&wrapped, x, y).unwrap(), eval_kernel(&spec, x, y).unwrap());
    }

    #[test]
    fn design_on_sites_reproduces_gram(spec in admissible_spec(), raw in points(1, 12)) {
        let spec = KernelSpec { dim: 1, ..spec };
        prop_assume!(spec.validate().is_ok());
        let sites = sorted_distinct_sites(raw);
        let targets = vec![0.0; sites.len()];
        let train = TrainingSet::from_1d(&sites, &targets).unwrap();
        let kernel = spec.compile().unwrap();
        let grid = CenterGrid::from_centers(1, sites.clone(), 0.1, vec![(-4.0, 4.0)]).unwrap();
        let dict = assemble_design(&[kernel.clone()], &[grid.clone()], &train).unwrap();
        let gram = assemble_gram(&kernel, &train).unwrap();
        prop_assert_eq!(dict.design(), &gram);
        prop_assert_eq!(&gram, &gram.transpose());
        // deterministic assembly
        let again = assemble_design(&[kernel.clone()], &[grid], &train).unwrap();
        prop_assert_eq!(dict.design(), again.design());
        prop_assert_eq!(&assemble_gram(&kernel, &train).unwrap(), &gram);
    }
}

#[test]
fn table_matches_closed_forms_near_origin() {
    let specs = [
        KernelSpec::exponential(1.0, 1.0, 1).unwrap(),
        KernelSpec::exponential(1.0, 2.0, 1).unwrap(),
        KernelSpec::gaussian(1.0, 1).unwrap(),
        KernelSpec::bessel(2.0, 1.0, 1).unwrap(),
        KernelSpec::bessel(4.0, 0.7, 1).unwrap(),
    ];
    for spec in &specs {
        let table = fourier_greens_table(spec, 25.0, 1 << 14).unwrap();
        let offsets = table.offset_vectors();
        let mut worst: f64 = 0.0;
        for (r, v) in offsets.iter().zip(table.values.iter()) {
            if r[0].abs() <= 5.0 {
                let exact = eval_kernel(spec, &[r[0]], &[0.0]).unwrap();
                worst = worst.max((v - exact).abs());
            }
        }
        assert!(worst < 1e-6, "{spec:?}: {worst}");
    }
}

#[test]
fn combined_design_columns_follow_blocks() {
    let sites = [0.0, 0.5, 1.0, 1.5];
    let train = TrainingSet::from_1d(&sites, &[1.0, 0.0, -1.0, 0.5]).unwrap();
    let a = KernelSpec::exponential(1.0, 1.0, 1).unwrap().compile().unwrap();
    let b = KernelSpec::bessel(2.0, 2.0, 1).unwrap().compile().unwrap();
    let ga = CenterGrid::from_centers(1, vec![0.0, 1.0], 1.0, vec![(0.0, 1.0)]).unwrap();
    let gb = CenterGrid::from_centers(1, vec![0.25, 0.75, 1.25], 0.5, vec![(0.0, 1.5)]).unwrap();
    let dict = assemble_design(&[a.clone(), b.clone()], &[ga, gb], &train).unwrap();
    assert_eq!(dict.n_columns(), 5);
    for j in 0..5 {
        let (n, _) = dict.column_index(j);
        let k = if n == 0 { &a } else { &b };
        for m in 0..4 {
            assert_eq!(dict.design()[(m, j)], k.eval(&[sites[m]], dict.center_of(j)).unwrap());
        }
    }
    let coeffs = DVector::from_vec(vec![1.0, 0.0, 0.5, 0.0, -2.0]);
    let fitted = dict.evaluate(&coeffs, &sites.iter().map(|&s| vec![s]).collect::<Vec<_>>()).unwrap();
    let direct = dict.design() * &coeffs;
    for m in 0..4 {
        assert!((fitted[m] - direct[m]).abs() < 1e-15);
    }
}
