use gdalab::datasets::{make_rotation_path, rotate_domain, Generator};
use gdalab::transport::domain_distance;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[test]
fn identical_rotation_domains_converge_as_n_grows() {
    let gen = Generator::TwoMoons { noise_sigma: 0.1 };
    let medians: Vec<f64> = [50, 200, 800]
        .iter()
        .map(|&n| {
            median(
                (0..7)
                    .map(|seed| {
                        let path = make_rotation_path(&gen, 30.0, 30.0, 2, n, seed).unwrap();
                        domain_distance(path.domain(0), path.domain(2), 1.0).unwrap()
                    })
                    .collect(),
            )
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

#[test]
fn rotation_preserves_norms_and_generators_are_pure() {
    let gen = Generator::TwoMoons { noise_sigma: 0.2 };
    let a = make_rotation_path(&gen, 0.0, 90.0, 3, 40, 11).unwrap();
    let b = make_rotation_path(&gen, 0.0, 90.0, 3, 40, 11).unwrap();
    assert_eq!(a, b);
    let d = a.domain(1);
    let r = rotate_domain(d, 73.0).unwrap();
    for (u, v) in d.evaluation_samples().iter().zip(r.evaluation_samples()) {
        let n = |x: &[f64]| x.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((n(&u.x) - n(&v.x)).abs() <= 1e-12);
        assert_eq!(u.y, v.y);
    }
}
