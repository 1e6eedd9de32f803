use std::f64::consts::E;

use nalgebra::DVector;
use rhm_core::hamiltonian::*;
use rhm_core::linalg::Mat;
use rhm_core::manifolds::{Manifold, ProductManifold};
use rhm_core::problems::*;
use rhm_core::rng::{gaussian_matrix, seeded};
use rhm_core::{Error, HamiltonianOracle, HvpMode, ProductPoint, ProductTangent, Result};

/// Flat `ℝⁿ` as a test geometry.
#[derive(Debug)]
struct Euclidean(usize);

impl Manifold for Euclidean {
    fn name(&self) -> &'static str {
        "euclidean"
    }
    fn dim(&self) -> usize {
        self.0
    }
    fn shape(&self) -> (usize, usize) {
        (self.0, 1)
    }
    fn inner(&self, _p: &Mat, u: &Mat, v: &Mat) -> f64 {
        u.dot(v)
    }
    fn exp(&self, p: &Mat, u: &Mat) -> Result<Mat> {
        Ok(p + u)
    }
    fn retract(&self, p: &Mat, u: &Mat) -> Result<Mat> {
        Ok(p + u)
    }
    fn has_log(&self) -> bool {
        true
    }
    fn log(&self, p: &Mat, q: &Mat) -> Result<Mat> {
        Ok(q - p)
    }
    fn transport(&self, _p: &Mat, _q: &Mat, u: &Mat) -> Result<Mat> {
        Ok(u.clone())
    }
    fn project_tangent(&self, _p: &Mat, z: &Mat) -> Result<Mat> {
        Ok(z.clone())
    }
    fn egrad_to_rgrad(&self, _p: &Mat, g: &Mat) -> Result<Mat> {
        Ok(g.clone())
    }
    fn random_point(&self, seed: u64) -> Mat {
        gaussian_matrix(self.0, 1, &mut seeded(seed))
    }
    fn random_tangent(&self, _p: &Mat, seed: u64) -> Mat {
        let u = gaussian_matrix(self.0, 1, &mut seeded(seed));
        &u / u.norm()
    }
    fn feasibility_residual(&self, _p: &Mat) -> f64 {
        0.0
    }
    fn tangency_residual(&self, _p: &Mat, _u: &Mat) -> f64 {
        0.0
    }
}

/// `f(x, y) = ½xᵀAx + xᵀBy − ½yᵀCy`, Hessian `[[A, B], [Bᵀ, −C]]`.
struct Quadratic {
    a: Mat,
    b: Mat,
    c: Mat,
    geometry: ProductManifold,
}

impl Quadratic {
    fn new(n: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let g = gaussian_matrix(n, n, &mut rng);
        let h = gaussian_matrix(n, n, &mut rng);
        Self {
            a: &g * g.transpose(),
            b: gaussian_matrix(n, n, &mut rng),
            c: &h * h.transpose(),
            geometry: ProductManifold::pair(Euclidean(n), Euclidean(n)),
        }
    }

    fn hess(&self, u: &ProductTangent) -> ProductTangent {
        ProductTangent::pair(
            &self.a * u.x() + &self.b * u.y(),
            self.b.transpose() * u.x() - &self.c * u.y(),
        )
    }
}

impl MinMaxProblem for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }
    fn geometry(&self) -> &ProductManifold {
        &self.geometry
    }
    fn value(&self, p: &ProductPoint) -> Result<f64> {
        let (x, y) = (p.x(), p.y());
        Ok(0.5 * x.dot(&(&self.a * x)) + x.dot(&(&self.b * y)) - 0.5 * y.dot(&(&self.c * y)))
    }
    fn rgrad(&self, p: &ProductPoint) -> Result<ProductTangent> {
        let (x, y) = (p.x(), p.y());
        Ok(ProductTangent::pair(
            &self.a * x + &self.b * y,
            self.b.transpose() * x - &self.c * y,
        ))
    }
}

fn diag(v: &[f64]) -> Mat {
    Mat::from_diagonal(&DVector::from_vec(v.to_vec()))
}

fn rel_dist(a: &ProductTangent, b: &ProductTangent) -> f64 {
    (a - b).ambient_norm() / b.ambient_norm().max(1e-300)
}

fn qb(d: usize, cq: f64, cl: f64) -> QuadBilinear {
    QuadBilinear::new(QuadBilinearParams::new(d, cq, cl).unwrap())
}

fn all_problems() -> Vec<Box<dyn MinMaxProblem>> {
    let rg = RgpcaData::new(random_spd_dataset(3, 4, 0.2, 4.5, 1).unwrap(), 0.5).unwrap();
    let srwd = fragmented_hypercube(8, 4, 2, 2).unwrap().with_subspace(2, 0.5).unwrap();
    vec![
        Box::new(qb(3, 1.0, 1.0)),
        Box::new(TraceLog::random(3, 0.5, 2.0, 3).unwrap()),
        Box::new(Rgpca::new(rg)),
        Box::new(Srwd::new(srwd)),
    ]
}

#[test]
fn hamiltonian_value_examples() {
    let prob = qb(2, 1.0, 0.0);
    let oracle = HamiltonianOracle::new(&prob);
    let i = Mat::identity(2, 2);
    assert_eq!(hamiltonian_value(&oracle, &ProductPoint::pair(i.clone(), i.clone())).unwrap(), 0.0);
    let h = hamiltonian_value(&oracle, &ProductPoint::pair(diag(&[E, 1.0]), i)).unwrap();
    assert!((h - 4.0).abs() < 1e-12);

    let p = prob.geometry().random_point(21);
    let g = prob.rgrad(&p).unwrap();
    let geo = prob.geometry();
    let by_factor: f64 = (0..2).map(|i| geo.factor(i).norm(&p.parts[i], &g.parts[i]).powi(2)).sum();
    assert!((hamiltonian_value(&oracle, &p).unwrap() - 0.5 * by_factor).abs() <= 1e-12 * by_factor);
}

#[test]
fn fd_hvp_of_zero_direction_is_zero() {
    let prob = qb(3, 1.0, 1.0);
    let oracle = HamiltonianOracle::with_mode(&prob, HvpMode::FiniteDifference).unwrap();
    let p = prob.geometry().random_point(1);
    let z = prob.geometry().zero_tangent(&p);
    assert_eq!(fd_hvp(&oracle, &p, &z).unwrap().ambient_norm(), 0.0);
}

#[test]
fn fd_hvp_matches_qb_closed_form() {
    let prob = qb(4, 0.6, 1.2);
    let oracle = HamiltonianOracle::with_mode(&prob, HvpMode::FiniteDifference).unwrap();
    let p = prob.geometry().random_point(22);
    let g = prob.rgrad(&p).unwrap();
    let (hx, hy) = qb_hamiltonian_grad_closed_form(prob.params(), p.x(), p.y()).unwrap();
    let closed = ProductTangent::pair(hx, hy);
    assert!(rel_dist(&fd_hvp(&oracle, &p, &g).unwrap(), &closed) <= 1e-5);
}

#[test]
fn fd_hvp_is_exact_on_a_euclidean_quadratic() {
    let prob = Quadratic::new(4, 5);
    let oracle = HamiltonianOracle::new(&prob);
    assert_eq!(oracle.mode(), HvpMode::FiniteDifference);
    for seed in 0..5 {
        let p = prob.geometry().random_point(seed);
        let u = prob.geometry().random_tangent(&p, seed + 100).scale(3.0);
        let fd = fd_hvp(&oracle, &p, &u).unwrap();
        assert!(rel_dist(&fd, &prob.hess(&u)) <= 1e-9);
    }
}

#[test]
fn analytic_and_fd_hamiltonian_gradients_agree_with_closed_form() {
    let prob = qb(5, 1.0, 2.0);
    let analytic = HamiltonianOracle::new(&prob);
    assert_eq!(analytic.mode(), HvpMode::Analytic);
    let fd = HamiltonianOracle::with_mode(&prob, HvpMode::FiniteDifference).unwrap();
    for seed in 0..5 {
        let p = prob.geometry().random_point(seed + 14);
        let (hx, hy) = qb_hamiltonian_grad_closed_form(prob.params(), p.x(), p.y()).unwrap();
        let closed = ProductTangent::pair(hx, hy);
        assert!(rel_dist(&hamiltonian_grad(&analytic, &p).unwrap(), &closed) <= 1e-12);
        assert!(rel_dist(&hamiltonian_grad(&fd, &p).unwrap(), &closed) <= 1e-5);
    }
}

#[test]
fn analytic_mode_requires_an_analytic_hessian() {
    let prob = TraceLog::random(2, 0.5, 2.0, 0).unwrap();
    assert!(matches!(
        HamiltonianOracle::with_mode(&prob, HvpMode::Analytic),
        Err(Error::AnalyticHvpUnavailable)
    ));
}

#[test]
fn hamiltonian_gradient_vanishes_at_saddles() {
    let prob = qb(3, 1.0, 1.0);
    let i = Mat::identity(3, 3);
    let p = ProductPoint::pair(diag(&[2.0, 0.5, 1.0]), i);
    for mode in [HvpMode::Analytic, HvpMode::FiniteDifference] {
        let oracle = HamiltonianOracle::with_mode(&prob, mode).unwrap();
        assert!(hamiltonian_grad(&oracle, &p).unwrap().ambient_norm() < 1e-12);
    }
}

/// `⟨grad ℋ, v⟩` against a Richardson-extrapolated one-sided difference of ℋ
/// along the finite-difference curve.
fn directional_error(prob: &dyn MinMaxProblem, seed: u64) -> f64 {
    let oracle = HamiltonianOracle::new(prob);
    let geo = prob.geometry();
    let p = prob.initial_point(seed);
    let v = geo.random_tangent(&p, seed + 1);
    let hg = hamiltonian_grad(&oracle, &p).unwrap();
    let h0 = hamiltonian_value(&oracle, &p).unwrap();
    let fd = |t: f64| (hamiltonian_value(&oracle, &geo.fd_curve(&p, &v.scale(t)).unwrap()).unwrap() - h0) / t;
    let (t1, t2) = (1e-3, 1e-4);
    let richardson = (t1 * fd(t2) - t2 * fd(t1)) / (t1 - t2);
    let exact = geo.inner(&p, &hg, &v);
    (exact - richardson).abs() / exact.abs().max(1e-12)
}

#[test]
fn hamiltonian_gradient_matches_directional_derivatives() {
    for prob in all_problems() {
        let err = directional_error(prob.as_ref(), 23);
        assert!(err <= 1e-3, "{}: {err:e}", prob.name());
    }
}

#[test]
fn fd_hessian_is_symmetric_on_every_problem() {
    for prob in all_problems() {
        let oracle = HamiltonianOracle::with_mode(prob.as_ref(), HvpMode::FiniteDifference).unwrap();
        let geo = prob.geometry();
        for k in 0..5 {
            let p = prob.initial_point(k);
            let u = geo.random_tangent(&p, 10 * k + 1);
            let v = geo.random_tangent(&p, 10 * k + 2);
            let hu = fd_hvp(&oracle, &p, &u).unwrap();
            let hv = fd_hvp(&oracle, &p, &v).unwrap();
            let gap = (geo.inner(&p, &hu, &v) - geo.inner(&p, &u, &hv)).abs();
            let scale = geo.norm(&p, &u) * geo.norm(&p, &v);
            assert!(gap <= 2e-4 * scale, "{} seed {k}: {gap:e}", prob.name());
        }
    }
}

#[test]
fn hamiltonian_gradient_is_tangent_and_a_descent_direction() {
    for prob in all_problems() {
        let oracle = HamiltonianOracle::new(prob.as_ref());
        let geo = prob.geometry();
        let p = prob.initial_point(4);
        let hg = hamiltonian_grad(&oracle, &p).unwrap();
        let n = geo.norm(&p, &hg);
        let projected = geo.project_tangent(&p, &hg).unwrap();
        assert!((&projected - &hg).ambient_norm() <= 1e-8 * hg.ambient_norm(), "{}", prob.name());
        let t = 1e-6 / n;
        let q = geo.step(&p, &hg.scale(-t), false).unwrap();
        let (h0, h1) = (hamiltonian_value(&oracle, &p).unwrap(), hamiltonian_value(&oracle, &q).unwrap());
        assert!(h1 < h0, "{}: {h1} !< {h0}", prob.name());
        assert!(h0 >= 0.0);
    }
}

#[test]
fn minmax_gradient_identities() {
    let prob = qb(4, 0.0, 1.0);
    let oracle = HamiltonianOracle::new(&prob);
    let geo = prob.geometry();
    for seed in 0..10 {
        let p = geo.random_point(seed);
        let v = minmax_gradient(&prob, &p).unwrap();
        let h = hamiltonian_value(&oracle, &p).unwrap();
        assert!((geo.inner(&p, &v, &v) - 2.0 * h).abs() <= 1e-12 * h);
        let hg = hamiltonian_grad(&oracle, &p).unwrap();
        let cross = geo.inner(&p, &v, &hg).abs();
        assert!(cross <= 1e-10 * geo.norm(&p, &v) * geo.norm(&p, &hg));
    }
    let i = Mat::identity(4, 4);
    let saddle = ProductPoint::pair(i.clone(), i);
    assert_eq!(minmax_gradient(&prob, &saddle).unwrap().ambient_norm(), 0.0);
}

#[test]
fn minmax_gradient_flips_the_max_block() {
    let prob = qb(3, 1.0, 1.0);
    let p = prob.geometry().random_point(3);
    let g = prob.rgrad(&p).unwrap();
    let v = minmax_gradient(&prob, &p).unwrap();
    assert_eq!(v.x(), g.x());
    assert_eq!(v.y(), &(-g.y()));
}

fn finite_sum(n: usize, seed: u64) -> QbFiniteSum {
    QbFiniteSum::new(QuadBilinearParams::new(3, 1.0, 2.0).unwrap(), n, 0.3, seed).unwrap()
}

#[test]
fn stochastic_gradient_with_full_batches_is_exact() {
    let fs = finite_sum(4, 1);
    let oracle = HamiltonianOracle::new(&fs);
    let p = fs.geometry().random_point(2);
    let all = [0, 1, 2, 3];
    let full = hamiltonian_grad(&oracle, &p).unwrap();
    let est = stochastic_hamiltonian_grad(&oracle, &p, &all, &all).unwrap();
    assert!(rel_dist(&est, &full) <= 1e-10);
}

#[test]
fn stochastic_gradient_is_unbiased_over_all_pairs() {
    let fs = finite_sum(4, 3);
    for mode in [HvpMode::Analytic, HvpMode::FiniteDifference] {
        let oracle = HamiltonianOracle::with_mode(&fs, mode).unwrap();
        let p = fs.geometry().random_point(4);
        let mut acc = fs.geometry().zero_tangent(&p);
        for i in 0..4 {
            for j in 0..4 {
                acc = &acc + &stochastic_hamiltonian_grad(&oracle, &p, &[i], &[j]).unwrap();
            }
        }
        let full = hamiltonian_grad(&oracle, &p).unwrap();
        assert!(rel_dist(&acc.scale(1.0 / 16.0), &full) <= 1e-10, "{mode:?}");
    }
}

#[test]
fn identical_samples_reduce_to_deterministic() {
    let params = QuadBilinearParams::new(3, 1.0, 1.0).unwrap();
    let fs = QbFiniteSum::new(params, 2, 0.0, 0).unwrap();
    let det = QuadBilinear::new(params);
    let p = det.geometry().random_point(5);
    let want = hamiltonian_grad(&HamiltonianOracle::new(&det), &p).unwrap();
    let got = stochastic_hamiltonian_grad(&HamiltonianOracle::new(&fs), &p, &[0], &[1]).unwrap();
    assert!(rel_dist(&got, &want) <= 1e-12);
}

#[test]
fn stochastic_gradient_needs_sample_oracles() {
    let prob = qb(3, 1.0, 1.0);
    let oracle = HamiltonianOracle::new(&prob);
    let p = prob.geometry().random_point(0);
    assert!(matches!(
        stochastic_hamiltonian_grad(&oracle, &p, &[0], &[0]),
        Err(Error::NoSampleOracle)
    ));
}
