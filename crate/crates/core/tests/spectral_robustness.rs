//! Cross-module integration checks: the spectral quantities must be stable
//! under basis enlargement, and the two rate notions (trajectory fit and
//! eigenvalue gap) must agree through the whole pipeline.

use mvlab::galerkin::{
    assemble_generator, assemble_perturbation, build_basis, spectral_panels, spectral_truncation,
    spectrum,
};
use mvlab::measure::gibbs_measure;
use mvlab::model::{make_model, ModelKind, ModelSpec};
use mvlab::selfconsistency::find_roots;

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn lambda_q_at(model: &ModelSpec, s: f64, size: usize) -> f64 {
    let r = spectral_truncation(model, size);
    let mu = gibbs_measure(model, s, r, spectral_panels(model, r, size)).unwrap();
    let basis = build_basis(mu, size).unwrap();
    let l = assemble_generator(&basis, model, s).unwrap();
    let a = assemble_perturbation(&basis, model, s).unwrap();
    spectrum(&l, &a).unwrap().lambda_q
}

#[test]
fn gap_is_stable_under_basis_enlargement_gaussian_family() {
    for (kind, beta) in [(ModelKind::GaussCos1d, 1.0), (ModelKind::OuBaseline, 0.0)] {
        let model = make_model(kind, beta, SQRT2).unwrap();
        let s = if beta == 0.0 {
            (-0.5f64).exp()
        } else {
            find_roots(&model, (-1.0, 1.0), 64).unwrap().roots[0].m
        };
        let small = lambda_q_at(&model, s, 30);
        let large = lambda_q_at(&model, s, 45);
        assert!(
            (small - large).abs() < 1e-6,
            "{kind:?}: lambda_q {small} vs {large}"
        );
    }
}

#[test]
fn gap_is_stable_under_basis_enlargement_double_well_family() {
    for kind in [ModelKind::Dawson, ModelKind::SubGaussian] {
        let model = make_model(kind, 1.0, 0.4).unwrap();
        let m_plus = find_roots(&model, (0.1, 2.0), 64)
            .unwrap()
            .roots
            .last()
            .unwrap()
            .m;
        let small = lambda_q_at(&model, m_plus, 30);
        let large = lambda_q_at(&model, m_plus, 45);
        assert!(
            (small - large).abs() < 1e-4,
            "{kind:?}: lambda_q {small} vs {large}"
        );
    }
}
