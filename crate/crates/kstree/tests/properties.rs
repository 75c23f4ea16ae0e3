use std::f64::consts::PI;

use proptest::prelude::*;

use kstree::critical_sets::{is_member, CriticalSetId};
use kstree::graph_spectra::{assemble, assemble_with, trace_matrix, ChannelMask};
use kstree::moment_control::{modal_combination, synthesize_with, TargetOptions};
use kstree::pde_sim::{simulate_with, verify_null};
use kstree::tree_model::{EdgeFunction, GraphFunction, Model, StarTreeConfig};
use kstree::Parallelism;

fn tree(model: Model, lambda: f64) -> StarTreeConfig {
    StarTreeConfig::new(3, 1.0, lambda, model, 1.0).unwrap()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_pow(a: &[f64], n: usize) -> Vec<f64> {
    (0..n).fold(vec![1.0], |acc, _| poly_mul(&acc, a))
}

/// `c₀(1 − x²)⁴ + w_k x⁴(1 − x)⁴`, flat to third order at `x = 1` and coupled at the vertex.
fn coupled_polynomial(c0: f64, w: &[f64]) -> GraphFunction {
    let common = poly_pow(&[1.0, 0.0, -1.0], 4);
    let bump = poly_mul(&[0.0, 0.0, 0.0, 0.0, 1.0], &poly_pow(&[1.0, -1.0], 4));
    GraphFunction::new(
        w.iter()
            .map(|&wk| {
                let c: Vec<f64> = common.iter().zip(&bump).map(|(a, b)| c0 * a + wk * b).collect();
                EdgeFunction::polynomial(&c)
            })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn truncated_expansion_captures_energy(
        c0 in -1.0..1.0f64,
        w in proptest::collection::vec(-1.0..1.0f64, 3),
        model_two in any::<bool>(),
    ) {
        let cfg = tree(if model_two { Model::ModelII } else { Model::ModelI }, 1.0);
        let g = coupled_polynomial(c0, &w);
        let total = g.norm(1.0).powi(2);
        prop_assume!(total > 1e-6);
        let eps = assemble(&cfg, 40).unwrap();
        let captured: f64 = eps
            .iter()
            .flat_map(|e| e.basis.iter())
            .map(|b| b.inner_product(&g, 1.0).unwrap().powi(2))
            .sum();
        prop_assert!(captured >= 0.99 * total, "captured {captured} of {total}");
        prop_assert!(captured <= total * (1.0 + 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn nmixt_is_union_of_n3_and_n4(k in 1u64..400, exact in any::<bool>(), jitter in 1e-6..1e-3f64, length in 0.5..3.0f64) {
        let s = if exact { k as f64 } else { k as f64 + jitter };
        let lambda = s * PI * PI / (4.0 * length * length);
        let mixt = is_member(CriticalSetId::Nmixt, lambda, length).member;
        let parts = is_member(CriticalSetId::N3, lambda, length).member || is_member(CriticalSetId::N4, lambda, length).member;
        prop_assert_eq!(mixt, parts);
    }
}

#[test]
fn model_one_traces_nonzero_on_two_edges() {
    for lambda in [1.0, 2.3] {
        let cfg = tree(Model::ModelI, lambda);
        for ep in assemble(&cfg, 15).unwrap() {
            for tr in &ep.edge_traces {
                let nonzero = tr.iter().filter(|t| t.dxx_at_l.abs() > 1e-8).count();
                assert!(nonzero >= 2, "λ = {lambda}, σ = {}", ep.sigma);
            }
        }
    }
}

#[test]
fn model_two_traces_nonzero_on_two_edges() {
    let cfg = tree(Model::ModelII, 1.0);
    for ep in assemble(&cfg, 15).unwrap() {
        for tr in &ep.edge_traces {
            let values = tr.iter().filter(|t| t.value_at_l.abs() > 1e-8).count();
            let combos = tr.iter().filter(|t| t.lambda_value_plus_dxx_at_l.abs() > 1e-8).count();
            assert!(values >= 2 || combos >= 2, "σ = {}", ep.sigma);
        }
    }
}

#[test]
fn full_channels_have_full_rank_off_critical_sets() {
    for model in [Model::ModelI, Model::ModelII] {
        let cfg = tree(model, 1.0);
        let mask = ChannelMask::all(&cfg);
        for ep in assemble(&cfg, 10).unwrap() {
            let t = trace_matrix(&ep, &cfg, &mask).unwrap();
            let r = kstree::graph_spectra::left_null_space(&t);
            assert_eq!(r.deficiency, 0);
        }
    }
}

#[test]
fn policies_agree_end_to_end() {
    let cfg = tree(Model::ModelII, 1.0);
    let mask = ChannelMask::with_inactive(&cfg, &["a3", "b3"]).unwrap();
    let eps = assemble(&cfg, 6).unwrap();
    let y0 = modal_combination(&cfg, &eps, &[1.0, -1.0, 0.5, 2.0]).unwrap();
    let mut finals = Vec::new();
    for par in [Parallelism::Sequential, Parallelism::Parallel] {
        let a = assemble_with(&cfg, 6, par).unwrap();
        assert_eq!(a.iter().map(|e| e.sigma).collect::<Vec<_>>(), eps.iter().map(|e| e.sigma).collect::<Vec<_>>());
        let syn = synthesize_with(&cfg, &y0, 6, &mask, TargetOptions::default(), par).unwrap();
        let s = simulate_with(&cfg, &y0, &syn.control, 8, 16, par).unwrap();
        assert!(verify_null(&cfg, &s, 6).unwrap().passed);
        finals.push(s.final_modal);
    }
    assert_eq!(finals[0], finals[1]);
}

#[test]
fn inactive_channels_stay_silent() {
    let cfg = tree(Model::ModelI, 1.0);
    let eps = assemble(&cfg, 4).unwrap();
    let y0 = modal_combination(&cfg, &eps, &[1.0; 6]).unwrap();
    for inactive in [vec!["u1"], vec!["u2"], vec!["u3"], vec![]] {
        let mask = ChannelMask::with_inactive(&cfg, &inactive).unwrap();
        let syn = synthesize_with(&cfg, &y0, 4, &mask, TargetOptions::default(), Parallelism::default()).unwrap();
        for c in 0..3 {
            assert_eq!(syn.control.is_identically_zero(c), !mask.active[c]);
        }
        assert!(syn.moment_defect() < 1e-9);
    }
}
