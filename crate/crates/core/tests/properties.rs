use enslab::config::{parse_sweep, set_dotted, RunConfig};
use enslab::counterexample::SweepSpec;
use enslab::fields::{gradient, l2_inner_vec, l2_norm_vec, Grid};
use enslab::operators::{
    adjusted_inner, leray_project, project, quadratic_form, random_field, random_solenoidal, AdjustedIPParams,
    RandomFieldSpec,
};
use proptest::prelude::*;
use serde_json::json;

fn spec() -> impl Strategy<Value = RandomFieldSpec> {
    (0usize..=5, 0usize..=3).prop_map(|(max_mode, max_degree)| RandomFieldSpec { max_mode, max_degree })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_an_orthogonal_idempotent(seed in any::<u64>(), spec in spec()) {
        let g = Grid::disk(1.0, 32, 16).unwrap();
        let u = random_field(&g, spec, seed);
        let h = leray_project(&u);
        let gq = gradient(&h.q);
        let scale = l2_norm_vec(&u).max(1e-300);
        prop_assert!(l2_inner_vec(&h.v, &gq).unwrap().abs() <= 1e-9 * scale * scale);
        let again = project(&h.v).axpy(-1.0, &h.v).unwrap();
        prop_assert!(l2_norm_vec(&again) <= 1e-9 * scale);
        let split = h.v.axpy(1.0, &gq).unwrap().axpy(-1.0, &u).unwrap();
        prop_assert!(l2_norm_vec(&split) <= 1e-12 * scale);
    }

    #[test]
    fn adjusted_inner_product_is_symmetric(a in any::<u64>(), b in any::<u64>(), eps in 0.0f64..1.0, c in 0.0f64..20.0) {
        let g = Grid::disk(1.0, 32, 16).unwrap();
        let u = random_field(&g, RandomFieldSpec::default(), a);
        let v = random_field(&g, RandomFieldSpec::default(), b);
        let p = AdjustedIPParams::new(eps, c).unwrap();
        let uv = adjusted_inner(&u, &v, p).unwrap();
        let vu = adjusted_inner(&v, &u, p).unwrap();
        prop_assert!((uv - vu).abs() <= 1e-10 * (uv.abs() + 1.0));
        prop_assert!(adjusted_inner(&u, &u, p).unwrap() >= 0.0);
    }

    #[test]
    fn quadratic_form_is_gradient_energy_for_solenoidal_fields(seed in any::<u64>()) {
        let g = Grid::disk(1.0, 32, 16).unwrap();
        let u = random_solenoidal(&g, RandomFieldSpec::default(), seed);
        let f = quadratic_form(&u).unwrap();
        prop_assert!(f.total > 0.0);
        prop_assert!((f.total - f.grad_energy - f.pressure_term).abs() <= 1e-8 * f.total);
    }

    #[test]
    fn torus_form_equals_dirichlet_energy(seed in any::<u64>(), spec in spec()) {
        let g = Grid::torus(2.0 * std::f64::consts::PI, 16, 16).unwrap();
        let u = random_field(&g, spec, seed);
        let f = quadratic_form(&u).unwrap();
        prop_assert!((f.total - f.grad_energy).abs() <= 1e-9 * (f.grad_energy + 1e-300));
    }

    #[test]
    fn sweep_values_are_geometric_and_bounded(min in 0.1f64..10.0, span in 1.0f64..100.0, count in 1usize..20, both in any::<bool>()) {
        let s = SweepSpec { min_abs: min, max_abs: min * span, count, both_signs: both };
        let v = s.values();
        prop_assert_eq!(v.len(), count * if both { 2 } else { 1 });
        for x in &v {
            prop_assert!(x.abs() >= min * (1.0 - 1e-12) && x.abs() <= min * span * (1.0 + 1e-12));
        }
    }

    #[test]
    fn sweep_expansion_round_trips(vals in prop::collection::vec(1e-4f64..1.0, 1..6)) {
        let text = format!("scheme.dt={}", vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        let (key, parsed) = parse_sweep(&text).unwrap();
        prop_assert_eq!(key.as_str(), "scheme.dt");
        prop_assert_eq!(parsed.len(), vals.len());
        for (p, v) in parsed.iter().zip(&vals) {
            let mut cfg = json!({});
            set_dotted(&mut cfg, &key, p.clone()).unwrap();
            let c = RunConfig::from_value(cfg).unwrap();
            prop_assert_eq!(c.scheme.dt, *v);
        }
    }
}
