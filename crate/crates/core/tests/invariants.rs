use proptest::prelude::*;

use eplab_core::model::{extract_tau, gauge_fix, orient_narrow_first, BasisTransform, TransformKind};
use eplab_core::{EffHamiltonian, C64};

fn complex(scale: f64) -> impl Strategy<Value = C64> {
    (-scale..scale, -scale..scale).prop_map(|(re, im)| C64::new(re, im))
}

fn hamiltonian() -> impl Strategy<Value = EffHamiltonian> {
    (complex(20.0), complex(20.0), complex(5.0), complex(5.0))
        .prop_map(|(e1, e2, h1, h2)| EffHamiltonian::from_pauli(e1, e2, h1, h2).unwrap())
}

fn scale(h: &EffHamiltonian) -> f64 {
    1.0 + h.matrix().max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn eigenvalues_reproduce_trace_and_determinant(h in hamiltonian()) {
        let ev = h.eigenvalues();
        let s = scale(&h);
        prop_assert!((ev.e1 + ev.e2 - h.trace()).norm() <= 1e-12 * s);
        prop_assert!((ev.e1 * ev.e2 - h.det()).norm() <= 1e-11 * s * s);
    }

    #[test]
    fn matrix_round_trip(h in hamiltonian()) {
        let back = EffHamiltonian::from_matrix(&h.matrix()).unwrap();
        prop_assert!((back.matrix() - h.matrix()).max_abs() <= 1e-14 * scale(&h));
    }

    #[test]
    fn json_round_trip_is_exact(h in hamiltonian()) {
        let text = serde_json::to_string(&h).unwrap();
        let back: EffHamiltonian = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, h);
    }

    #[test]
    fn transforms_are_similarities(h in hamiltonian(), a in -3.0f64..3.0, k in 0usize..3) {
        let kind = [TransformKind::GaugeO0, TransformKind::TauU, TransformKind::RotO][k];
        let t = BasisTransform::new(kind, a);
        let u = t.unitary();
        let direct = u * h.matrix() * u.adjoint();
        prop_assert!((t.apply(&h).matrix() - direct).max_abs() <= 1e-12 * scale(&h));
        prop_assert!((t.inverse().apply(&t.apply(&h)).matrix() - h.matrix()).max_abs() <= 1e-12 * scale(&h));
    }

    #[test]
    fn gauge_fix_makes_the_ratio_unimodular(h in hamiltonian()) {
        let Ok((g, _)) = gauge_fix(&h) else { return Ok(()) };
        let ih2 = C64::new(-g.h2().im, g.h2().re);
        let (num, den) = ((g.h1() + ih2).norm(), (g.h1() - ih2).norm());
        prop_assert!((num - den).abs() <= 1e-10 * (g.h1().norm() + g.h2().norm()));
        prop_assert!((g.mean() - h.mean()).norm() <= 1e-12 * scale(&h));
        let (r0, r1) = (h.radicand(), g.radicand());
        let s2 = r0.reh2 + r0.imh2 + 1.0;
        prop_assert!((r1.value() - r0.value()).norm() <= 1e-10 * s2);
    }

    #[test]
    fn tau_symmetrises_the_gauge_fixed_matrix(h in hamiltonian()) {
        let Ok((g, _)) = gauge_fix(&h) else { return Ok(()) };
        let Ok(tau) = extract_tau(&g) else { return Ok(()) };
        let m = BasisTransform::new(TransformKind::TauU, tau / 2.0).apply(&g).matrix();
        prop_assert!((m.get(0, 1) - m.get(1, 0)).norm() <= 1e-8 * scale(&h), "{:?}", m);
    }

    #[test]
    fn orientation_puts_the_narrow_mode_first(h in hamiltonian()) {
        let Ok((g, _)) = gauge_fix(&h) else { return Ok(()) };
        let (o, flip) = orient_narrow_first(&g);
        prop_assert!(o.h3().im >= 0.0);
        let (r0, r1) = (g.radicand(), o.radicand());
        prop_assert!((r1.value() - r0.value()).norm() <= 1e-12 * (1.0 + r0.reh2 + r0.imh2));
        if let (Ok(a), Ok(b)) = (extract_tau(&g), extract_tau(&o)) {
            let expected = if flip.is_some() { -a } else { a };
            prop_assert!((b - expected).abs() <= 1e-9);
        }
    }

    #[test]
    fn single_precision_agrees_with_double(h in hamiltonian()) {
        let ev64 = h.eigenvalues();
        let ev32 = h.cast::<f32>().eigenvalues();
        let to64 = |z: num_complex::Complex<f32>| C64::new(z.re as f64, z.im as f64);
        let d = (ev64.e1 - ev64.e2).norm();
        // conditioning of a double root: errors scale like sqrt(eps)·|H| near an EP
        prop_assume!(d > 1e-2 * scale(&h));
        let err = (to64(ev32.e1) - ev64.e1).norm().max((to64(ev32.e2) - ev64.e2).norm());
        prop_assert!(err <= 1e-4 * scale(&h), "{}", err);
    }
}
