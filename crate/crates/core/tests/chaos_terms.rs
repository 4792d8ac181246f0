use qvlab::gaussian_paths::HurstParam;
use qvlab::limit_theory::{chaos_variance_terms, sigma_sq};
use qvlab::mixing_laws::MixingLaw;

// (law, H, T, L, a1, a2, a3): traces tr(KΣ_W KΣ_W), 2tr(KΣ_W KΣ_B),
// tr(KΣ_B KΣ_B) of the cell-discretized kernel, Richardson-extrapolated in
// the cell count (numpy, N up to 8000).
const TRACE_ORACLE: [(&str, f64, f64, f64, f64, f64, f64); 3] = [
    ("cauchy", 0.8, 1.0, 2.0, 0.377289454861, 0.693033871939, 0.337313149025),
    ("gaussian", 0.6, 1.0, 3.0, 0.479707499929, 0.925609746876, 0.450724041263),
    ("gaussian", 0.75, 1.0, 5.0, 0.314490770181, 0.484992829903, 0.212564274107),
];

#[test]
fn a_terms_match_trace_oracle() {
    for (law, h, t, l, a1, a2, a3) in TRACE_ORACLE {
        let law: MixingLaw = law.parse().unwrap();
        let terms = chaos_variance_terms(&law, HurstParam::new(h).unwrap(), t, l, 1e-7).unwrap();
        for (name, got, want) in [("a1", terms.a1, a1), ("a2", terms.a2, a2), ("a3", terms.a3, a3)] {
            assert!(
                (got - want).abs() <= 1e-6 * want,
                "{law} H={h} L={l} {name}: {got} vs oracle {want}"
            );
        }
    }
}

#[test]
fn scaled_terms_approach_sigma_sq() {
    let law = MixingLaw::cauchy();
    let h = HurstParam::new(0.8).unwrap();
    let sig = sigma_sq(&law, 1.0).unwrap();
    let mut prev_err = f64::INFINITY;
    let mut prev_fbm = f64::INFINITY;
    for l in [10.0, 100.0, 1000.0] {
        let t = chaos_variance_terms(&law, h, 1.0, l, 1e-5).unwrap();
        let err = (t.scaled_total() - sig).abs();
        assert!(err < prev_err, "L={l}: error {err} after {prev_err}");
        assert!(t.scaled_fbm_part() < prev_fbm);
        prev_err = err;
        prev_fbm = t.scaled_fbm_part();
    }
}
