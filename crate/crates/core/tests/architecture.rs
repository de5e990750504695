mod support;

use proptest::prelude::*;
use scalelab::arch::{baseline_arch, ArchitectureSpec, Preset, ScaleFactors};
use scalelab::layers::LayerSpec;
use scalelab::model::Model;
use support::golden::{BASELINE_LISTING, COMPOUND_ROWS, COMPOUND_TOTAL};

fn rows(a: &ArchitectureSpec) -> Vec<(String, Vec<usize>, usize)> {
    a.validate()
        .unwrap()
        .rows
        .into_iter()
        .map(|r| (r.kind, r.output_shape, r.params))
        .collect()
}

#[test]
fn compound_chain_matches_every_row() {
    let got = rows(&Preset::Compound.build().unwrap());
    assert_eq!(got.len(), COMPOUND_ROWS.len());
    for (i, ((k, s, p), (ek, es, ep))) in got.iter().zip(COMPOUND_ROWS.iter()).enumerate() {
        assert_eq!((k.as_str(), s.as_slice(), *p), (*ek, *es, *ep), "row {i}");
    }
    let total: usize = COMPOUND_ROWS.iter().map(|r| r.2).sum();
    assert_eq!(total, COMPOUND_TOTAL);
    assert_eq!(Preset::Compound.build().unwrap().total_params().unwrap(), COMPOUND_TOTAL);
}

#[test]
fn baseline_listing_rows_are_compound_rows() {
    for (k, s, p) in BASELINE_LISTING {
        assert!(
            COMPOUND_ROWS.iter().any(|&(ek, es, ep)| ek == k && es == s && ep == p),
            "{k} {s:?} {p}"
        );
    }
}

#[test]
fn baseline_listing_is_not_a_chain() {
    // Replaying the listing's own layers from its first row breaks at the
    // first pool: 106 halves to 53.
    let pooled = LayerSpec::MaxPool2d { pool: 2 }.output_shape(BASELINE_LISTING[0].1).unwrap();
    assert_eq!(pooled, vec![53, 53, 16]);
    assert_ne!(pooled.as_slice(), BASELINE_LISTING[1].1);
}

#[test]
fn built_models_match_inferred_totals() {
    for preset in Preset::ALL {
        let arch = preset.build().unwrap();
        let model = Model::build(&arch, 1).unwrap();
        assert_eq!(model.param_count(), arch.total_params().unwrap(), "{}", preset.name());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wider_never_has_fewer_parameters(a in 1.0f64..3.0, b in 1.0f64..3.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let base = baseline_arch();
        let p_lo = base.scale_width(lo).unwrap().total_params().unwrap();
        let p_hi = base.scale_width(hi).unwrap().total_params().unwrap();
        prop_assert!(p_lo <= p_hi);
    }

    #[test]
    fn width_and_depth_commute(w in 1.0f64..2.5, d in 1usize..4) {
        let base = baseline_arch();
        let wd = base.scale_width(w).unwrap().scale_depth(d).unwrap();
        let dw = base.scale_depth(d).unwrap().scale_width(w).unwrap();
        prop_assert_eq!(wd, dw);
    }

    #[test]
    fn resolution_commutes_with_width(w in 1.0f64..2.0, r in 1.0f64..1.6) {
        let base = baseline_arch();
        let a = base.scale_width(w).unwrap().scale_resolution(r).unwrap();
        let b = base.scale_resolution(r).unwrap().scale_width(w).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn compound_is_the_composition(w in 1.0f64..2.0, d in 1usize..3, r in 1.0f64..1.5) {
        let base = baseline_arch();
        let direct = base.scale_compound(ScaleFactors { width: w, depth: d, resolution: r }).unwrap();
        let steps = base.scale_width(w).unwrap().scale_depth(d).unwrap().scale_resolution(r).unwrap();
        prop_assert_eq!(direct, steps);
    }

    #[test]
    fn text_format_round_trips(w in 1.0f64..2.0, d in 1usize..3) {
        let a = baseline_arch().scale_width(w).unwrap().scale_depth(d).unwrap();
        prop_assert_eq!(ArchitectureSpec::from_text(&a.to_text()).unwrap(), a);
    }
}
