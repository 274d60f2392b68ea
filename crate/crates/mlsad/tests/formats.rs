use std::collections::BTreeMap;

use mlsad::formats::{self, rttm, spm, track};
use mlsad_core::fusion::LrModel;
use mlsad_core::{DecisionTrack, PosteriorMatrix, Segment, Timeline};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = PosteriorMatrix> {
    (0usize..20, 1usize..9, 1u32..200_000).prop_flat_map(|(t, d, us)| {
        proptest::collection::vec(any::<f32>(), t * d).prop_map(move |v| {
            PosteriorMatrix::new("u", "l", f64::from(us) / 1e6, t, d, v).unwrap()
        })
    })
}

/// Millisecond-grid timelines.
fn timeline(id: &'static str) -> impl Strategy<Value = Timeline> {
    proptest::collection::vec((0u32..100_000, 1u32..5_000), 0..8).prop_map(move |raw| {
        let segs: Vec<Segment> = raw
            .into_iter()
            .map(|(a, len)| Segment::new(f64::from(a) / 1000.0, f64::from(a + len) / 1000.0))
            .collect();
        Timeline::new(id, &segs).unwrap()
    })
}

fn finite() -> impl Strategy<Value = f64> {
    any::<u64>().prop_map(f64::from_bits).prop_filter("finite", |v| v.is_finite())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn spm_bytes(m in matrix()) {
        let bytes = spm::encode(&m).unwrap();
        let back = spm::decode(&bytes, "u", "l").unwrap();
        prop_assert_eq!(spm::encode(&back).unwrap(), bytes);
        prop_assert_eq!(back.frame_step(), m.frame_step());
    }

    #[test]
    fn track_text(bits in proptest::collection::vec(any::<bool>(), 0..500), us in 1u32..100_000) {
        let t = DecisionTrack::new("u", "s", f64::from(us) / 1e6, bits).unwrap();
        prop_assert_eq!(track::parse_track(&track::format_track(&t), "u", "s").unwrap(), t);
    }

    #[test]
    fn rttm_text(a in timeline("a"), b in timeline("b")) {
        let map: BTreeMap<String, Timeline> = [a, b]
            .into_iter()
            .filter(|t| !t.is_empty())
            .map(|t| (t.utterance_id.clone(), t))
            .collect();
        let text = rttm::format_rttm(map.values());
        prop_assert_eq!(rttm::parse_rttm(&text).unwrap(), map.clone());
        for line in text.lines() {
            prop_assert_eq!(line.split_whitespace().count(), 10);
        }
        prop_assert_eq!(rttm::parse_uem(&rttm::format_uem(map.values())).unwrap(), map);
    }

    #[test]
    fn lr_model_json(weights in proptest::collection::vec(finite(), 1..6), bias in finite(), threshold in 0.0f64..=1.0) {
        let model = LrModel {
            language_order: (0..weights.len()).map(|i| format!("lang{i}")).collect(),
            weights,
            bias,
            threshold,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lr.json");
        formats::write_lr_model(&path, &model).unwrap();
        let back = formats::read_lr_model(&path).unwrap();
        prop_assert_eq!(back.bias.to_bits(), model.bias.to_bits());
        for (x, y) in back.weights.iter().zip(&model.weights) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        prop_assert_eq!(back, model);
    }
}
