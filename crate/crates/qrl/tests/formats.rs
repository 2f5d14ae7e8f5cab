use proptest::prelude::*;
use qrl::format::{
    checkpoint_bytes, dataset_bytes, parse_checkpoint, parse_dataset, read_checkpoint, read_dataset, read_grid,
    write_distance_matrix, EnvTag, Model,
};
use qrl_core::env::{DatasetMeta, TransitionDataset, TransitionRecord};
use qrl_core::nn::InputNorm;
use qrl_core::oracle::DistanceMatrix;
use qrl_core::quasimetric::{CriticSpec, HeadKind, QuasimetricCritic};
use qrl_core::td::QNetwork;

fn record() -> impl Strategy<Value = TransitionRecord> {
    let obs = || (-2.0f32..2.0, -0.1f32..0.1, prop::bool::ANY).prop_map(|(p, v, f)| [p, v, f32::from(u8::from(f))]);
    (obs(), -1i8..4, obs(), -2.0f32..0.0, 0u32..1000).prop_map(|(s, a, s_next, r, episode)| TransitionRecord {
        s,
        a,
        s_next,
        r,
        episode,
    })
}

fn dataset() -> impl Strategy<Value = TransitionDataset> {
    (prop::collection::vec(record(), 0..60), "[a-z]{1,12}", 1u32..200, any::<u64>()).prop_map(
        |(records, policy, resolution, seed)| TransitionDataset {
            meta: DatasetMeta {
                env_id: "mountaincar".into(),
                resolution,
                policy,
                seed,
                episodes: 3,
                max_episode_len: 17,
                goal_edge_cost: 0.25,
            },
            records,
        },
    )
}

fn small_spec(hidden: usize, latent: usize, k: usize, m: usize, actions: usize) -> CriticSpec {
    CriticSpec {
        obs_dim: 3,
        input_norm: InputNorm::new(vec![-0.3, 0.0, 0.0], vec![1.1, 14.0, 1.0]).unwrap(),
        num_actions: actions,
        encoder_hidden: vec![hidden],
        latent_dim: latent,
        projector_hidden: vec![hidden, hidden],
        head: HeadKind::Iqe {
            components: k,
            component_size: m,
        },
        transition_hidden: vec![hidden],
    }
}

fn model() -> impl Strategy<Value = Model> {
    (1usize..6, 1usize..5, 1usize..4, 1usize..4, 1usize..4, any::<u64>(), 0u8..4, -3.0f32..3.0).prop_map(
        |(h, latent, k, m, a, seed, kind, mix)| match kind {
            0 => {
                let mut c = QuasimetricCritic::new(small_spec(h, latent, k, m, a), seed).unwrap();
                c.set_mix_raw(mix);
                Model::Qrl(c)
            }
            1 => {
                let mut spec = small_spec(h, latent, k, m, a);
                spec.head = HeadKind::SymmetricL2 { width: k * m };
                Model::Qrl(QuasimetricCritic::new(spec, seed).unwrap())
            }
            2 => Model::QLearning(QNetwork::quasimetric(small_spec(h, latent, k, m, a), seed).unwrap()),
            _ => Model::QLearning(QNetwork::monolithic(InputNorm::identity(3), &[h, h + 1], a, seed).unwrap()),
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_round_trip(d in dataset()) {
        let bytes = dataset_bytes(&d).unwrap();
        prop_assert_eq!(&parse_dataset(&bytes).unwrap(), &d);
        prop_assert_eq!(&read_dataset(&bytes[..]).unwrap(), &d);
    }

    #[test]
    fn dataset_rejects_truncation(d in dataset(), cut in any::<prop::sample::Index>()) {
        let bytes = dataset_bytes(&d).unwrap();
        let n = cut.index(bytes.len());
        prop_assert!(parse_dataset(&bytes[..n]).is_err());
    }

    #[test]
    fn checkpoint_round_trip(m in model(), res in 1usize..500) {
        let tag = EnvTag { id: "mountaincar".into(), resolution: res };
        let bytes = checkpoint_bytes(&m, &tag).unwrap();
        let (back, back_tag) = parse_checkpoint(&bytes).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(&back_tag, &tag);
        prop_assert_eq!(read_checkpoint(&bytes[..]).unwrap().0, m);
    }

    #[test]
    fn checkpoint_rejects_truncation_and_trailing_bytes(m in model(), cut in any::<prop::sample::Index>()) {
        let tag = EnvTag { id: "gridworld".into(), resolution: 8 };
        let mut bytes = checkpoint_bytes(&m, &tag).unwrap();
        prop_assert!(parse_checkpoint(&bytes[..cut.index(bytes.len())]).is_err());
        bytes.push(0);
        prop_assert!(parse_checkpoint(&bytes).is_err());
    }

    #[test]
    fn distance_csv_round_trip(rows in prop::collection::vec(prop::collection::vec(
        prop_oneof![(0.0f64..1e6).boxed(), Just(f64::INFINITY).boxed(), (0u32..500).prop_map(f64::from).boxed()], 4), 1..6)) {
        let d = DistanceMatrix::from_rows(&rows).unwrap();
        let mut buf = Vec::new();
        write_distance_matrix(&mut buf, &d).unwrap();
        let back = read_grid(std::str::from_utf8(&buf).unwrap()).unwrap();
        let flat: Vec<f64> = back.into_iter().flatten().map(|c| c.unwrap()).collect();
        prop_assert_eq!(flat.as_slice(), d.as_slice());
    }
}

#[test]
fn bad_magic_is_rejected() {
    assert!(parse_dataset(b"NOPE\x01\x00").is_err());
    assert!(parse_checkpoint(b"NOPE\x00\x00\x00\x00").is_err());
}
