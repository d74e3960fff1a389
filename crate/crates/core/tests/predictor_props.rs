use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vmscale::predictor::{edp, fitness, forward, network_size, NetworkGenome, Topology};
use vmscale::traces::TrainingWindow;

fn setup(seed: u64, n: usize, p: usize, x: usize) -> (Topology, NetworkGenome<f64>, Vec<TrainingWindow<f64>>) {
    let t = Topology::new(n, p, 1, x).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = NetworkGenome::random(&t, &mut rng);
    let w = (0..5)
        .map(|i| TrainingWindow {
            inputs: (0..n * x).map(|j| ((i * 7 + j * 3) % 10) as f64 / 10.0).collect(),
            target: (0..x).map(|k| ((i + k) % 4) as f64 / 4.0).collect(),
        })
        .collect();
    (t, g, w)
}

proptest! {
    #[test]
    fn forward_is_deterministic(seed in any::<u64>(), n in 1usize..5, p in 1usize..6, x in 1usize..4) {
        let (t, g, w) = setup(seed, n, p, x);
        let a = forward(&g, &t, &w[0].inputs).unwrap();
        let b = forward(&g, &t, &w[0].inputs).unwrap();
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn fitness_is_non_negative(seed in any::<u64>(), n in 1usize..5, p in 1usize..6, x in 1usize..4) {
        let (t, g, w) = setup(seed, n, p, x);
        let f = fitness(&g, &t, &w).unwrap();
        prop_assert!(f.aggregate >= 0.0 && f.per_resource.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn fitness_is_zero_on_own_predictions(seed in any::<u64>(), n in 1usize..5, p in 1usize..6, x in 1usize..4) {
        let (t, g, mut w) = setup(seed, n, p, x);
        for win in &mut w {
            win.target = forward(&g, &t, &win.inputs).unwrap();
        }
        prop_assert_eq!(fitness(&g, &t, &w).unwrap().aggregate, 0.0);
    }

    #[test]
    fn channels_are_disjoint(seed in any::<u64>(), n in 1usize..5, p in 1usize..6, k in 0usize..3, delta in -2.0..2.0f64) {
        let x = 3;
        let (t, g, w) = setup(seed, n, p, x);
        let mut perturbed = g.clone();
        let c = t.channel_len();
        for v in &mut perturbed.weights[k * c..(k + 1) * c] {
            *v += delta;
        }
        let a = forward(&g, &t, &w[1].inputs).unwrap();
        let b = forward(&perturbed, &t, &w[1].inputs).unwrap();
        for j in (0..x).filter(|&j| j != k) {
            prop_assert_eq!(a[j].to_bits(), b[j].to_bits());
        }
    }

    #[test]
    fn edp_is_a_convex_combination(prev in 0.0..1.0f64, curr in 0.0..1.0f64, alpha in 0.5001..=1.0f64) {
        let e = edp(prev, curr, alpha).unwrap();
        prop_assert!(prev.min(curr) - 1e-15 <= e && e <= prev.max(curr) + 1e-15);
    }
}

#[test]
fn worked_network_size() {
    assert_eq!(network_size(&Topology::new(4, 3, 1, 1).unwrap()), 18);
    assert_eq!(network_size(&Topology::new(3, 5, 1, 1).unwrap()), 25);
}

#[test]
fn single_precision_matches_double() {
    let (t, g, w) = setup(9, 3, 5, 2);
    let g32 = NetworkGenome::<f32>::new(g.weights.iter().map(|&v| v as f32).collect());
    let inputs32: Vec<f32> = w[0].inputs.iter().map(|&v| v as f32).collect();
    let a = forward(&g, &t, &w[0].inputs).unwrap();
    let b = forward(&g32, &t, &inputs32).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - *y as f64).abs() < 1e-5);
    }
}
